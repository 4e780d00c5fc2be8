use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{BayesError, BayesNet};

/// Table over a sorted list of variables; the last variable varies fastest.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    card: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn scalar(v: f64) -> Self {
        Self {
            vars: Vec::new(),
            card: Vec::new(),
            values: vec![v],
        }
    }

    fn from_cpt(bn: &BayesNet, node: usize) -> Self {
        let mut vars: Vec<usize> = bn.dag().parents(node).to_vec();
        vars.push(node);
        vars.sort_unstable();
        let card: Vec<usize> = vars.iter().map(|&v| bn.arity(v)).collect();
        let size: usize = card.iter().product();
        let mut assignment = vec![0usize; bn.dag().len()];
        let mut values = Vec::with_capacity(size);
        for idx in 0..size {
            decode(idx, &card, |pos, s| assignment[vars[pos]] = s);
            values.push(bn.cpt(node)[bn.config_of(node, &assignment)][assignment[node]]);
        }
        Self { vars, card, values }
    }

    fn reduce(&self, var: usize, state: usize) -> Self {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        let mut card = self.card.clone();
        vars.remove(pos);
        card.remove(pos);
        let mut states = vec![0usize; self.vars.len()];
        let mut values = Vec::with_capacity(self.values.len() / self.card[pos]);
        for (idx, &v) in self.values.iter().enumerate() {
            decode(idx, &self.card, |p, s| states[p] = s);
            if states[pos] == state {
                values.push(v);
            }
        }
        Self { vars, card, values }
    }

    fn product(&self, other: &Factor) -> Self {
        let vars: Vec<usize> = self
            .vars
            .iter()
            .chain(&other.vars)
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let card: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.vars
                    .iter()
                    .position(|x| x == v)
                    .map(|p| self.card[p])
                    .unwrap_or_else(|| other.card[other.vars.iter().position(|x| x == v).unwrap()])
            })
            .collect();
        let map_a: Vec<usize> = self.vars.iter().map(|v| vars.binary_search(v).unwrap()).collect();
        let map_b: Vec<usize> = other.vars.iter().map(|v| vars.binary_search(v).unwrap()).collect();
        let size: usize = card.iter().product();
        let mut states = vec![0usize; vars.len()];
        let mut values = Vec::with_capacity(size);
        for idx in 0..size {
            decode(idx, &card, |p, s| states[p] = s);
            let ia = encode(map_a.iter().map(|&p| states[p]), &self.card);
            let ib = encode(map_b.iter().map(|&p| states[p]), &other.card);
            values.push(self.values[ia] * other.values[ib]);
        }
        Self { vars, card, values }
    }

    fn sum_out(&self, var: usize) -> Self {
        let pos = self.vars.iter().position(|&v| v == var).expect("variable in factor");
        let mut vars = self.vars.clone();
        let mut card = self.card.clone();
        vars.remove(pos);
        card.remove(pos);
        let size: usize = card.iter().product();
        let mut values = vec![0.0; size];
        let mut states = vec![0usize; self.vars.len()];
        for (idx, &v) in self.values.iter().enumerate() {
            decode(idx, &self.card, |p, s| states[p] = s);
            let target = encode(
                states.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &s)| s),
                &card,
            );
            values[target] += v;
        }
        Self { vars, card, values }
    }
}

fn decode(mut idx: usize, card: &[usize], mut set: impl FnMut(usize, usize)) {
    for pos in (0..card.len()).rev() {
        set(pos, idx % card[pos]);
        idx /= card[pos];
    }
}

fn encode(states: impl Iterator<Item = usize>, card: &[usize]) -> usize {
    states.zip(card).fold(0, |acc, (s, &c)| acc * c + s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub target: String,
    pub labels: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl Posterior {
    pub fn probability_of(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probabilities[i])
    }
}

pub type Evidence = BTreeMap<String, String>;

/// Exact posterior of `target` given `evidence` by variable elimination.
pub fn query(bn: &BayesNet, evidence: &Evidence, target: &str) -> Result<Posterior, BayesError> {
    let t = bn.node_index(target)?;
    let mut ev = Vec::with_capacity(evidence.len());
    for (var, label) in evidence {
        let node = bn.node_index(var)?;
        if node == t {
            return Err(BayesError::TargetInEvidence(target.to_string()));
        }
        ev.push((node, bn.category_index(node, label)?));
    }
    let probabilities = query_indexed(bn, &ev, t)?;
    Ok(Posterior {
        target: target.to_string(),
        labels: bn.categories(t).to_vec(),
        probabilities,
    })
}

/// [`query`] on node and state indices.
pub fn query_indexed(bn: &BayesNet, evidence: &[(usize, usize)], target: usize) -> Result<Vec<f64>, BayesError> {
    let dag = bn.dag();
    // Nodes outside the ancestral closure of target and evidence sum to 1.
    let mut relevant: BTreeSet<usize> = BTreeSet::from([target]);
    for &(n, _) in evidence {
        relevant.insert(n);
    }
    for n in relevant.clone() {
        relevant.extend(dag.ancestors(n));
    }

    let mut factors: Vec<Factor> = relevant
        .iter()
        .map(|&n| {
            evidence
                .iter()
                .fold(Factor::from_cpt(bn, n), |f, &(v, s)| f.reduce(v, s))
        })
        .collect();

    let observed: BTreeSet<usize> = evidence.iter().map(|&(n, _)| n).collect();
    let mut hidden: BTreeSet<usize> = relevant
        .iter()
        .copied()
        .filter(|n| *n != target && !observed.contains(n))
        .collect();
    while !hidden.is_empty() {
        let var = *hidden
            .iter()
            .min_by_key(|&&v| {
                let neighbours: BTreeSet<usize> = factors
                    .iter()
                    .filter(|f| f.vars.contains(&v))
                    .flat_map(|f| f.vars.iter().copied())
                    .filter(|&u| u != v)
                    .collect();
                (neighbours.len(), v)
            })
            .expect("non-empty");
        hidden.remove(&var);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        let merged = touching.iter().fold(Factor::scalar(1.0), |acc, f| acc.product(f));
        factors.push(merged.sum_out(var));
    }

    let joint = factors.iter().fold(Factor::scalar(1.0), |acc, f| acc.product(f));
    debug_assert_eq!(joint.vars, vec![target]);
    let z: f64 = joint.values.iter().sum();
    if z <= 0.0 || !z.is_finite() {
        return Err(BayesError::ZeroProbabilityEvidence);
    }
    Ok(joint.values.iter().map(|v| v / z).collect())
}
