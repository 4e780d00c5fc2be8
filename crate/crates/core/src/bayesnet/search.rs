use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::CategoricalData;
use super::score::{ScoreCache, ScoredDag};
use super::{BayesError, Dag};
use crate::tabular::Dataset;

/// Score differences below this are ties.
pub const SCORE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HillClimbConfig {
    pub max_parents: usize,
    pub restarts: usize,
    pub seed: u64,
    /// `[from, to]` pairs that may not appear.
    pub forbidden: Vec<(String, String)>,
    /// `[from, to]` pairs that must appear.
    pub required: Vec<(String, String)>,
}

impl Default for HillClimbConfig {
    fn default() -> Self {
        Self {
            max_parents: 5,
            restarts: 5,
            seed: 0,
            forbidden: Vec::new(),
            required: Vec::new(),
        }
    }
}

impl HillClimbConfig {
    /// Forbids every edge leaving `target`.
    pub fn with_sink<S: AsRef<str>>(mut self, target: &str, variables: &[S]) -> Self {
        for v in variables {
            let v = v.as_ref();
            if v != target && !self.forbidden.iter().any(|(a, b)| a == target && b == v) {
                self.forbidden.push((target.to_string(), v.to_string()));
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum MoveKind {
    Delete,
    Add,
    Reverse,
}

#[derive(Debug, Clone, Copy)]
struct Move {
    kind: MoveKind,
    from: usize,
    to: usize,
    delta: f64,
}

impl Move {
    fn key(&self) -> (MoveKind, usize, usize) {
        (self.kind, self.from, self.to)
    }
}

struct Search<'a> {
    cache: ScoreCache<'a>,
    n: usize,
    max_parents: usize,
    forbidden: BTreeSet<(usize, usize)>,
    required: BTreeSet<(usize, usize)>,
}

fn with(ps: &[usize], v: usize) -> Vec<usize> {
    let mut out = ps.to_vec();
    let pos = out.binary_search(&v).unwrap_err();
    out.insert(pos, v);
    out
}

fn without(ps: &[usize], v: usize) -> Vec<usize> {
    ps.iter().copied().filter(|&p| p != v).collect()
}

impl Search<'_> {
    fn legal_moves(&mut self, dag: &mut Dag) -> Vec<Move> {
        let mut moves = Vec::new();
        for from in 0..self.n {
            for to in 0..self.n {
                if from == to {
                    continue;
                }
                let pt = dag.parents(to).to_vec();
                let base_to = self.cache.family(to, &pt);
                if dag.has_edge(from, to) {
                    if self.required.contains(&(from, to)) {
                        continue;
                    }
                    let reduced = without(&pt, from);
                    let d_to = self.cache.family(to, &reduced) - base_to;
                    moves.push(Move {
                        kind: MoveKind::Delete,
                        from,
                        to,
                        delta: d_to,
                    });
                    let pf = dag.parents(from).to_vec();
                    if self.forbidden.contains(&(to, from)) || pf.len() >= self.max_parents {
                        continue;
                    }
                    dag.remove_edge(from, to);
                    let other_path = dag.reaches(from, to);
                    dag.add_edge(from, to).expect("restoring an existing edge");
                    if other_path {
                        continue;
                    }
                    let d_from = self.cache.family(from, &with(&pf, to)) - self.cache.family(from, &pf);
                    moves.push(Move {
                        kind: MoveKind::Reverse,
                        from,
                        to,
                        delta: d_to + d_from,
                    });
                } else {
                    if self.forbidden.contains(&(from, to))
                        || pt.len() >= self.max_parents
                        || dag.has_edge(to, from)
                        || dag.reaches(to, from)
                    {
                        continue;
                    }
                    moves.push(Move {
                        kind: MoveKind::Add,
                        from,
                        to,
                        delta: self.cache.family(to, &with(&pt, from)) - base_to,
                    });
                }
            }
        }
        moves
    }

    /// Best strictly improving move; near-equal deltas are broken by the
    /// move key (deletions first, then smallest `(from, to)`).
    fn best_move(moves: &[Move]) -> Option<Move> {
        let top = moves.iter().map(|m| m.delta).fold(f64::NEG_INFINITY, f64::max);
        if top <= SCORE_TOL {
            return None;
        }
        moves
            .iter()
            .filter(|m| m.delta >= top - SCORE_TOL)
            .min_by_key(|m| m.key())
            .copied()
    }

    fn climb(&mut self, mut dag: Dag) -> Dag {
        loop {
            let moves = self.legal_moves(&mut dag);
            let Some(m) = Self::best_move(&moves) else {
                return dag;
            };
            match m.kind {
                MoveKind::Add => dag.add_edge(m.from, m.to).expect("legal add"),
                MoveKind::Delete => {
                    dag.remove_edge(m.from, m.to);
                }
                MoveKind::Reverse => {
                    dag.remove_edge(m.from, m.to);
                    dag.add_edge(m.to, m.from).expect("legal reversal");
                }
            }
            debug_assert!(dag.is_acyclic());
        }
    }

    /// Random DAG containing the required edges, following a random
    /// topological order of the required-edge graph.
    fn random_dag(&self, names: &[String], rng: &mut ChaCha8Rng) -> Dag {
        let mut indeg = vec![0usize; self.n];
        for &(_, b) in &self.required {
            indeg[b] += 1;
        }
        let mut ready: Vec<usize> = (0..self.n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.n);
        while !ready.is_empty() {
            let v = ready.swap_remove(rng.gen_range(0..ready.len()));
            order.push(v);
            for &(a, b) in &self.required {
                if a == v {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        ready.push(b);
                    }
                }
            }
        }
        let p = if self.n > 1 {
            (2.0 / (self.n - 1) as f64).min(0.5)
        } else {
            0.0
        };
        let mut dag = Dag::empty(names.iter().cloned()).expect("unique names");
        for (pos, &b) in order.iter().enumerate() {
            for &a in &order[..pos] {
                let required = self.required.contains(&(a, b));
                let draw = rng.gen::<f64>() < p;
                if required || (draw && !self.forbidden.contains(&(a, b)) && dag.parents(b).len() < self.max_parents) {
                    dag.add_edge(a, b).expect("edges follow a topological order");
                }
            }
        }
        dag
    }
}

fn resolve_edges(names: &[String], edges: &[(String, String)]) -> Result<BTreeSet<(usize, usize)>, BayesError> {
    let idx = |n: &str| {
        names
            .iter()
            .position(|x| x == n)
            .ok_or_else(|| BayesError::UnknownVariable(n.to_string()))
    };
    edges.iter().map(|(a, b)| Ok((idx(a)?, idx(b)?))).collect()
}

/// Greedy BIC hill climbing over all columns of `ds`, with seeded random
/// restarts. Returns the best local optimum found.
pub fn hill_climb(ds: &Dataset, config: &HillClimbConfig) -> Result<ScoredDag, BayesError> {
    let data = CategoricalData::from_dataset(ds)?;
    if data.names.len() < 2 {
        return Err(BayesError::TooFewVariables(data.names.len()));
    }
    if data.n == 0 {
        return Err(BayesError::NoRows);
    }
    let forbidden = resolve_edges(&data.names, &config.forbidden)?;
    let required = resolve_edges(&data.names, &config.required)?;
    if let Some(&(a, b)) = forbidden.intersection(&required).next() {
        return Err(BayesError::ConflictingEdge {
            from: data.names[a].clone(),
            to: data.names[b].clone(),
        });
    }
    let mut start = Dag::empty(data.names.iter().cloned())?;
    for &(a, b) in &required {
        if a == b {
            return Err(BayesError::InvalidNetwork(format!("self-loop on `{}`", data.names[a])));
        }
        start.add_edge(a, b).map_err(|_| BayesError::RequiredCycle)?;
    }
    if (0..start.len()).any(|i| start.parents(i).len() > config.max_parents) {
        return Err(BayesError::InvalidConfig("required edges exceed max_parents".into()));
    }

    let names = data.names.clone();
    let mut search = Search {
        cache: ScoreCache::new(&data),
        n: names.len(),
        max_parents: config.max_parents,
        forbidden,
        required,
    };
    let first = search.climb(start);
    let mut best = search.cache.score_dag(&first);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        let from = search.random_dag(&names, &mut rng);
        let local = search.climb(from);
        let scored = search.cache.score_dag(&local);
        if scored.total > best.total + SCORE_TOL {
            best = scored;
        }
    }
    Ok(best)
}

/// Whether any legal single-edge move raises the score by more than
/// [`SCORE_TOL`].
pub fn is_local_optimum(ds: &Dataset, scored: &ScoredDag, config: &HillClimbConfig) -> Result<bool, BayesError> {
    let data = CategoricalData::from_dataset(&ds.select_columns(scored.dag.nodes())?)?;
    let names = data.names.clone();
    let mut search = Search {
        cache: ScoreCache::new(&data),
        n: names.len(),
        max_parents: config.max_parents,
        forbidden: resolve_edges(&names, &config.forbidden)?,
        required: resolve_edges(&names, &config.required)?,
    };
    let mut dag = scored.dag.clone();
    let moves = search.legal_moves(&mut dag);
    Ok(Search::best_move(&moves).is_none())
}
