use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::BayesError;

/// Directed acyclic graph over named variables. Parent lists are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDag", into = "RawDag")]
pub struct Dag {
    nodes: Vec<String>,
    parents: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawDag {
    nodes: Vec<String>,
    parents: Vec<Vec<usize>>,
}

impl TryFrom<RawDag> for Dag {
    type Error = BayesError;

    fn try_from(raw: RawDag) -> Result<Self, BayesError> {
        if raw.parents.len() != raw.nodes.len() {
            return Err(BayesError::InvalidNetwork("parents list does not match nodes".into()));
        }
        let mut dag = Dag::empty(raw.nodes)?;
        for (child, ps) in raw.parents.iter().enumerate() {
            for &p in ps {
                if p >= dag.len() {
                    return Err(BayesError::InvalidNetwork(format!("parent index {p} out of range")));
                }
                dag.add_edge(p, child)?;
            }
        }
        Ok(dag)
    }
}

impl From<Dag> for RawDag {
    fn from(d: Dag) -> Self {
        RawDag {
            nodes: d.nodes,
            parents: d.parents,
        }
    }
}

impl Dag {
    pub fn empty<S: Into<String>>(nodes: impl IntoIterator<Item = S>) -> Result<Self, BayesError> {
        let nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert(n.as_str()) {
                return Err(BayesError::InvalidNetwork(format!("duplicate node `{n}`")));
            }
        }
        let parents = vec![Vec::new(); nodes.len()];
        Ok(Self { nodes, parents })
    }

    /// Builds a DAG from `(from, to)` name pairs.
    pub fn from_edges<S: Into<String>>(
        nodes: impl IntoIterator<Item = S>,
        edges: &[(&str, &str)],
    ) -> Result<Self, BayesError> {
        let mut dag = Self::empty(nodes)?;
        for (a, b) in edges {
            let (a, b) = (dag.require(a)?, dag.require(b)?);
            dag.add_edge(a, b)?;
        }
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub(crate) fn require(&self, name: &str) -> Result<usize, BayesError> {
        self.index_of(name)
            .ok_or_else(|| BayesError::UnknownVariable(name.to_string()))
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// All edges as `(from, to)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect();
        e.sort_unstable();
        e
    }

    /// True if a directed path leads from `from` to `to`.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        // walk parent links backwards from `to`
        let mut seen = vec![false; self.len()];
        let mut stack = vec![to];
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if p == from {
                    return true;
                }
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        false
    }

    /// Adds `from -> to`, refusing self-loops and cycles.
    pub fn add_edge(&mut self, from: usize, to: usize) -> Result<(), BayesError> {
        if from == to {
            return Err(BayesError::InvalidNetwork(format!(
                "self-loop on `{}`",
                self.nodes[from]
            )));
        }
        if self.has_edge(from, to) {
            return Ok(());
        }
        if self.reaches(to, from) {
            return Err(BayesError::Cycle {
                from: self.nodes[from].clone(),
                to: self.nodes[to].clone(),
            });
        }
        let ps = &mut self.parents[to];
        let pos = ps.binary_search(&from).unwrap_err();
        ps.insert(pos, from);
        Ok(())
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) -> bool {
        match self.parents[to].binary_search(&from) {
            Ok(pos) => {
                self.parents[to].remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    /// Kahn order, smallest index first among ready nodes.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().len() == self.len()
    }

    pub fn ancestors(&self, node: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if out.insert(p) {
                    stack.push(p);
                }
            }
        }
        out
    }

    /// One `A -> B` line per edge.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in self.edges() {
            writeln!(out, "{} -> {}", self.nodes[a], self.nodes[b]).unwrap();
        }
        out
    }

    /// Graphviz description.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph bn {\n");
        for n in &self.nodes {
            writeln!(out, "  \"{}\";", n.replace('"', "\\\"")).unwrap();
        }
        for (a, b) in self.edges() {
            writeln!(
                out,
                "  \"{}\" -> \"{}\";",
                self.nodes[a].replace('"', "\\\""),
                self.nodes[b].replace('"', "\\\"")
            )
            .unwrap();
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalPaths {
    pub target: String,
    pub direct: Vec<String>,
    pub indirect: Vec<String>,
}

/// Direct causes are the parents of `target`; indirect causes are its other
/// ancestors.
pub fn causal_paths(dag: &Dag, target: &str) -> Result<CausalPaths, BayesError> {
    let t = dag.require(target)?;
    let direct: BTreeSet<usize> = dag.parents(t).iter().copied().collect();
    let names = |s: &mut dyn Iterator<Item = usize>| -> Vec<String> { s.map(|i| dag.nodes()[i].clone()).collect() };
    Ok(CausalPaths {
        target: target.to_string(),
        direct: names(&mut direct.iter().copied()),
        indirect: names(&mut dag.ancestors(t).into_iter().filter(|a| !direct.contains(a))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles_are_refused() {
        let mut d = Dag::from_edges(["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        assert!(matches!(d.add_edge(2, 0), Err(BayesError::Cycle { .. })));
        assert!(d.add_edge(0, 0).is_err());
        assert!(d.add_edge(0, 2).is_ok());
        assert!(d.is_acyclic());
        assert_eq!(d.topological_order(), vec![0, 1, 2]);
        assert_eq!(d.edges(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn causal_paths_examples() {
        let d = Dag::empty(["x", "y"]).unwrap();
        let p = causal_paths(&d, "y").unwrap();
        assert!(p.direct.is_empty() && p.indirect.is_empty());

        let chain = Dag::from_edges(
            ["victimCategory", "timeToEval", "TIW"],
            &[("victimCategory", "timeToEval"), ("timeToEval", "TIW")],
        )
        .unwrap();
        let p = causal_paths(&chain, "TIW").unwrap();
        assert_eq!(p.direct, vec!["timeToEval"]);
        assert_eq!(p.indirect, vec!["victimCategory"]);

        let diamond = Dag::from_edges(["A", "B", "C", "D"], &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")]).unwrap();
        let p = causal_paths(&diamond, "D").unwrap();
        assert_eq!(p.direct, vec!["B", "C"]);
        assert_eq!(p.indirect, vec!["A"]);
        assert!(matches!(
            causal_paths(&diamond, "E"),
            Err(BayesError::UnknownVariable(_))
        ));
    }

    #[test]
    fn exports() {
        let d = Dag::from_edges(["A", "B"], &[("A", "B")]).unwrap();
        assert_eq!(d.edge_list(), "A -> B\n");
        assert!(d.to_dot().contains("\"A\" -> \"B\";"));
    }

    #[test]
    fn serde_rejects_cycles() {
        let ok: Dag = serde_json::from_str(r#"{"nodes":["a","b"],"parents":[[],[0]]}"#).unwrap();
        assert!(ok.has_edge(0, 1));
        assert!(serde_json::from_str::<Dag>(r#"{"nodes":["a","b"],"parents":[[1],[0]]}"#).is_err());
        assert!(serde_json::from_str::<Dag>(r#"{"nodes":["a","b"],"parents":[[5],[]]}"#).is_err());
    }
}
