//! Sequential reference graph and the operation alphabet shared by the
//! engines, the history recorder and the checker.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::edge::EdgeOutcome;
use crate::Key;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    AddVertex(Key),
    RemoveVertex(Key),
    ContainsVertex(Key),
    AddEdge(Key, Key),
    RemoveEdge(Key, Key),
    ContainsEdge(Key, Key),
    GetPath(Key, Key),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::AddVertex(_) => "add_vertex",
            Op::RemoveVertex(_) => "remove_vertex",
            Op::ContainsVertex(_) => "contains_vertex",
            Op::AddEdge(..) => "add_edge",
            Op::RemoveEdge(..) => "remove_edge",
            Op::ContainsEdge(..) => "contains_edge",
            Op::GetPath(..) => "get_path",
        }
    }

    pub fn is_lookup(&self) -> bool {
        matches!(
            self,
            Op::ContainsVertex(_) | Op::ContainsEdge(..) | Op::GetPath(..)
        )
    }

    pub fn args(&self) -> Vec<Key> {
        match *self {
            Op::AddVertex(k) | Op::RemoveVertex(k) | Op::ContainsVertex(k) => vec![k],
            Op::AddEdge(k, l) | Op::RemoveEdge(k, l) | Op::ContainsEdge(k, l) | Op::GetPath(k, l) => {
                vec![k, l]
            }
        }
    }

    /// Builds an op from its name and arguments.
    pub fn from_parts(name: &str, args: &[Key]) -> Option<Op> {
        Some(match (name, args) {
            ("add_vertex", &[k]) => Op::AddVertex(k),
            ("remove_vertex", &[k]) => Op::RemoveVertex(k),
            ("contains_vertex", &[k]) => Op::ContainsVertex(k),
            ("add_edge", &[k, l]) => Op::AddEdge(k, l),
            ("remove_edge", &[k, l]) => Op::RemoveEdge(k, l),
            ("contains_edge", &[k, l]) => Op::ContainsEdge(k, l),
            ("get_path", &[k, l]) => Op::GetPath(k, l),
            _ => return None,
        })
    }

    /// Number of key arguments taken by the named op.
    pub fn arity(name: &str) -> Option<usize> {
        match name {
            "add_vertex" | "remove_vertex" | "contains_vertex" => Some(1),
            "add_edge" | "remove_edge" | "contains_edge" | "get_path" => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        for a in self.args() {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OpResult {
    Bool(bool),
    Edge(EdgeOutcome),
    Path(Option<Vec<Key>>),
    /// A bounded reachability query that gave up.
    Inconclusive,
}

impl fmt::Display for OpResult {
    /// Single-token rendering used by history files.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpResult::Bool(b) => write!(f, "{b}"),
            OpResult::Edge(o) => f.write_str(o.token()),
            OpResult::Path(None) => f.write_str("nil"),
            OpResult::Path(Some(p)) => {
                let parts: Vec<String> = p.iter().map(Key::to_string).collect();
                f.write_str(&parts.join(","))
            }
            OpResult::Inconclusive => f.write_str("INCONCLUSIVE"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    SelfLoop(Key),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::SelfLoop(k) => write!(f, "self-loop on key {k}"),
        }
    }
}

impl std::error::Error for OracleError {}

/// Adjacency-map graph with the sequential semantics of the ADT.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SeqGraph {
    adj: BTreeMap<Key, BTreeSet<Key>>,
}

impl SeqGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from an adjacency map, dropping edges whose target is
    /// not a vertex.
    pub fn from_adjacency(mut adj: BTreeMap<Key, BTreeSet<Key>>) -> Self {
        let vertices: BTreeSet<Key> = adj.keys().copied().collect();
        for out in adj.values_mut() {
            out.retain(|l| vertices.contains(l));
        }
        Self { adj }
    }

    pub fn has_vertex(&self, k: Key) -> bool {
        self.adj.contains_key(&k)
    }

    pub fn has_edge(&self, k: Key, l: Key) -> bool {
        self.adj.get(&k).is_some_and(|out| out.contains(&l))
    }

    pub fn vertices(&self) -> impl Iterator<Item = Key> + '_ {
        self.adj.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Key, Key)> + '_ {
        self.adj
            .iter()
            .flat_map(|(&k, out)| out.iter().map(move |&l| (k, l)))
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum()
    }

    pub fn add_vertex(&mut self, k: Key) -> bool {
        if self.adj.contains_key(&k) {
            return false;
        }
        self.adj.insert(k, BTreeSet::new());
        true
    }

    /// Removes `v(k)` together with every edge into or out of it.
    pub fn remove_vertex(&mut self, k: Key) -> bool {
        if self.adj.remove(&k).is_none() {
            return false;
        }
        for out in self.adj.values_mut() {
            out.remove(&k);
        }
        true
    }

    pub fn add_edge(&mut self, k: Key, l: Key) -> EdgeOutcome {
        if !self.has_vertex(k) || !self.has_vertex(l) {
            return EdgeOutcome::VertexNotPresent;
        }
        if self.adj.get_mut(&k).unwrap().insert(l) {
            EdgeOutcome::EdgeAdded
        } else {
            EdgeOutcome::EdgePresent
        }
    }

    pub fn remove_edge(&mut self, k: Key, l: Key) -> EdgeOutcome {
        if !self.has_vertex(k) || !self.has_vertex(l) {
            return EdgeOutcome::VertexNotPresent;
        }
        if self.adj.get_mut(&k).unwrap().remove(&l) {
            EdgeOutcome::EdgeRemoved
        } else {
            EdgeOutcome::EdgeNotPresent
        }
    }

    pub fn contains_edge(&self, k: Key, l: Key) -> EdgeOutcome {
        if !self.has_vertex(k) || !self.has_vertex(l) {
            EdgeOutcome::VertexNotPresent
        } else if self.has_edge(k, l) {
            EdgeOutcome::EdgeFound
        } else {
            EdgeOutcome::VertexOrEdgeNotPresent
        }
    }

    /// Breadth-first path from `k` to `l`, exploring out-neighbours in
    /// ascending key order and stopping as soon as `l` is discovered.
    pub fn get_path(&self, k: Key, l: Key) -> Option<Vec<Key>> {
        if !self.has_vertex(k) || !self.has_vertex(l) {
            return None;
        }
        let mut pred: BTreeMap<Key, Key> = BTreeMap::new();
        let mut visited = BTreeSet::from([k]);
        let mut queue = VecDeque::from([k]);
        while let Some(x) = queue.pop_front() {
            for &y in &self.adj[&x] {
                if y == l {
                    let mut path = vec![l, x];
                    let mut at = x;
                    while let Some(&p) = pred.get(&at) {
                        path.push(p);
                        at = p;
                    }
                    path.reverse();
                    return Some(path);
                }
                if visited.insert(y) {
                    pred.insert(y, x);
                    queue.push_back(y);
                }
            }
        }
        None
    }

    pub fn reachable(&self, k: Key, l: Key) -> bool {
        self.get_path(k, l).is_some()
    }

    /// Whether `path` is a walk from `k` to `l` over existing edges.
    pub fn is_valid_path(&self, k: Key, l: Key, path: &[Key]) -> bool {
        path.len() >= 2
            && path[0] == k
            && path[path.len() - 1] == l
            && path.windows(2).all(|w| self.has_edge(w[0], w[1]))
    }

    /// Applies `op` and returns the canonical sequential response.
    pub fn apply(&mut self, op: &Op) -> Result<OpResult, OracleError> {
        if let Op::AddEdge(k, l)
        | Op::RemoveEdge(k, l)
        | Op::ContainsEdge(k, l)
        | Op::GetPath(k, l) = *op
        {
            if k == l {
                return Err(OracleError::SelfLoop(k));
            }
        }
        Ok(match *op {
            Op::AddVertex(k) => OpResult::Bool(self.add_vertex(k)),
            Op::RemoveVertex(k) => OpResult::Bool(self.remove_vertex(k)),
            Op::ContainsVertex(k) => OpResult::Bool(self.has_vertex(k)),
            Op::AddEdge(k, l) => OpResult::Edge(self.add_edge(k, l)),
            Op::RemoveEdge(k, l) => OpResult::Edge(self.remove_edge(k, l)),
            Op::ContainsEdge(k, l) => OpResult::Edge(self.contains_edge(k, l)),
            Op::GetPath(k, l) => OpResult::Path(self.get_path(k, l)),
        })
    }

    /// Applies `op` if `observed` is a legal response to it in the current
    /// state; returns whether it was.
    ///
    /// Two responses are legal besides the canonical one: any valid path for
    /// a reachability query (not only the breadth-first one), and
    /// `VertexOrEdgeNotPresent` for an edge lookup whenever the edge is
    /// absent, since a lookup that finds a logically removed endpoint still
    /// linked reports it that way.
    pub fn apply_observed(&mut self, op: &Op, observed: &OpResult) -> bool {
        match (*op, observed) {
            (Op::GetPath(k, l), OpResult::Path(Some(p))) => {
                self.has_vertex(k) && self.has_vertex(l) && self.is_valid_path(k, l, p)
            }
            (Op::GetPath(k, l), OpResult::Path(None)) => !self.reachable(k, l),
            (Op::ContainsEdge(k, l), OpResult::Edge(EdgeOutcome::VertexOrEdgeNotPresent)) => {
                !self.has_edge(k, l)
            }
            _ => {
                let mut next = self.clone();
                match next.apply(op) {
                    Ok(r) if &r == observed => {
                        *self = next;
                        true
                    }
                    _ => false,
                }
            }
        }
    }
}

/// Applies `op` to `graph`; the free-function form used by callers that keep
/// the state elsewhere.
pub fn seq_apply(graph: &mut SeqGraph, op: &Op) -> Result<OpResult, OracleError> {
    graph.apply(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn add_vertex_twice() {
        let mut g = SeqGraph::new();
        assert_eq!(g.apply(&Op::AddVertex(5)).unwrap(), OpResult::Bool(true));
        assert_eq!(g.apply(&Op::AddVertex(5)).unwrap(), OpResult::Bool(false));
    }

    #[test]
    fn vertex_removal_kills_incident_edges() {
        let mut g = SeqGraph::new();
        for k in 1..=3 {
            g.add_vertex(k);
        }
        g.add_edge(1, 2);
        g.add_edge(2, 3);
        assert_eq!(g.get_path(1, 3), Some(vec![1, 2, 3]));
        assert!(g.remove_vertex(2));
        assert_eq!(g.apply(&Op::GetPath(1, 3)).unwrap(), OpResult::Path(None));
        assert_eq!(
            g.apply(&Op::ContainsEdge(1, 2)).unwrap(),
            OpResult::Edge(EdgeOutcome::VertexNotPresent)
        );
        g.add_vertex(2);
        assert_eq!(g.contains_edge(1, 2), EdgeOutcome::VertexOrEdgeNotPresent);
    }

    #[test]
    fn self_loop_is_an_error() {
        let mut g = SeqGraph::new();
        assert_eq!(g.apply(&Op::AddEdge(1, 1)), Err(OracleError::SelfLoop(1)));
    }

    #[test]
    fn bfs_prefers_smaller_neighbour() {
        let mut g = SeqGraph::new();
        for k in 1..=4 {
            g.add_vertex(k);
        }
        for (a, b) in [(1, 3), (3, 4), (1, 2), (2, 4)] {
            g.add_edge(a, b);
        }
        assert_eq!(g.get_path(1, 4), Some(vec![1, 2, 4]));
    }

    #[test]
    fn observed_path_need_not_be_bfs() {
        let mut g = SeqGraph::new();
        for k in 1..=4 {
            g.add_vertex(k);
        }
        for (a, b) in [(1, 3), (3, 4), (1, 2), (2, 4)] {
            g.add_edge(a, b);
        }
        assert!(g.clone().apply_observed(&Op::GetPath(1, 4), &OpResult::Path(Some(vec![1, 3, 4]))));
        assert!(!g.clone().apply_observed(&Op::GetPath(1, 4), &OpResult::Path(Some(vec![1, 4]))));
        assert!(!g.clone().apply_observed(&Op::GetPath(1, 4), &OpResult::Path(None)));
    }

    fn small_op() -> impl Strategy<Value = Op> {
        let k = 1i64..5;
        prop_oneof![
            k.clone().prop_map(Op::AddVertex),
            k.clone().prop_map(Op::RemoveVertex),
            k.clone().prop_map(Op::ContainsVertex),
            (k.clone(), k.clone()).prop_map(|(a, b)| Op::AddEdge(a, b)),
            (k.clone(), k.clone()).prop_map(|(a, b)| Op::RemoveEdge(a, b)),
            (k.clone(), k.clone()).prop_map(|(a, b)| Op::ContainsEdge(a, b)),
            (k.clone(), k).prop_map(|(a, b)| Op::GetPath(a, b)),
        ]
    }

    proptest! {
        #[test]
        fn apply_is_deterministic(ops in proptest::collection::vec(small_op(), 0..60)) {
            let mut a = SeqGraph::new();
            let mut b = SeqGraph::new();
            for op in &ops {
                prop_assert_eq!(a.apply(op), b.apply(op));
            }
            prop_assert_eq!(a, b);
        }

        #[test]
        fn canonical_response_is_accepted(ops in proptest::collection::vec(small_op(), 0..60)) {
            let mut a = SeqGraph::new();
            let mut b = SeqGraph::new();
            for op in &ops {
                if let Ok(r) = a.apply(op) {
                    prop_assert!(b.apply_observed(op, &r));
                }
            }
            prop_assert_eq!(a, b);
        }

        #[test]
        fn edges_only_between_vertices(ops in proptest::collection::vec(small_op(), 0..80)) {
            let mut g = SeqGraph::new();
            for op in &ops {
                let _ = g.apply(op);
            }
            for (k, l) in g.edges() {
                prop_assert!(g.has_vertex(k) && g.has_vertex(l));
            }
        }
    }
}
