//! Obstruction-free reachability: repeated breadth-first collections that are
//! accepted only when two consecutive ones agree, edge counters included.

use std::sync::atomic::Ordering;

use crossbeam_epoch::Guard;

use crate::atomics::count_step;
use crate::error::GraphError;
use crate::graph::{check_pair, Inner, ThreadHandle};
use crate::node::{VNode, KEY_MAX};
use crate::Key;

/// One visited vertex in a collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BfsRecord {
    /// Identity of the vertex record (its address). Only comparable between
    /// collections taken while the vertex cannot have been reclaimed.
    pub node: usize,
    pub key: Key,
    /// The vertex's edge-modification counter when the record was created.
    pub lecnt: u64,
    /// Index of the record through which the vertex was discovered; `None`
    /// for the root.
    pub pred: Option<usize>,
}

/// Records of one breadth-first collection, in visit order. The first record
/// is the source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BfsTree {
    records: Vec<BfsRecord>,
}

impl BfsTree {
    pub fn records(&self) -> &[BfsRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn push(&mut self, v: &VNode, pred: Option<usize>) {
        self.records.push(BfsRecord {
            node: v as *const VNode as usize,
            key: v.key,
            lecnt: v.ecnt.load(Ordering::SeqCst),
            pred,
        });
    }

    fn pred_node(&self, rec: &BfsRecord) -> Option<usize> {
        rec.pred.map(|i| self.records[i].node)
    }

    /// Keys from the root to the last record, following predecessors.
    pub fn path_to_tail(&self) -> Vec<Key> {
        let mut path = Vec::new();
        let mut at = self.records.len().checked_sub(1);
        while let Some(i) = at {
            path.push(self.records[i].key);
            at = self.records[i].pred;
        }
        path.reverse();
        path
    }
}

/// Same vertices in the same order, with equal counters and predecessors.
pub fn compare_tree(old: Option<&BfsTree>, new: Option<&BfsTree>) -> bool {
    let (Some(old), Some(new)) = (old, new) else {
        return false;
    };
    old.len() == new.len()
        && old.records.iter().zip(&new.records).all(|(a, b)| {
            a.node == b.node && a.lecnt == b.lecnt && old.pred_node(a) == new.pred_node(b)
        })
}

/// Same root-to-tail predecessor chain, with equal counters along it.
pub fn compare_path(old: Option<&BfsTree>, new: Option<&BfsTree>) -> bool {
    let (Some(old), Some(new)) = (old, new) else {
        return false;
    };
    let mut a = old.records.len().checked_sub(1);
    let mut b = new.records.len().checked_sub(1);
    loop {
        match (a, b) {
            (None, None) => return true,
            (Some(i), Some(j)) => {
                let (ra, rb) = (&old.records[i], &new.records[j]);
                if ra.node != rb.node
                    || ra.lecnt != rb.lecnt
                    || old.pred_node(ra) != new.pred_node(rb)
                {
                    return false;
                }
                a = ra.pred;
                b = rb.pred;
            }
            _ => return false,
        }
    }
}

/// Outcome of a bounded reachability query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundedPath {
    /// The query linearized: a path of keys, or `None` for no path.
    Complete(Option<Vec<Key>>),
    /// The comparison budget ran out before two collections agreed.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanStats {
    /// Breadth-first collections performed.
    pub collections: u32,
}

impl Inner {
    /// Breadth-first collection from `u` that stops as soon as `v` is
    /// discovered. Returns whether `v` was reached.
    pub(crate) fn tree_collect(
        &self,
        u: &VNode,
        v: &VNode,
        tree: &mut BfsTree,
        slot: usize,
        _guard: &Guard,
    ) -> bool {
        tree.records.clear();
        let epoch = self.registry.next_visit_epoch(slot);
        u.visited[slot].store(epoch, Ordering::Relaxed);
        tree.push(u, None);
        if u.is_marked() {
            return false;
        }
        let mut next = 0;
        while next < tree.records.len() {
            let at = next;
            next += 1;
            // SAFETY: every record was reached through live links under the
            // caller's guard.
            let vertex = unsafe { &*(tree.records[at].node as *const VNode) };
            let mut edge = unsafe { (*vertex.ehead).enxt.load().unmarked().deref() };
            while edge.dest_key != KEY_MAX {
                count_step();
                // Commit state first, then the edge's mark, then the target.
                let live = edge.is_live();
                let succ = edge.enxt.load();
                if live && !succ.is_marked() {
                    let adj = unsafe { &*edge.ptv };
                    if !adj.is_marked() {
                        if std::ptr::eq(adj, v) {
                            tree.push(adj, Some(at));
                            return true;
                        }
                        let seen = &adj.visited[slot];
                        if seen.load(Ordering::Relaxed) != epoch {
                            seen.store(epoch, Ordering::Relaxed);
                            tree.push(adj, Some(at));
                        }
                    }
                }
                edge = unsafe { succ.unmarked().deref() };
            }
        }
        false
    }

    /// Collects until two consecutive collections agree, or `max_rounds`
    /// comparisons have failed.
    pub(crate) fn scan(
        &self,
        u: &VNode,
        v: &VNode,
        slot: usize,
        max_rounds: Option<u32>,
        guard: &Guard,
    ) -> (BoundedPath, ScanStats) {
        let mut stats = ScanStats::default();
        let mut old = BfsTree::default();
        let mut new = BfsTree::default();
        let mut found_old = self.tree_collect(u, v, &mut old, slot, guard);
        stats.collections = 1;
        let mut rounds = 0u32;
        loop {
            if max_rounds.is_some_and(|m| rounds >= m) {
                return (BoundedPath::Inconclusive, stats);
            }
            let found_new = self.tree_collect(u, v, &mut new, slot, guard);
            stats.collections += 1;
            rounds += 1;
            if found_old && found_new && compare_path(Some(&old), Some(&new)) {
                return (BoundedPath::Complete(Some(new.path_to_tail())), stats);
            }
            if !found_old && !found_new && compare_tree(Some(&old), Some(&new)) {
                return (BoundedPath::Complete(None), stats);
            }
            std::mem::swap(&mut old, &mut new);
            found_old = found_new;
        }
    }

    pub(crate) fn get_path(
        &self,
        k: Key,
        l: Key,
        max_rounds: Option<u32>,
        slot: usize,
        guard: &Guard,
    ) -> (BoundedPath, ScanStats) {
        let none = (BoundedPath::Complete(None), ScanStats::default());
        let Some((u, v)) = self.conc_plus(k, l, guard) else {
            return none;
        };
        if u.is_marked() || v.is_marked() {
            return none;
        }
        self.scan(u, v, slot, max_rounds, guard)
    }
}

impl ThreadHandle {
    /// Runs a single breadth-first collection from `k` towards `l`. Returns
    /// `None` when either vertex is absent, otherwise whether `l` was reached
    /// and the collected tree.
    pub fn tree_collect(&self, k: Key, l: Key) -> Result<Option<(bool, BfsTree)>, GraphError> {
        check_pair(k, l)?;
        let guard = self.pin();
        let inner = self.inner();
        let Some((u, v)) = inner.conc_plus(k, l, &guard) else {
            return Ok(None);
        };
        let mut tree = BfsTree::default();
        let found = inner.tree_collect(u, v, &mut tree, self.slot(), &guard);
        Ok(Some((found, tree)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomics::OpCounters;
    use crate::edge::EdgeOutcome;
    use crate::graph::Graph;

    fn build(keys: &[Key], edges: &[(Key, Key)]) -> (Graph, ThreadHandle) {
        let graph = Graph::new(4);
        let h = graph.register().unwrap();
        for &k in keys {
            h.add_vertex(k).unwrap();
        }
        for &(a, b) in edges {
            assert_eq!(h.add_edge(a, b).unwrap(), EdgeOutcome::EdgeAdded);
        }
        (graph, h)
    }

    fn keys(t: &BfsTree) -> Vec<(Key, Option<usize>)> {
        t.records().iter().map(|r| (r.key, r.pred)).collect()
    }

    #[test]
    fn unique_path() {
        let (_g, h) = build(&[1, 2, 3], &[(1, 2), (2, 3)]);
        assert_eq!(h.get_path(1, 3).unwrap(), Some(vec![1, 2, 3]));
        assert_eq!(h.get_path(3, 1).unwrap(), None);
    }

    #[test]
    fn no_edges_no_path() {
        let (_g, h) = build(&[1, 3], &[]);
        assert_eq!(h.get_path(1, 3).unwrap(), None);
        assert_eq!(h.get_path(1, 4).unwrap(), None);
    }

    #[test]
    fn diamond_prefers_smaller_interior() {
        let (_g, h) = build(&[1, 2, 3, 4], &[(1, 3), (3, 4), (1, 2), (2, 4)]);
        assert_eq!(h.get_path(1, 4).unwrap(), Some(vec![1, 2, 4]));
    }

    #[test]
    fn self_loop_and_zero_cap_rejected() {
        let (_g, h) = build(&[1, 2], &[]);
        assert!(matches!(h.get_path(1, 1), Err(GraphError::SelfLoop(1))));
        assert!(matches!(h.get_path_bounded(1, 2, 0), Err(GraphError::ZeroScanCap)));
    }

    #[test]
    fn collect_on_empty_edge_list() {
        let (_g, h) = build(&[1, 2], &[]);
        let (found, t) = h.tree_collect(1, 2).unwrap().unwrap();
        assert!(!found);
        assert_eq!(keys(&t), vec![(1, None)]);
    }

    #[test]
    fn collect_single_edge() {
        let (_g, h) = build(&[1, 2], &[(1, 2)]);
        let (found, t) = h.tree_collect(1, 2).unwrap().unwrap();
        assert!(found);
        assert_eq!(keys(&t), vec![(1, None), (2, Some(0))]);
    }

    #[test]
    fn collect_records_each_vertex_once() {
        // 1 -> 2 -> 4, 1 -> 3 -> 4, 4 -> 5; target 6 unreachable
        let (_g, h) = build(&[1, 2, 3, 4, 5, 6], &[(1, 2), (1, 3), (2, 4), (3, 4), (4, 5)]);
        let (found, t) = h.tree_collect(1, 6).unwrap().unwrap();
        assert!(!found);
        assert_eq!(
            keys(&t),
            vec![(1, None), (2, Some(0)), (3, Some(0)), (4, Some(1)), (5, Some(3))]
        );
    }

    #[test]
    fn quiescent_scan_takes_two_collections() {
        let (_g, h) = build(&[1, 2, 3], &[(1, 2)]);
        let (r, s) = h.get_path_traced(1, 2, None).unwrap();
        assert_eq!(r, BoundedPath::Complete(Some(vec![1, 2])));
        assert_eq!(s.collections, 2);
        let (r, s) = h.get_path_traced(1, 3, Some(1)).unwrap();
        assert_eq!(r, BoundedPath::Complete(None));
        assert_eq!(s.collections, 2);
    }

    #[test]
    fn get_path_issues_no_rmw() {
        let (_g, h) = build(&[1, 2, 3, 4], &[(1, 2), (2, 3), (3, 4), (4, 1)]);
        let before = OpCounters::current();
        assert_eq!(h.get_path(1, 4).unwrap(), Some(vec![1, 2, 3, 4]));
        assert_eq!(h.get_path(2, 1).unwrap(), Some(vec![2, 3, 4, 1]));
        assert_eq!(OpCounters::current().since(before).rmw(), 0);
    }

    #[test]
    fn identical_collections_compare_equal() {
        let (_g, h) = build(&[1, 2, 3], &[(1, 2), (2, 3)]);
        let (f1, a) = h.tree_collect(1, 3).unwrap().unwrap();
        let (f2, b) = h.tree_collect(1, 3).unwrap().unwrap();
        assert!(f1 && f2);
        assert!(compare_path(Some(&a), Some(&b)));
        assert!(compare_tree(Some(&a), Some(&b)));
        assert!(!compare_tree(None, Some(&b)));
        assert!(!compare_path(Some(&a), None));
    }

    #[test]
    fn counter_bump_breaks_tree_comparison() {
        let (_g, h) = build(&[1, 2, 3, 9], &[(1, 2), (2, 3)]);
        let (_, a) = h.tree_collect(1, 9).unwrap().unwrap();
        // remove and re-add: same topology, higher counter on 2
        assert_eq!(h.remove_edge(2, 3).unwrap(), EdgeOutcome::EdgeRemoved);
        assert_eq!(h.add_edge(2, 3).unwrap(), EdgeOutcome::EdgeAdded);
        let (_, b) = h.tree_collect(1, 9).unwrap().unwrap();
        assert_eq!(keys(&a), keys(&b));
        assert!(!compare_tree(Some(&a), Some(&b)));
    }

    #[test]
    fn different_lengths_compare_unequal() {
        let (_g, h) = build(&[1, 2, 3, 9], &[(1, 2)]);
        let (_, a) = h.tree_collect(1, 9).unwrap().unwrap();
        h.add_edge(1, 3).unwrap();
        let (_, b) = h.tree_collect(1, 9).unwrap().unwrap();
        assert_ne!(a.len(), b.len());
        assert!(!compare_tree(Some(&a), Some(&b)));
    }

    #[test]
    fn different_interior_breaks_path_comparison() {
        let (_g, h) = build(&[1, 2, 3, 4], &[(1, 2), (2, 4), (1, 3), (3, 4)]);
        let (_, a) = h.tree_collect(1, 4).unwrap().unwrap();
        assert_eq!(a.path_to_tail(), vec![1, 2, 4]);
        h.remove_edge(1, 2).unwrap();
        let (_, b) = h.tree_collect(1, 4).unwrap().unwrap();
        assert_eq!(b.path_to_tail(), vec![1, 3, 4]);
        assert!(!compare_path(Some(&a), Some(&b)));
    }

    #[test]
    fn interior_counter_bump_breaks_path_comparison() {
        let (_g, h) = build(&[1, 2, 3, 7], &[(1, 2), (2, 3), (2, 7)]);
        let (_, a) = h.tree_collect(1, 3).unwrap().unwrap();
        h.remove_edge(2, 7).unwrap();
        h.add_edge(2, 7).unwrap();
        let (_, b) = h.tree_collect(1, 3).unwrap().unwrap();
        assert_eq!(a.path_to_tail(), b.path_to_tail());
        assert!(!compare_path(Some(&a), Some(&b)));
    }

    #[test]
    fn removed_source_yields_no_path() {
        let (_g, h) = build(&[1, 2], &[(1, 2)]);
        let g = h.pin();
        let inner = h.inner();
        let (u, v) = inner.conc_plus(1, 2, &g).unwrap();
        assert!(inner.remove_vertex(1, &g));
        // a scan started before the removal must not report the dead source
        let (r, _) = inner.scan(u, v, h.slot(), None, &g);
        assert_eq!(r, BoundedPath::Complete(None));
    }
}
