//! Lock-free sorted edge lists and the two-vertex validators.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::Ordering;

use crossbeam_epoch::Guard;

use crate::atomics::{cas_state, count_step, faa, LinkWord};
use crate::graph::Inner;
use crate::node::{free_enode, ENode, VNode, EDGE_DEAD, EDGE_LIVE, EDGE_PENDING, KEY_MAX};
use crate::Key;

/// Result of an edge operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeOutcome {
    VertexNotPresent,
    EdgePresent,
    EdgeAdded,
    EdgeNotPresent,
    EdgeRemoved,
    EdgeFound,
    VertexOrEdgeNotPresent,
}

impl EdgeOutcome {
    pub const ALL: [EdgeOutcome; 7] = [
        EdgeOutcome::VertexNotPresent,
        EdgeOutcome::EdgePresent,
        EdgeOutcome::EdgeAdded,
        EdgeOutcome::EdgeNotPresent,
        EdgeOutcome::EdgeRemoved,
        EdgeOutcome::EdgeFound,
        EdgeOutcome::VertexOrEdgeNotPresent,
    ];

    /// Human-readable message, e.g. `"VERTEX NOT PRESENT"`.
    pub fn message(self) -> &'static str {
        match self {
            EdgeOutcome::VertexNotPresent => "VERTEX NOT PRESENT",
            EdgeOutcome::EdgePresent => "EDGE PRESENT",
            EdgeOutcome::EdgeAdded => "EDGE ADDED",
            EdgeOutcome::EdgeNotPresent => "EDGE NOT PRESENT",
            EdgeOutcome::EdgeRemoved => "EDGE REMOVED",
            EdgeOutcome::EdgeFound => "EDGE FOUND",
            EdgeOutcome::VertexOrEdgeNotPresent => "VERTEX OR EDGE NOT PRESENT",
        }
    }

    /// Single-token form used in history files, e.g. `VERTEX_NOT_PRESENT`.
    pub fn token(self) -> &'static str {
        match self {
            EdgeOutcome::VertexNotPresent => "VERTEX_NOT_PRESENT",
            EdgeOutcome::EdgePresent => "EDGE_PRESENT",
            EdgeOutcome::EdgeAdded => "EDGE_ADDED",
            EdgeOutcome::EdgeNotPresent => "EDGE_NOT_PRESENT",
            EdgeOutcome::EdgeRemoved => "EDGE_REMOVED",
            EdgeOutcome::EdgeFound => "EDGE_FOUND",
            EdgeOutcome::VertexOrEdgeNotPresent => "VERTEX_OR_EDGE_NOT_PRESENT",
        }
    }
}

impl fmt::Display for EdgeOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownOutcome(pub String);

impl fmt::Display for UnknownOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown edge outcome `{}`", self.0)
    }
}

impl std::error::Error for UnknownOutcome {}

impl FromStr for EdgeOutcome {
    type Err = UnknownOutcome;

    /// Accepts the token form and the spaced message form.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeOutcome::ALL
            .into_iter()
            .find(|o| o.token() == s || o.message() == s)
            .ok_or_else(|| UnknownOutcome(s.to_string()))
    }
}

#[inline]
fn eword(e: &ENode) -> LinkWord<ENode> {
    LinkWord::from_ptr(e as *const ENode)
}

impl Inner {
    /// Locates `v(k)` and `v(l)` in one forward pass, smaller key first, with
    /// helping traversals. Returns `(v(k), v(l))`.
    pub(crate) fn conv_plus<'g>(
        &self,
        k: Key,
        l: Key,
        guard: &'g Guard,
    ) -> Option<(&'g VNode, &'g VNode)> {
        self.locate_pair(k, l, guard, |start, key| self.loc_v(start, key, guard))
    }

    /// As [`Inner::conv_plus`] but help-free; either vertex may come back
    /// marked.
    pub(crate) fn conc_plus<'g>(
        &self,
        k: Key,
        l: Key,
        guard: &'g Guard,
    ) -> Option<(&'g VNode, &'g VNode)> {
        self.locate_pair(k, l, guard, |start, key| self.loc_c(start, key, guard))
    }

    fn locate_pair<'g>(
        &self,
        k: Key,
        l: Key,
        guard: &'g Guard,
        locate: impl Fn(&'g VNode, Key) -> (&'g VNode, &'g VNode),
    ) -> Option<(&'g VNode, &'g VNode)> {
        debug_assert_ne!(k, l);
        let (lo, hi) = if k < l { (k, l) } else { (l, k) };
        let (_, first) = locate(self.head(guard), lo);
        if first.key != lo {
            return None;
        }
        let (_, second) = locate(first, hi);
        if second.key != hi {
            return None;
        }
        Some(if k < l { (first, second) } else { (second, first) })
    }

    /// Settles a `PENDING` edge of `owner`'s list: `LIVE` if both endpoints
    /// are unmarked now, `DEAD` otherwise. Whoever makes an edge `LIVE`
    /// bumps `owner.ecnt`. Returns the settled state.
    pub(crate) fn resolve(&self, owner: &VNode, e: &ENode) -> u8 {
        let st = e.state();
        if st != EDGE_PENDING {
            return st;
        }
        let live = !owner.is_marked() && !e.target_marked();
        let want = if live { EDGE_LIVE } else { EDGE_DEAD };
        if cas_state(&e.state, EDGE_PENDING, want) {
            if live {
                faa(&owner.ecnt, 1);
                owner.audit.add.fetch_add(1, Ordering::Relaxed);
            }
            return want;
        }
        e.state()
    }

    /// Locates `(pred, curr)` in `owner`'s edge list with
    /// `pred.dest_key < l <= curr.dest_key`, where `curr` is a visible edge
    /// (or the tail). On the way it settles pending edges and unlinks
    /// marked, dead and stale edges; only the unlink of a marked edge bumps
    /// `owner.ecnt`.
    pub(crate) fn loc_e<'g>(
        &self,
        owner: &'g VNode,
        l: Key,
        guard: &'g Guard,
    ) -> (&'g ENode, &'g ENode) {
        'retry: loop {
            // SAFETY: owner's edge list is reachable under `guard`.
            let mut pred: &'g ENode = unsafe { &*owner.ehead };
            let mut curr: &'g ENode = unsafe { pred.enxt.load().unmarked().deref() };
            loop {
                count_step();
                if curr.dest_key == KEY_MAX {
                    return (pred, curr);
                }
                let succ = curr.enxt.load();
                if succ.is_marked() {
                    faa(&owner.ecnt, 1);
                    owner.audit.purge.fetch_add(1, Ordering::Relaxed);
                    if !pred.enxt.cas(eword(curr), succ.unmarked()) {
                        continue 'retry;
                    }
                    // SAFETY: our CAS unlinked `curr`.
                    unsafe { self.reclaimer.retire_enode(guard, curr) };
                    curr = unsafe { succ.unmarked().deref() };
                    continue;
                }
                let st = self.resolve(owner, curr);
                if st == EDGE_DEAD || curr.target_marked() {
                    // never visible, or into a removed vertex
                    if !curr.enxt.cas(succ, succ.marked()) {
                        continue 'retry;
                    }
                    if !pred.enxt.cas(eword(curr), succ) {
                        continue 'retry;
                    }
                    unsafe { self.reclaimer.retire_enode(guard, curr) };
                    curr = unsafe { succ.deref() };
                    continue;
                }
                if curr.dest_key >= l {
                    return (pred, curr);
                }
                pred = curr;
                curr = unsafe { succ.deref() };
            }
        }
    }

    pub(crate) fn add_edge(&self, k: Key, l: Key, guard: &Guard) -> EdgeOutcome {
        match self.conv_plus(k, l, guard) {
            Some((u, v)) => self.add_edge_between(u, v, guard),
            None => EdgeOutcome::VertexNotPresent,
        }
    }

    /// Publishing half of `add_edge`, after the endpoints were located.
    ///
    /// The new edge is published `PENDING` and then settled; it counts as
    /// added only if it goes `LIVE`. Checking the endpoints and publishing
    /// in one step is impossible with single-word CAS, and without the
    /// settle step a vertex removed between the check and the publish
    /// would let the edge appear after its endpoint was gone.
    pub(crate) fn add_edge_between(&self, u: &VNode, v: &VNode, guard: &Guard) -> EdgeOutcome {
        let l = v.key;
        let mut fresh: Option<*mut ENode> = None;
        let discard = |fresh: Option<*mut ENode>| {
            if let Some(e) = fresh {
                // SAFETY: never published.
                unsafe { free_enode(e, self.reclaimer.stats()) };
            }
        };
        loop {
            if u.is_marked() || v.is_marked() {
                discard(fresh);
                return EdgeOutcome::VertexNotPresent;
            }
            let (pred, curr) = self.loc_e(u, l, guard);
            if curr.dest_key == l {
                // Visible edge found; confirm it and both endpoints are
                // still unmarked, in that order.
                if curr.is_marked() {
                    continue;
                }
                if u.is_marked() || v.is_marked() {
                    discard(fresh);
                    return EdgeOutcome::VertexNotPresent;
                }
                if !std::ptr::eq(curr.ptv, v) {
                    continue;
                }
                discard(fresh);
                return EdgeOutcome::EdgePresent;
            }
            if u.is_marked() || v.is_marked() {
                discard(fresh);
                return EdgeOutcome::VertexNotPresent;
            }
            let ne = *fresh.get_or_insert_with(|| ENode::alloc(v));
            // SAFETY: `ne` is still private to this thread.
            unsafe { (*ne).enxt.store_unpublished(eword(curr)) };
            if pred.enxt.cas(eword(curr), LinkWord::from_ptr(ne)) {
                // SAFETY: published under `guard`; only retired after
                // being unlinked.
                let ne = unsafe { &*ne };
                return if self.resolve(u, ne) == EDGE_LIVE {
                    EdgeOutcome::EdgeAdded
                } else {
                    // Clears our dead edge out of the list.
                    self.loc_e(u, l, guard);
                    EdgeOutcome::VertexNotPresent
                };
            }
        }
    }

    /// `EdgeRemoved` is decided by the logical-removal CAS. The winner bumps
    /// `ecnt` and then makes sure the edge is detached before returning.
    pub(crate) fn remove_edge(&self, k: Key, l: Key, guard: &Guard) -> EdgeOutcome {
        let Some((u, v)) = self.conv_plus(k, l, guard) else {
            return EdgeOutcome::VertexNotPresent;
        };
        loop {
            if u.is_marked() || v.is_marked() {
                return EdgeOutcome::VertexNotPresent;
            }
            let (pred, curr) = self.loc_e(u, l, guard);
            // Endpoints are re-checked after the edge list was read.
            if u.is_marked() || v.is_marked() {
                return EdgeOutcome::VertexNotPresent;
            }
            if curr.dest_key != l {
                return EdgeOutcome::EdgeNotPresent;
            }
            if !std::ptr::eq(curr.ptv, v) {
                continue;
            }
            let succ = curr.enxt.load();
            if !succ.is_marked() && curr.enxt.cas(succ, succ.marked()) {
                faa(&u.ecnt, 1);
                u.audit.remove.fetch_add(1, Ordering::Relaxed);
                if pred.enxt.cas(eword(curr), succ) {
                    // SAFETY: our CAS unlinked `curr`.
                    unsafe { self.reclaimer.retire_enode(guard, curr) };
                } else {
                    // A traversal past key `l` unlinks every marked edge it
                    // meets, ours included.
                    self.loc_e(u, l, guard);
                }
                return EdgeOutcome::EdgeRemoved;
            }
        }
    }

    /// Help-free lookup; issues no CAS.
    pub(crate) fn contains_edge(&self, k: Key, l: Key, guard: &Guard) -> EdgeOutcome {
        let Some((u, v)) = self.conc_plus(k, l, guard) else {
            return EdgeOutcome::VertexNotPresent;
        };
        // SAFETY: u's edge list is reachable under `guard`.
        let mut curr: &ENode = unsafe { (*u.ehead).enxt.load().unmarked().deref() };
        while curr.dest_key < l {
            count_step();
            curr = unsafe { curr.enxt.load().unmarked().deref() };
        }
        // Read order matters: commit state, then the edge's mark, then the
        // endpoints. An edge into an earlier incarnation of v(l) does not
        // count.
        if curr.dest_key == l
            && curr.is_live()
            && !curr.is_marked()
            && !u.is_marked()
            && !v.is_marked()
            && std::ptr::eq(curr.ptv, v)
        {
            EdgeOutcome::EdgeFound
        } else {
            EdgeOutcome::VertexOrEdgeNotPresent
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomics::OpCounters;
    use crate::graph::{Graph, ThreadHandle};

    fn setup(keys: &[Key], edges: &[(Key, Key)]) -> (Graph, ThreadHandle) {
        let graph = Graph::new(4);
        let h = graph.register().unwrap();
        for &k in keys {
            assert!(h.add_vertex(k).unwrap());
        }
        for &(a, b) in edges {
            assert_eq!(h.add_edge(a, b).unwrap(), EdgeOutcome::EdgeAdded);
        }
        (graph, h)
    }

    fn mark_vertex(h: &ThreadHandle, k: Key) {
        let g = h.pin();
        let inner = h.inner();
        let (_, c) = inner.loc_c(inner.head(&g), k, &g);
        let s = c.vnxt.load();
        assert!(c.vnxt.cas(s, s.marked()));
    }

    fn mark_edge(h: &ThreadHandle, k: Key, l: Key) {
        let g = h.pin();
        let inner = h.inner();
        let (_, u) = inner.loc_c(inner.head(&g), k, &g);
        let mut e = unsafe { (*u.ehead).enxt.load().unmarked().deref() };
        while e.dest_key != l {
            e = unsafe { e.enxt.load().unmarked().deref() };
        }
        let s = e.enxt.load();
        assert!(e.enxt.cas(s, s.marked()));
    }

    /// Publishes a `PENDING` edge (k, l) without settling it, as an adder
    /// stalled right after its publish CAS would leave it.
    fn publish_pending(h: &ThreadHandle, k: Key, l: Key) {
        let g = h.pin();
        let inner = h.inner();
        let (u, v) = inner.conv_plus(k, l, &g).unwrap();
        let (pred, curr) = inner.loc_e(u, l, &g);
        assert_ne!(curr.dest_key, l);
        let ne = ENode::alloc(v);
        unsafe { (*ne).enxt.store_unpublished(eword(curr)) };
        assert!(pred.enxt.cas(eword(curr), LinkWord::from_ptr(ne)));
    }

    fn vertex(graph: &Graph, k: Key) -> crate::VertexAudit {
        graph.audit().vertices.into_iter().find(|v| v.key == k).unwrap()
    }

    #[test]
    fn pending_edge_is_invisible_to_readers() {
        let (graph, h) = setup(&[1, 2], &[]);
        publish_pending(&h, 1, 2);
        let before = OpCounters::current();
        assert_eq!(h.contains_edge(1, 2).unwrap(), EdgeOutcome::VertexOrEdgeNotPresent);
        assert_eq!(h.get_path(1, 2).unwrap(), None);
        assert_eq!(OpCounters::current().since(before).rmw(), 0);
        let v1 = vertex(&graph, 1);
        assert_eq!((v1.ecnt, v1.pending_edges), (0, 1));
        assert!(v1.live_edges.is_empty());
    }

    #[test]
    fn updater_settles_pending_edge_live() {
        let (graph, h) = setup(&[1, 2], &[]);
        publish_pending(&h, 1, 2);
        // The helper makes it live, so the edge already exists.
        assert_eq!(h.add_edge(1, 2).unwrap(), EdgeOutcome::EdgePresent);
        let v1 = vertex(&graph, 1);
        assert_eq!((v1.ecnt, v1.by_add), (1, 1));
        assert_eq!(h.contains_edge(1, 2).unwrap(), EdgeOutcome::EdgeFound);
        assert_eq!(h.remove_edge(1, 2).unwrap(), EdgeOutcome::EdgeRemoved);
    }

    #[test]
    fn pending_edge_into_removed_vertex_dies() {
        let (graph, h) = setup(&[1, 2], &[]);
        publish_pending(&h, 1, 2);
        assert!(h.remove_vertex(2).unwrap());
        assert!(h.add_vertex(2).unwrap());
        // The dead edge is purged without a counter bump and never counts.
        assert_eq!(h.contains_edge(1, 2).unwrap(), EdgeOutcome::VertexOrEdgeNotPresent);
        assert_eq!(h.add_edge(1, 2).unwrap(), EdgeOutcome::EdgeAdded);
        let v1 = vertex(&graph, 1);
        assert_eq!((v1.ecnt, v1.by_add, v1.by_purge), (1, 1, 0));
        assert_eq!(v1.live_edges, vec![2]);
    }

    #[test]
    fn adder_with_stale_view_does_not_duplicate_edge() {
        // A locates both endpoints; B then adds (1, 2) and removes v(2).
        // A must not report a second successful add.
        let (_g, h) = setup(&[1, 2], &[]);
        let b = {
            let graph = h.graph();
            std::thread::spawn(move || graph.register().map(|_| ()).is_ok())
        };
        assert!(b.join().unwrap());
        let g = h.pin();
        let inner = h.inner();
        let (u, v) = inner.conv_plus(1, 2, &g).unwrap();
        assert_eq!(inner.add_edge(1, 2, &g), EdgeOutcome::EdgeAdded);
        assert!(inner.remove_vertex(2, &g));
        assert_eq!(inner.add_edge_between(u, v, &g), EdgeOutcome::VertexNotPresent);
    }

    #[test]
    fn outcome_strings_roundtrip() {
        for o in EdgeOutcome::ALL {
            assert_eq!(o.token().parse::<EdgeOutcome>().unwrap(), o);
            assert_eq!(o.message().parse::<EdgeOutcome>().unwrap(), o);
        }
        assert!("EDGE MISSING".parse::<EdgeOutcome>().is_err());
    }

    #[test]
    fn conv_plus_locates_smaller_key_first() {
        let (_g, h) = setup(&[3, 7], &[]);
        let guard = h.pin();
        let (u, v) = h.inner().conv_plus(7, 3, &guard).unwrap();
        assert_eq!((u.key, v.key), (7, 3));
        let (u, v) = h.inner().conc_plus(7, 3, &guard).unwrap();
        assert_eq!((u.key, v.key), (7, 3));
        assert!(h.inner().conv_plus(3, 9, &guard).is_none());
        assert!(h.inner().conc_plus(3, 9, &guard).is_none());
    }

    #[test]
    fn validators_fail_on_empty_graph() {
        let (_g, h) = setup(&[], &[]);
        let guard = h.pin();
        assert!(h.inner().conv_plus(1, 2, &guard).is_none());
        assert!(h.inner().conc_plus(1, 2, &guard).is_none());
    }

    #[test]
    fn loc_e_finds_adjacent_pair() {
        let (_g, h) = setup(&[1, 2, 8], &[(1, 2), (1, 8)]);
        let guard = h.pin();
        let inner = h.inner();
        let (_, u) = inner.loc_c(inner.head(&guard), 1, &guard);
        let (p, c) = inner.loc_e(u, 8, &guard);
        assert_eq!((p.dest_key, c.dest_key), (2, 8));
    }

    #[test]
    fn loc_e_on_empty_list_hits_sentinels() {
        let (_g, h) = setup(&[1], &[]);
        let guard = h.pin();
        let inner = h.inner();
        let (_, u) = inner.loc_c(inner.head(&guard), 1, &guard);
        let (p, c) = inner.loc_e(u, 5, &guard);
        assert_eq!((p.dest_key, c.dest_key), (crate::KEY_MIN, crate::KEY_MAX));
    }

    #[test]
    fn loc_e_purges_edge_into_removed_vertex() {
        let (graph, h) = setup(&[1, 2, 4, 8], &[(1, 2), (1, 4), (1, 8)]);
        mark_vertex(&h, 4);
        let v1 = graph.audit().vertices.into_iter().find(|v| v.key == 1).unwrap();
        assert_eq!(v1.stale_edges, 1);
        {
            let guard = h.pin();
            let inner = h.inner();
            let (_, u) = inner.loc_c(inner.head(&guard), 1, &guard);
            let ecnt_before = u.ecnt.load(Ordering::SeqCst);
            let (p, c) = inner.loc_e(u, 8, &guard);
            assert_eq!((p.dest_key, c.dest_key), (2, 8));
            // stale purge marks then unlinks without touching ecnt
            assert_eq!(u.ecnt.load(Ordering::SeqCst), ecnt_before);
        }
        let v1 = graph.audit().vertices.into_iter().find(|v| v.key == 1).unwrap();
        assert_eq!(v1.stale_edges, 0);
        assert_eq!(v1.live_edges, vec![2, 8]);
    }

    #[test]
    fn loc_e_unlinks_marked_edge_with_counter_bump() {
        let (graph, h) = setup(&[1, 2, 3], &[(1, 2), (1, 3)]);
        mark_edge(&h, 1, 2);
        {
            let guard = h.pin();
            let inner = h.inner();
            let (_, u) = inner.loc_c(inner.head(&guard), 1, &guard);
            let (p, c) = inner.loc_e(u, 3, &guard);
            assert_eq!((p.dest_key, c.dest_key), (crate::KEY_MIN, 3));
        }
        let v1 = graph.audit().vertices.into_iter().find(|v| v.key == 1).unwrap();
        assert_eq!(v1.by_purge, 1);
        assert_eq!(v1.ecnt, 3);
        assert_eq!(v1.live_edges, vec![3]);
    }

    #[test]
    fn add_edge_outcomes() {
        let (_g, h) = setup(&[1, 2], &[]);
        assert_eq!(h.add_edge(1, 2).unwrap(), EdgeOutcome::EdgeAdded);
        assert_eq!(h.add_edge(1, 2).unwrap(), EdgeOutcome::EdgePresent);
        assert_eq!(h.add_edge(1, 3).unwrap(), EdgeOutcome::VertexNotPresent);
        assert_eq!(h.add_edge(3, 1).unwrap(), EdgeOutcome::VertexNotPresent);
        assert!(matches!(h.add_edge(1, 1), Err(crate::GraphError::SelfLoop(1))));
    }

    #[test]
    fn remove_edge_outcomes() {
        let (graph, h) = setup(&[1, 2], &[(1, 2)]);
        assert_eq!(h.remove_edge(1, 2).unwrap(), EdgeOutcome::EdgeRemoved);
        assert_eq!(h.remove_edge(1, 2).unwrap(), EdgeOutcome::EdgeNotPresent);
        assert_eq!(h.remove_edge(1, 3).unwrap(), EdgeOutcome::VertexNotPresent);
        let v1 = graph.audit().vertices.into_iter().find(|v| v.key == 1).unwrap();
        assert_eq!((v1.ecnt, v1.by_add, v1.by_remove, v1.by_purge), (2, 1, 1, 0));
    }

    #[test]
    fn contains_edge_outcomes() {
        let (_g, h) = setup(&[1, 2, 3], &[(1, 2)]);
        let before = OpCounters::current();
        assert_eq!(h.contains_edge(1, 2).unwrap(), EdgeOutcome::EdgeFound);
        assert_eq!(h.contains_edge(2, 1).unwrap(), EdgeOutcome::VertexOrEdgeNotPresent);
        assert_eq!(h.contains_edge(1, 9).unwrap(), EdgeOutcome::VertexNotPresent);
        assert_eq!(OpCounters::current().since(before).rmw(), 0);
    }

    #[test]
    fn contains_edge_after_vertex_removal() {
        let (graph, h) = setup(&[1, 2], &[(1, 2)]);
        assert!(h.remove_vertex(2).unwrap());
        // stale edge is still linked in 1's list
        let v1 = graph.audit().vertices.into_iter().find(|v| v.key == 1).unwrap();
        assert_eq!(v1.stale_edges, 1);
        assert_eq!(h.contains_edge(1, 2).unwrap(), EdgeOutcome::VertexNotPresent);
        // a new incarnation of 2 must not inherit the stale edge
        assert!(h.add_vertex(2).unwrap());
        assert_eq!(h.contains_edge(1, 2).unwrap(), EdgeOutcome::VertexOrEdgeNotPresent);
        assert_eq!(h.add_edge(1, 2).unwrap(), EdgeOutcome::EdgeAdded);
        assert_eq!(h.contains_edge(1, 2).unwrap(), EdgeOutcome::EdgeFound);
    }

    #[test]
    fn contains_edge_with_logically_removed_edge() {
        let (_g, h) = setup(&[1, 2], &[(1, 2)]);
        mark_edge(&h, 1, 2);
        assert_eq!(h.contains_edge(1, 2).unwrap(), EdgeOutcome::VertexOrEdgeNotPresent);
    }

    #[test]
    fn add_edge_rejects_endpoint_removed_after_validation() {
        // Staged version of the removed-then-added endpoint race: the
        // validator located both vertices, then v(k) was removed.
        let (_g, h) = setup(&[1, 2], &[]);
        let guard = h.pin();
        let inner = h.inner();
        let (u, v) = inner.conv_plus(1, 2, &guard).unwrap();
        assert_eq!((u.key, v.key), (1, 2));
        assert!(inner.remove_vertex(1, &guard));
        assert!(u.is_marked());
        // the publish loop re-validates marks before each attempt
        assert_eq!(inner.add_edge_between(u, v, &guard), EdgeOutcome::VertexNotPresent);
        let (_, u1) = inner.loc_c(inner.head(&guard), 1, &guard);
        assert_ne!(u1.key, 1);
        // same story when the destination goes away and comes back
        assert!(inner.add_vertex(1, &guard));
        let (u, v) = inner.conv_plus(1, 2, &guard).unwrap();
        assert!(inner.remove_vertex(2, &guard));
        assert!(inner.add_vertex(2, &guard));
        assert_eq!(inner.add_edge_between(u, v, &guard), EdgeOutcome::VertexNotPresent);
        assert_eq!(inner.contains_edge(1, 2, &guard), EdgeOutcome::VertexOrEdgeNotPresent);
    }

    #[test]
    fn concurrent_removes_of_one_edge_have_one_winner() {
        for round in 0..50u64 {
            let (graph, h) = setup(&[1, 2], &[(1, 2)]);
            drop(h);
            let wins: usize = std::thread::scope(|s| {
                let hs: Vec<_> = (0..4)
                    .map(|i| {
                        let graph = graph.clone();
                        s.spawn(move || {
                            crate::atomics::chaos::enable(300, round * 31 + i + 1);
                            let h = graph.register().unwrap();
                            (h.remove_edge(1, 2).unwrap() == EdgeOutcome::EdgeRemoved) as usize
                        })
                    })
                    .collect();
                hs.into_iter().map(|j| j.join().unwrap()).sum()
            });
            assert_eq!(wins, 1);
            let report = graph.audit();
            let v1 = report.vertices.iter().find(|v| v.key == 1).unwrap();
            assert!(v1.live_edges.is_empty());
            assert_eq!(v1.marked_edges, 0);
            assert_eq!(v1.ecnt, v1.by_add + v1.by_remove + v1.by_purge);
        }
    }
}
