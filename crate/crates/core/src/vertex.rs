//! Lock-free sorted vertex list.

use crossbeam_epoch::Guard;

use crate::atomics::{count_step, LinkWord};
use crate::graph::Inner;
use crate::node::{free_edge_list, release_vnode, VNode};
use crate::Key;

#[inline]
pub(crate) fn word(v: &VNode) -> LinkWord<VNode> {
    LinkWord::from_ptr(v as *const VNode)
}

impl Inner {
    /// Locates the adjacent pair `(pred, curr)` with `pred.key < k <= curr.key`,
    /// unlinking every logically removed vertex met on the way. `curr` was
    /// unmarked when read.
    pub(crate) fn loc_v<'g>(
        &self,
        start: &'g VNode,
        k: Key,
        guard: &'g Guard,
    ) -> (&'g VNode, &'g VNode) {
        let mut start = start;
        'search: loop {
            let mut pred = start;
            // SAFETY: links read under `guard` stay valid for 'g.
            let mut curr = unsafe { pred.vnxt.load().unmarked().deref() };
            loop {
                count_step();
                let mut succ = curr.vnxt.load();
                while succ.is_marked() {
                    if !pred.vnxt.cas(word(curr), succ.unmarked()) {
                        if start.is_marked() {
                            // The start vertex itself went away; restart
                            // from the list head.
                            start = self.head(guard);
                        }
                        continue 'search;
                    }
                    // SAFETY: our CAS unlinked `curr`.
                    unsafe { self.reclaimer.retire_vnode(guard, curr) };
                    curr = unsafe { succ.unmarked().deref() };
                    succ = curr.vnxt.load();
                }
                if curr.key >= k {
                    return (pred, curr);
                }
                pred = curr;
                curr = unsafe { succ.deref() };
            }
        }
    }

    /// Help-free variant of [`Inner::loc_v`]: no CAS, walks through marked
    /// vertices, and may return a marked `curr`.
    pub(crate) fn loc_c<'g>(
        &self,
        start: &'g VNode,
        k: Key,
        _guard: &'g Guard,
    ) -> (&'g VNode, &'g VNode) {
        let mut pred = start;
        // SAFETY: links read under the guard stay valid for 'g.
        let mut curr = unsafe { pred.vnxt.load().unmarked().deref() };
        loop {
            count_step();
            if curr.key >= k {
                return (pred, curr);
            }
            pred = curr;
            curr = unsafe { curr.vnxt.load().unmarked().deref() };
        }
    }

    pub(crate) fn add_vertex(&self, k: Key, guard: &Guard) -> bool {
        let mut fresh: Option<*mut VNode> = None;
        loop {
            let (pred, curr) = self.loc_v(self.head(guard), k, guard);
            if curr.key == k {
                if let Some(v) = fresh {
                    // SAFETY: never published.
                    unsafe { discard_unpublished(v, self) };
                }
                return false;
            }
            let nv = *fresh.get_or_insert_with(|| VNode::alloc(k, self.threads()));
            // SAFETY: `nv` is still private to this thread.
            unsafe { (*nv).vnxt.store_unpublished(word(curr)) };
            if pred.vnxt.cas(word(curr), LinkWord::from_ptr(nv)) {
                return true;
            }
        }
    }

    /// Returns true iff this call logically removed `v(k)`. The winner makes
    /// one attempt at the physical unlink; later traversals finish it
    /// otherwise.
    pub(crate) fn remove_vertex(&self, k: Key, guard: &Guard) -> bool {
        loop {
            let (pred, curr) = self.loc_v(self.head(guard), k, guard);
            if curr.key != k {
                return false;
            }
            let succ = curr.vnxt.load();
            if !succ.is_marked() && curr.vnxt.cas(succ, succ.marked()) {
                if pred.vnxt.cas(word(curr), succ) {
                    // SAFETY: our CAS unlinked `curr`.
                    unsafe { self.reclaimer.retire_vnode(guard, curr) };
                }
                return true;
            }
        }
    }

    /// Wait-free for a finite key set; issues no CAS and helps nobody.
    pub(crate) fn contains_vertex(&self, k: Key, guard: &Guard) -> bool {
        let (_, curr) = self.loc_c(self.head(guard), k, guard);
        curr.key == k && !curr.is_marked()
    }
}

/// Frees a vertex that was allocated but never linked.
///
/// # Safety
/// `v` must never have been published.
unsafe fn discard_unpublished(v: *mut VNode, inner: &Inner) {
    let stats = inner.reclaimer.stats();
    free_edge_list(v, stats);
    release_vnode(v, stats);
}
