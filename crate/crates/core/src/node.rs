//! Vertex and edge records.

use std::ptr;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicU8, AtomicUsize, Ordering};

use crate::atomics::{LinkWord, TaggedLink};
use crate::reclaim::ReclaimStats;
use crate::Key;

/// Key of the head sentinels (vertex list and every edge list).
pub const KEY_MIN: Key = i64::MIN;
/// Key of the tail sentinels.
pub const KEY_MAX: Key = i64::MAX;

/// Which code path bumped a vertex's `ecnt`; kept per vertex so the counter
/// can be reconciled against its causes at quiescence.
#[derive(Default)]
pub(crate) struct EcntAudit {
    pub add: AtomicU64,
    pub remove: AtomicU64,
    pub purge: AtomicU64,
}

pub(crate) struct VNode {
    pub key: Key,
    pub vnxt: TaggedLink<VNode>,
    /// Head sentinel of the outgoing edge list; null for the vertex-list
    /// sentinels.
    pub ehead: *const ENode,
    /// Per-thread visit epochs used by BFS collections.
    pub visited: Box<[AtomicU64]>,
    /// Edge-list modification counter.
    pub ecnt: AtomicU64,
    pub audit: EcntAudit,
    /// One reference for the vertex list plus one per `ENode` whose `ptv`
    /// targets this vertex.
    refs: AtomicUsize,
    retired: AtomicBool,
}

/// Commit state of an edge. An edge is published `PENDING` and becomes
/// visible only once an updater, having seen both endpoints unmarked,
/// moves it to `LIVE`; `DEAD` edges were abandoned and are never visible.
pub(crate) const EDGE_PENDING: u8 = 0;
pub(crate) const EDGE_LIVE: u8 = 1;
pub(crate) const EDGE_DEAD: u8 = 2;

pub(crate) struct ENode {
    pub dest_key: Key,
    /// Destination vertex; null for sentinels.
    pub ptv: *const VNode,
    pub enxt: TaggedLink<ENode>,
    pub state: AtomicU8,
    retired: AtomicBool,
}

impl VNode {
    /// Allocates a vertex with an empty edge list and zeroed counters.
    pub fn alloc(key: Key, threads: usize) -> *mut VNode {
        let tail = ENode::alloc_sentinel(KEY_MAX, LinkWord::null());
        let head = ENode::alloc_sentinel(KEY_MIN, LinkWord::from_ptr(tail));
        Box::into_raw(Box::new(VNode {
            key,
            vnxt: TaggedLink::null(),
            ehead: head,
            visited: (0..threads).map(|_| AtomicU64::new(0)).collect(),
            ecnt: AtomicU64::new(0),
            audit: EcntAudit::default(),
            refs: AtomicUsize::new(1),
            retired: AtomicBool::new(false),
        }))
    }

    /// Allocates a vertex-list sentinel (no edge list, no visit slots).
    pub fn alloc_sentinel(key: Key, next: LinkWord<VNode>) -> *mut VNode {
        Box::into_raw(Box::new(VNode {
            key,
            vnxt: TaggedLink::new(next),
            ehead: ptr::null(),
            visited: Box::new([]),
            ecnt: AtomicU64::new(0),
            audit: EcntAudit::default(),
            refs: AtomicUsize::new(1),
            retired: AtomicBool::new(false),
        }))
    }

    #[inline]
    pub fn is_marked(&self) -> bool {
        self.vnxt.load().is_marked()
    }

    /// Takes an extra reference on behalf of a new `ENode`.
    ///
    /// The caller must already hold a path to this vertex under an epoch
    /// guard, which keeps the list reference alive.
    pub fn acquire(&self) {
        self.refs.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn refs(&self) -> usize {
        self.refs.load(Ordering::SeqCst)
    }

    /// Flags the node as retired; returns false if it already was.
    pub fn mark_retired(&self) -> bool {
        !self.retired.swap(true, Ordering::SeqCst)
    }

    pub fn is_retired(&self) -> bool {
        self.retired.load(Ordering::SeqCst)
    }
}

impl ENode {
    fn alloc_sentinel(key: Key, next: LinkWord<ENode>) -> *mut ENode {
        Box::into_raw(Box::new(ENode {
            dest_key: key,
            ptv: ptr::null(),
            enxt: TaggedLink::new(next),
            state: AtomicU8::new(EDGE_LIVE),
            retired: AtomicBool::new(false),
        }))
    }

    /// Allocates an edge to `dest`, taking a reference on it.
    pub fn alloc(dest: &VNode) -> *mut ENode {
        dest.acquire();
        Box::into_raw(Box::new(ENode {
            dest_key: dest.key,
            ptv: dest as *const VNode,
            enxt: TaggedLink::null(),
            state: AtomicU8::new(EDGE_PENDING),
            retired: AtomicBool::new(false),
        }))
    }

    #[inline]
    pub fn is_marked(&self) -> bool {
        self.enxt.load().is_marked()
    }

    #[inline]
    pub fn state(&self) -> u8 {
        self.state.load(Ordering::SeqCst)
    }

    #[inline]
    pub fn is_live(&self) -> bool {
        self.state() == EDGE_LIVE
    }

    /// Whether the destination vertex has been logically removed. Sentinels
    /// have no destination and report false.
    #[inline]
    pub fn target_marked(&self) -> bool {
        // SAFETY: ptv is kept alive by the reference this edge holds.
        !self.ptv.is_null() && unsafe { (*self.ptv).is_marked() }
    }

    pub fn mark_retired(&self) -> bool {
        !self.retired.swap(true, Ordering::SeqCst)
    }

    pub fn is_retired(&self) -> bool {
        self.retired.load(Ordering::SeqCst)
    }
}

/// Drops one reference to `v`, freeing it when none remain.
///
/// # Safety
/// `v` must be a live vertex and the caller must own the reference it drops.
pub(crate) unsafe fn release_vnode(v: *const VNode, stats: &ReclaimStats) {
    if (*v).refs.fetch_sub(1, Ordering::AcqRel) == 1 {
        let retired = (*v).is_retired();
        drop(Box::from_raw(v as *mut VNode));
        stats.note_vnode_freed(retired);
    }
}

/// Frees a single edge record and drops its destination reference.
///
/// # Safety
/// No thread may reach `e` anymore.
pub(crate) unsafe fn free_enode(e: *const ENode, stats: &ReclaimStats) {
    let retired = (*e).is_retired();
    let dest = (*e).ptv;
    drop(Box::from_raw(e as *mut ENode));
    stats.note_enode_freed(retired);
    if !dest.is_null() {
        release_vnode(dest, stats);
    }
}

/// Frees every edge record still linked from `v`'s head sentinel, sentinels
/// included.
///
/// # Safety
/// No thread may traverse `v`'s edge list anymore, and `v` must still be
/// allocated.
pub(crate) unsafe fn free_edge_list(v: *const VNode, stats: &ReclaimStats) {
    let mut cur = (*v).ehead;
    while !cur.is_null() {
        let next = (*cur).enxt.load().as_ptr();
        free_enode(cur, stats);
        cur = next;
    }
}
