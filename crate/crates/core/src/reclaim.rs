//! Deferred reclamation of unlinked nodes and the per-graph thread registry.
//!
//! Reclamation is epoch based (crossbeam-epoch, one collector per graph).
//! Vertices are additionally reference counted because stale edges in other
//! lists may still point at a removed vertex; a vertex's own edge list is
//! released as soon as the grace period of its retirement elapses, so
//! reference cycles between removed vertices cannot pin memory.

use std::cell::RefCell;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use crossbeam_epoch::{Collector, Guard};

use crate::error::GraphError;
use crate::node::{free_edge_list, free_enode, release_vnode, ENode, VNode};

/// What happens to nodes once they are unlinked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reclamation {
    /// Free after an epoch grace period.
    #[default]
    Epoch,
    /// Never free while the graph is alive (everything is released when the
    /// graph is dropped). Useful when runs must be reproducible.
    Leak,
}

/// Counters describing reclamation activity.
#[derive(Debug, Default)]
pub struct ReclaimStats {
    retired_vnodes: AtomicU64,
    retired_enodes: AtomicU64,
    freed_retired_vnodes: AtomicU64,
    freed_retired_enodes: AtomicU64,
    freed_other: AtomicU64,
    double_retires: AtomicU64,
}

/// Point-in-time copy of [`ReclaimStats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReclaimSnapshot {
    pub retired_vnodes: u64,
    pub retired_enodes: u64,
    pub freed_retired_vnodes: u64,
    pub freed_retired_enodes: u64,
    /// Nodes freed without having been retired (edge lists of removed
    /// vertices, teardown).
    pub freed_other: u64,
    pub double_retires: u64,
}

impl ReclaimSnapshot {
    pub fn retired(&self) -> u64 {
        self.retired_vnodes + self.retired_enodes
    }

    pub fn freed_retired(&self) -> u64 {
        self.freed_retired_vnodes + self.freed_retired_enodes
    }

    /// Fraction of retired nodes whose memory has been released; 1.0 when
    /// nothing was retired.
    pub fn freed_ratio(&self) -> f64 {
        match self.retired() {
            0 => 1.0,
            r => self.freed_retired() as f64 / r as f64,
        }
    }
}

impl ReclaimStats {
    pub(crate) fn note_vnode_freed(&self, retired: bool) {
        if retired {
            self.freed_retired_vnodes.fetch_add(1, Ordering::Relaxed);
        } else {
            self.freed_other.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub(crate) fn note_enode_freed(&self, retired: bool) {
        if retired {
            self.freed_retired_enodes.fetch_add(1, Ordering::Relaxed);
        } else {
            self.freed_other.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn snapshot(&self) -> ReclaimSnapshot {
        ReclaimSnapshot {
            retired_vnodes: self.retired_vnodes.load(Ordering::SeqCst),
            retired_enodes: self.retired_enodes.load(Ordering::SeqCst),
            freed_retired_vnodes: self.freed_retired_vnodes.load(Ordering::SeqCst),
            freed_retired_enodes: self.freed_retired_enodes.load(Ordering::SeqCst),
            freed_other: self.freed_other.load(Ordering::SeqCst),
            double_retires: self.double_retires.load(Ordering::SeqCst),
        }
    }
}

enum Retired {
    Vertex(*const VNode),
    Edge(*const ENode),
}

// SAFETY: retired pointers are only dereferenced by whoever drains the list,
// after every thread has stopped touching them.
unsafe impl Send for Retired {}

pub(crate) struct Reclaimer {
    mode: Reclamation,
    // The collector must drop before `stats`: its pending closures update it.
    collector: Collector,
    leaked: Mutex<Vec<Retired>>,
    stats: ReclaimStats,
}

impl Reclaimer {
    pub fn new(mode: Reclamation) -> Self {
        Self {
            mode,
            collector: Collector::new(),
            leaked: Mutex::new(Vec::new()),
            stats: ReclaimStats::default(),
        }
    }

    pub fn mode(&self) -> Reclamation {
        self.mode
    }

    pub fn collector(&self) -> &Collector {
        &self.collector
    }

    pub fn stats(&self) -> &ReclaimStats {
        &self.stats
    }

    /// Retires a vertex that has just been unlinked from the vertex list.
    ///
    /// # Safety
    /// `v` must be unreachable from the vertex list, and the caller must be
    /// the unique thread whose CAS unlinked it.
    pub unsafe fn retire_vnode(&self, guard: &Guard, v: *const VNode) {
        if !(*v).mark_retired() {
            self.stats.double_retires.fetch_add(1, Ordering::SeqCst);
            return;
        }
        self.stats.retired_vnodes.fetch_add(1, Ordering::Relaxed);
        match self.mode {
            Reclamation::Epoch => {
                let stats = &self.stats as *const ReclaimStats;
                guard.defer_unchecked(move || {
                    free_edge_list(v, &*stats);
                    release_vnode(v, &*stats);
                });
            }
            Reclamation::Leak => self.leaked.lock().unwrap().push(Retired::Vertex(v)),
        }
    }

    /// Retires an edge that has just been unlinked from its list.
    ///
    /// # Safety
    /// As for [`Reclaimer::retire_vnode`].
    pub unsafe fn retire_enode(&self, guard: &Guard, e: *const ENode) {
        if !(*e).mark_retired() {
            self.stats.double_retires.fetch_add(1, Ordering::SeqCst);
            return;
        }
        self.stats.retired_enodes.fetch_add(1, Ordering::Relaxed);
        match self.mode {
            Reclamation::Epoch => {
                let stats = &self.stats as *const ReclaimStats;
                guard.defer_unchecked(move || free_enode(e, &*stats));
            }
            Reclamation::Leak => self.leaked.lock().unwrap().push(Retired::Edge(e)),
        }
    }

    /// Drives epoch advancement until no more deferred frees make progress.
    /// Only meaningful when no other thread is pinned.
    pub fn quiesce(&self) {
        let handle = self.collector.register();
        let mut last = self.stats.snapshot();
        let mut idle_rounds = 0;
        while idle_rounds < 8 {
            for _ in 0..64 {
                handle.pin().flush();
            }
            let now = self.stats.snapshot();
            if now == last {
                idle_rounds += 1;
            } else {
                idle_rounds = 0;
                last = now;
            }
        }
    }

    /// Releases everything parked in leak mode.
    ///
    /// # Safety
    /// No thread may be operating on the graph.
    pub unsafe fn drain_leaked(&self) {
        let parked = std::mem::take(&mut *self.leaked.lock().unwrap());
        // Free edge lists first so every destination reference held by a
        // retired edge is still backed by a live vertex.
        for r in &parked {
            if let Retired::Vertex(v) = r {
                free_edge_list(*v, &self.stats);
            }
        }
        for r in parked {
            match r {
                Retired::Vertex(v) => release_vnode(v, &self.stats),
                Retired::Edge(e) => free_enode(e, &self.stats),
            }
        }
    }
}

struct Slot {
    in_use: AtomicBool,
    /// Visit-epoch counter of the slot; survives re-registration so stale
    /// `visited` values can never alias a fresh epoch.
    visit_epoch: AtomicU64,
}

/// Fixed-capacity table of thread slots.
pub(crate) struct Registry {
    slots: Box<[Slot]>,
}

thread_local! {
    static REGISTERED: RefCell<Vec<u64>> = const { RefCell::new(Vec::new()) };
}

impl Registry {
    pub fn new(capacity: usize) -> Self {
        Self {
            slots: (0..capacity)
                .map(|_| Slot {
                    in_use: AtomicBool::new(false),
                    visit_epoch: AtomicU64::new(0),
                })
                .collect(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    /// Claims a free slot for the calling thread.
    pub fn claim(&self, graph_id: u64) -> Result<usize, GraphError> {
        let dup = REGISTERED.with(|r| r.borrow().contains(&graph_id));
        if dup {
            return Err(GraphError::AlreadyRegistered);
        }
        for (i, slot) in self.slots.iter().enumerate() {
            if !slot.in_use.load(Ordering::Relaxed)
                && slot
                    .in_use
                    .compare_exchange(false, true, Ordering::AcqRel, Ordering::Relaxed)
                    .is_ok()
            {
                REGISTERED.with(|r| r.borrow_mut().push(graph_id));
                return Ok(i);
            }
        }
        Err(GraphError::RegistryFull {
            capacity: self.capacity(),
        })
    }

    pub fn release(&self, graph_id: u64, slot: usize) {
        REGISTERED.with(|r| r.borrow_mut().retain(|&g| g != graph_id));
        self.slots[slot].in_use.store(false, Ordering::Release);
    }

    /// Bumps and returns the slot's visit epoch. Only the slot owner calls
    /// this.
    pub fn next_visit_epoch(&self, slot: usize) -> u64 {
        let e = &self.slots[slot].visit_epoch;
        let next = e.load(Ordering::Relaxed) + 1;
        e.store(next, Ordering::Relaxed);
        next
    }
}
