//! Graph handle, per-thread registration, and quiescent inspection.

use std::collections::BTreeMap;
use std::marker::PhantomData;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crossbeam_epoch::{Guard, LocalHandle};

use crate::atomics::LinkWord;
use crate::edge::EdgeOutcome;
use crate::error::GraphError;
use crate::node::{free_edge_list, release_vnode, VNode, EDGE_DEAD, EDGE_PENDING, KEY_MAX, KEY_MIN};
use crate::oracle::SeqGraph;
use crate::reach::{BoundedPath, ScanStats};
use crate::reclaim::{ReclaimSnapshot, Reclaimer, Reclamation, Registry};
use crate::Key;

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConfig {
    /// Capacity of the thread registry; also the length of every vertex's
    /// visit array.
    pub max_threads: usize,
    pub reclamation: Reclamation,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            max_threads: 64,
            reclamation: Reclamation::Epoch,
        }
    }
}

pub(crate) struct Inner {
    pub id: u64,
    pub registry: Registry,
    pub head: *const VNode,
    pub reclaimer: Reclaimer,
}

// SAFETY: all shared mutable state behind the raw pointers is atomic, and
// node lifetimes are governed by the reclaimer.
unsafe impl Send for Inner {}
unsafe impl Sync for Inner {}

impl Inner {
    #[inline]
    pub fn head<'g>(&self, _guard: &'g Guard) -> &'g VNode {
        // SAFETY: the head sentinel lives as long as the graph.
        unsafe { &*self.head }
    }

    pub fn threads(&self) -> usize {
        self.registry.capacity()
    }
}

impl Drop for Inner {
    fn drop(&mut self) {
        // No handles remain, so nothing can be traversing the lists.
        unsafe {
            let mut vertices = Vec::new();
            let mut cur = self.head;
            while !cur.is_null() {
                vertices.push(cur);
                cur = (*cur).vnxt.load().as_ptr();
            }
            let stats = self.reclaimer.stats();
            for &v in &vertices {
                free_edge_list(v, stats);
            }
            for &v in &vertices {
                release_vnode(v, stats);
            }
            self.reclaimer.drain_leaked();
        }
    }
}

/// A concurrent directed graph. Cloning yields another handle to the same
/// graph.
#[derive(Clone)]
pub struct Graph {
    inner: Arc<Inner>,
}

impl Graph {
    /// A graph whose registry admits up to `max_threads` concurrent threads.
    pub fn new(max_threads: usize) -> Self {
        Self::with_config(GraphConfig {
            max_threads,
            ..GraphConfig::default()
        })
        .expect("max_threads must be non-zero")
    }

    pub fn with_config(config: GraphConfig) -> Result<Self, GraphError> {
        if config.max_threads == 0 {
            return Err(GraphError::InvalidConfig(
                "max_threads must be at least 1".into(),
            ));
        }
        let tail = VNode::alloc_sentinel(KEY_MAX, LinkWord::null());
        let head = VNode::alloc_sentinel(KEY_MIN, LinkWord::from_ptr(tail));
        Ok(Self {
            inner: Arc::new(Inner {
                id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
                registry: Registry::new(config.max_threads),
                head,
                reclaimer: Reclaimer::new(config.reclamation),
            }),
        })
    }

    pub fn max_threads(&self) -> usize {
        self.inner.threads()
    }

    pub fn reclamation(&self) -> Reclamation {
        self.inner.reclaimer.mode()
    }

    /// Registers the calling thread. The handle must stay on this thread.
    pub fn register(&self) -> Result<ThreadHandle, GraphError> {
        let slot = self.inner.registry.claim(self.inner.id)?;
        Ok(ThreadHandle {
            local: self.inner.reclaimer.collector().register(),
            inner: Arc::clone(&self.inner),
            slot,
            _not_send: PhantomData,
        })
    }

    pub fn reclaim_stats(&self) -> ReclaimSnapshot {
        self.inner.reclaimer.stats().snapshot()
    }

    /// Runs deferred frees until they stop making progress. Call only when no
    /// thread is inside a graph operation.
    pub fn quiesce(&self) {
        self.inner.reclaimer.quiesce();
    }

    /// Walks the whole structure and reports its shape and any structural
    /// violations. Meaningful only at quiescence.
    pub fn audit(&self) -> AuditReport {
        let handle = self.inner.reclaimer.collector().register();
        let guard = handle.pin();
        let mut report = AuditReport::default();
        let head = self.inner.head(&guard);
        let mut prev_key = head.key;
        let mut cur = head.vnxt.load();
        while !cur.is_null() {
            // SAFETY: reachable nodes are protected by the guard.
            let v = unsafe { cur.unmarked().deref() };
            if v.key <= prev_key {
                report
                    .violations
                    .push(format!("vertex list out of order at key {}", v.key));
            }
            prev_key = v.key;
            if v.is_retired() {
                report.reachable_retired += 1;
                report
                    .violations
                    .push(format!("retired vertex {} still linked", v.key));
            }
            if v.key == KEY_MAX {
                break;
            }
            let marked = v.is_marked();
            if marked {
                report.marked_vertices += 1;
            }
            report.vertices.push(audit_vertex(v, marked, &mut report.violations));
            cur = v.vnxt.load();
        }
        let mut seen = std::collections::BTreeSet::new();
        for va in report.vertices.iter().filter(|v| !v.marked) {
            if !seen.insert(va.key) {
                report
                    .violations
                    .push(format!("duplicate unmarked vertex {}", va.key));
            }
        }
        report
    }

    /// Abstract state (unmarked vertices and live edges) at quiescence.
    pub fn to_seq(&self) -> SeqGraph {
        let report = self.audit();
        let mut adj = BTreeMap::new();
        for v in report.vertices.iter().filter(|v| !v.marked) {
            adj.insert(v.key, v.live_edges.iter().copied().collect());
        }
        SeqGraph::from_adjacency(adj)
    }
}

fn audit_vertex(v: &VNode, marked: bool, violations: &mut Vec<String>) -> VertexAudit {
    let mut va = VertexAudit {
        key: v.key,
        marked,
        ecnt: v.ecnt.load(Ordering::SeqCst),
        by_add: v.audit.add.load(Ordering::SeqCst),
        by_remove: v.audit.remove.load(Ordering::SeqCst),
        by_purge: v.audit.purge.load(Ordering::SeqCst),
        refs: v.refs(),
        live_edges: Vec::new(),
        stale_edges: 0,
        pending_edges: 0,
        marked_edges: 0,
    };
    // SAFETY: caller holds a guard; edge lists of reachable vertices are live.
    unsafe {
        let head = &*v.ehead;
        let mut prev = head.dest_key;
        let mut cur = head.enxt.load();
        while !cur.is_null() {
            let e = cur.unmarked().deref();
            if e.dest_key == KEY_MAX {
                break;
            }
            if e.dest_key <= prev {
                violations.push(format!("edge list of {} out of order at {}", v.key, e.dest_key));
            }
            prev = e.dest_key;
            if e.is_retired() {
                violations.push(format!("retired edge {}->{} still linked", v.key, e.dest_key));
            }
            if e.is_marked() {
                va.marked_edges += 1;
            } else if e.state() == EDGE_PENDING {
                va.pending_edges += 1;
            } else if e.state() == EDGE_DEAD || e.target_marked() {
                va.stale_edges += 1;
            } else {
                va.live_edges.push(e.dest_key);
            }
            cur = e.enxt.load();
        }
    }
    va
}

/// Shape of one vertex at quiescence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexAudit {
    pub key: Key,
    pub marked: bool,
    pub ecnt: u64,
    /// `ecnt` increments made when an edge became live.
    pub by_add: u64,
    /// `ecnt` increments made by the thread that logically removed an edge.
    pub by_remove: u64,
    /// `ecnt` increments made while unlinking an already-marked edge.
    pub by_purge: u64,
    pub refs: usize,
    /// Destinations of unmarked edges whose target vertex is unmarked.
    pub live_edges: Vec<Key>,
    /// Unmarked edges that failed to commit or whose target was removed.
    pub stale_edges: usize,
    /// Published edges not yet settled; nonzero only if an adder stalled.
    pub pending_edges: usize,
    /// Logically removed edges still linked.
    pub marked_edges: usize,
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub vertices: Vec<VertexAudit>,
    pub marked_vertices: usize,
    pub reachable_retired: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A thread's registration with a [`Graph`]; all operations go through it.
///
/// Not `Send`: the slot it owns indexes per-thread visit state.
pub struct ThreadHandle {
    local: LocalHandle,
    inner: Arc<Inner>,
    slot: usize,
    _not_send: PhantomData<*const ()>,
}

impl Drop for ThreadHandle {
    fn drop(&mut self) {
        self.inner.registry.release(self.inner.id, self.slot);
    }
}

pub(crate) fn check_key(k: Key) -> Result<(), GraphError> {
    if k == KEY_MIN || k == KEY_MAX {
        Err(GraphError::KeyOutOfRange(k))
    } else {
        Ok(())
    }
}

pub(crate) fn check_pair(k: Key, l: Key) -> Result<(), GraphError> {
    check_key(k)?;
    check_key(l)?;
    if k == l {
        return Err(GraphError::SelfLoop(k));
    }
    Ok(())
}

impl ThreadHandle {
    /// Registry slot of this thread.
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn graph(&self) -> Graph {
        Graph {
            inner: Arc::clone(&self.inner),
        }
    }

    pub(crate) fn inner(&self) -> &Inner {
        &self.inner
    }

    pub(crate) fn pin(&self) -> Guard {
        self.local.pin()
    }

    pub fn add_vertex(&self, k: Key) -> Result<bool, GraphError> {
        check_key(k)?;
        let guard = self.pin();
        Ok(self.inner.add_vertex(k, &guard))
    }

    pub fn remove_vertex(&self, k: Key) -> Result<bool, GraphError> {
        check_key(k)?;
        let guard = self.pin();
        Ok(self.inner.remove_vertex(k, &guard))
    }

    pub fn contains_vertex(&self, k: Key) -> Result<bool, GraphError> {
        check_key(k)?;
        let guard = self.pin();
        Ok(self.inner.contains_vertex(k, &guard))
    }

    pub fn add_edge(&self, k: Key, l: Key) -> Result<EdgeOutcome, GraphError> {
        check_pair(k, l)?;
        let guard = self.pin();
        Ok(self.inner.add_edge(k, l, &guard))
    }

    pub fn remove_edge(&self, k: Key, l: Key) -> Result<EdgeOutcome, GraphError> {
        check_pair(k, l)?;
        let guard = self.pin();
        Ok(self.inner.remove_edge(k, l, &guard))
    }

    pub fn contains_edge(&self, k: Key, l: Key) -> Result<EdgeOutcome, GraphError> {
        check_pair(k, l)?;
        let guard = self.pin();
        Ok(self.inner.contains_edge(k, l, &guard))
    }

    /// A path of keys from `k` to `l`, both included, or `None` when no path
    /// exists. May not return while other threads keep modifying the graph.
    pub fn get_path(&self, k: Key, l: Key) -> Result<Option<Vec<Key>>, GraphError> {
        check_pair(k, l)?;
        let guard = self.pin();
        match self.inner.get_path(k, l, None, self.slot, &guard).0 {
            BoundedPath::Complete(p) => Ok(p),
            BoundedPath::Inconclusive => unreachable!("unbounded scan gave up"),
        }
    }

    /// Like [`ThreadHandle::get_path`] but gives up after `max_rounds`
    /// comparison rounds (each round is one extra collection).
    pub fn get_path_bounded(
        &self,
        k: Key,
        l: Key,
        max_rounds: u32,
    ) -> Result<BoundedPath, GraphError> {
        Ok(self.get_path_traced(k, l, Some(max_rounds))?.0)
    }

    /// Reachability query that also reports how many collections it took.
    pub fn get_path_traced(
        &self,
        k: Key,
        l: Key,
        max_rounds: Option<u32>,
    ) -> Result<(BoundedPath, ScanStats), GraphError> {
        check_pair(k, l)?;
        if max_rounds == Some(0) {
            return Err(GraphError::ZeroScanCap);
        }
        let guard = self.pin();
        Ok(self.inner.get_path(k, l, max_rounds, self.slot, &guard))
    }
}
