//! Interchangeable graph engines behind one per-thread `apply` entry point:
//! the lock-free graph, the same sorted-list layout under one global lock,
//! and an unsynchronized single-thread baseline.

use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, MutexGuard, TryLockError};

use crate::graph::{check_key, check_pair};
use crate::oracle::{Op, OpResult};
use crate::{BoundedPath, EdgeOutcome, Graph, GraphError, Key, ThreadHandle};

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct VSlot {
    key: Key,
    next: u32,
    edges: u32,
    gen: u32,
    live: bool,
    visited: u64,
}

#[derive(Debug, Clone)]
struct ESlot {
    dest: Key,
    target: u32,
    target_gen: u32,
    next: u32,
}

/// Sequential adjacency list with the lock-free graph's layout: a sorted
/// vertex list, each vertex owning a sorted edge list whose entries point at
/// their target vertex. Edges into a removed vertex are left in place and
/// purged lazily when a traversal meets them.
#[derive(Debug, Clone)]
pub struct ListGraph {
    vs: Vec<VSlot>,
    es: Vec<ESlot>,
    free_v: Vec<u32>,
    free_e: Vec<u32>,
    head: u32,
    epoch: u64,
}

impl Default for ListGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl ListGraph {
    pub fn new() -> Self {
        Self {
            vs: Vec::new(),
            es: Vec::new(),
            free_v: Vec::new(),
            free_e: Vec::new(),
            head: NIL,
            epoch: 0,
        }
    }

    fn alloc_v(&mut self, key: Key, next: u32) -> u32 {
        if let Some(i) = self.free_v.pop() {
            let s = &mut self.vs[i as usize];
            s.key = key;
            s.next = next;
            s.edges = NIL;
            s.live = true;
            s.visited = 0;
            i
        } else {
            self.vs.push(VSlot { key, next, edges: NIL, gen: 0, live: true, visited: 0 });
            (self.vs.len() - 1) as u32
        }
    }

    fn alloc_e(&mut self, dest: Key, target: u32, next: u32) -> u32 {
        let e = ESlot { dest, target, target_gen: self.vs[target as usize].gen, next };
        if let Some(i) = self.free_e.pop() {
            self.es[i as usize] = e;
            i
        } else {
            self.es.push(e);
            (self.es.len() - 1) as u32
        }
    }

    fn stale(&self, e: u32) -> bool {
        let e = &self.es[e as usize];
        let t = &self.vs[e.target as usize];
        !t.live || t.gen != e.target_gen
    }

    /// Slot of the live vertex with key `k`.
    fn find(&self, k: Key) -> Option<u32> {
        let mut c = self.head;
        while c != NIL {
            let s = &self.vs[c as usize];
            if s.key >= k {
                return (s.key == k).then_some(c);
            }
            c = s.next;
        }
        None
    }

    /// Finds `(pred, curr)` in `u`'s edge list with `pred.dest < l <=
    /// curr.dest`, purging stale entries on the way. NIL stands for the
    /// list head and tail.
    fn loc_e(&mut self, u: u32, l: Key) -> (u32, u32) {
        let mut pred = NIL;
        let mut curr = self.vs[u as usize].edges;
        while curr != NIL {
            if self.stale(curr) {
                let next = self.es[curr as usize].next;
                self.set_enext(u, pred, next);
                self.free_e.push(curr);
                curr = next;
                continue;
            }
            if self.es[curr as usize].dest >= l {
                break;
            }
            pred = curr;
            curr = self.es[curr as usize].next;
        }
        (pred, curr)
    }

    fn set_enext(&mut self, u: u32, pred: u32, next: u32) {
        if pred == NIL {
            self.vs[u as usize].edges = next;
        } else {
            self.es[pred as usize].next = next;
        }
    }

    pub fn add_vertex(&mut self, k: Key) -> bool {
        let mut pred = NIL;
        let mut c = self.head;
        while c != NIL && self.vs[c as usize].key < k {
            pred = c;
            c = self.vs[c as usize].next;
        }
        if c != NIL && self.vs[c as usize].key == k {
            return false;
        }
        let n = self.alloc_v(k, c);
        if pred == NIL {
            self.head = n;
        } else {
            self.vs[pred as usize].next = n;
        }
        true
    }

    pub fn remove_vertex(&mut self, k: Key) -> bool {
        let mut pred = NIL;
        let mut c = self.head;
        while c != NIL && self.vs[c as usize].key < k {
            pred = c;
            c = self.vs[c as usize].next;
        }
        if c == NIL || self.vs[c as usize].key != k {
            return false;
        }
        let next = self.vs[c as usize].next;
        if pred == NIL {
            self.head = next;
        } else {
            self.vs[pred as usize].next = next;
        }
        let mut e = self.vs[c as usize].edges;
        while e != NIL {
            self.free_e.push(e);
            e = self.es[e as usize].next;
        }
        let s = &mut self.vs[c as usize];
        s.live = false;
        s.gen = s.gen.wrapping_add(1);
        self.free_v.push(c);
        true
    }

    pub fn contains_vertex(&self, k: Key) -> bool {
        self.find(k).is_some()
    }

    pub fn add_edge(&mut self, k: Key, l: Key) -> EdgeOutcome {
        let (Some(u), Some(v)) = (self.find(k), self.find(l)) else {
            return EdgeOutcome::VertexNotPresent;
        };
        let (pred, curr) = self.loc_e(u, l);
        if curr != NIL && self.es[curr as usize].dest == l {
            return EdgeOutcome::EdgePresent;
        }
        let n = self.alloc_e(l, v, curr);
        self.set_enext(u, pred, n);
        EdgeOutcome::EdgeAdded
    }

    pub fn remove_edge(&mut self, k: Key, l: Key) -> EdgeOutcome {
        let (Some(u), Some(_)) = (self.find(k), self.find(l)) else {
            return EdgeOutcome::VertexNotPresent;
        };
        let (pred, curr) = self.loc_e(u, l);
        if curr == NIL || self.es[curr as usize].dest != l {
            return EdgeOutcome::EdgeNotPresent;
        }
        let next = self.es[curr as usize].next;
        self.set_enext(u, pred, next);
        self.free_e.push(curr);
        EdgeOutcome::EdgeRemoved
    }

    /// Read-only: steps over stale entries instead of purging them.
    pub fn contains_edge(&self, k: Key, l: Key) -> EdgeOutcome {
        let (Some(u), Some(_)) = (self.find(k), self.find(l)) else {
            return EdgeOutcome::VertexNotPresent;
        };
        let mut e = self.vs[u as usize].edges;
        while e != NIL {
            let s = &self.es[e as usize];
            if s.dest >= l {
                if s.dest == l && !self.stale(e) {
                    return EdgeOutcome::EdgeFound;
                }
                if s.dest > l {
                    break;
                }
            }
            e = s.next;
        }
        EdgeOutcome::VertexOrEdgeNotPresent
    }

    /// Breadth-first path, neighbours in ascending key order, stopping when
    /// `l` is discovered.
    pub fn get_path(&mut self, k: Key, l: Key) -> Option<Vec<Key>> {
        let (Some(u), Some(_)) = (self.find(k), self.find(l)) else {
            return None;
        };
        self.epoch += 1;
        let epoch = self.epoch;
        // (slot, index of predecessor in `tree`)
        let mut tree: Vec<(u32, usize)> = vec![(u, usize::MAX)];
        self.vs[u as usize].visited = epoch;
        let mut at = 0;
        while at < tree.len() {
            let x = tree[at].0;
            let mut e = self.vs[x as usize].edges;
            while e != NIL {
                if !self.stale(e) {
                    let s = &self.es[e as usize];
                    if s.dest == l {
                        let mut path = vec![l];
                        let mut i = at;
                        while i != usize::MAX {
                            path.push(self.vs[tree[i].0 as usize].key);
                            i = tree[i].1;
                        }
                        path.reverse();
                        return Some(path);
                    }
                    let t = s.target;
                    if self.vs[t as usize].visited != epoch {
                        self.vs[t as usize].visited = epoch;
                        tree.push((t, at));
                    }
                }
                e = self.es[e as usize].next;
            }
            at += 1;
        }
        None
    }

    pub fn apply(&mut self, op: &Op) -> OpResult {
        match *op {
            Op::AddVertex(k) => OpResult::Bool(self.add_vertex(k)),
            Op::RemoveVertex(k) => OpResult::Bool(self.remove_vertex(k)),
            Op::ContainsVertex(k) => OpResult::Bool(self.contains_vertex(k)),
            Op::AddEdge(k, l) => OpResult::Edge(self.add_edge(k, l)),
            Op::RemoveEdge(k, l) => OpResult::Edge(self.remove_edge(k, l)),
            Op::ContainsEdge(k, l) => OpResult::Edge(self.contains_edge(k, l)),
            Op::GetPath(k, l) => OpResult::Path(self.get_path(k, l)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineKind {
    LockFree,
    Coarse,
    Sequential,
}

impl EngineKind {
    pub const ALL: [EngineKind; 3] = [EngineKind::LockFree, EngineKind::Coarse, EngineKind::Sequential];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::LockFree => "lockfree",
            EngineKind::Coarse => "coarse",
            EngineKind::Sequential => "seq",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lockfree" | "lock-free" => Ok(EngineKind::LockFree),
            "coarse" => Ok(EngineKind::Coarse),
            "seq" | "sequential" | "sequential-baseline" => Ok(EngineKind::Sequential),
            _ => Err(GraphError::InvalidConfig(format!("unknown engine `{s}`"))),
        }
    }
}

pub enum Engine {
    LockFree(Graph),
    Coarse(Mutex<ListGraph>),
    /// Single-thread baseline; the one worker holds the lock for its whole
    /// life, so operations pay no synchronization.
    Sequential(Mutex<ListGraph>),
}

impl Engine {
    pub fn new(kind: EngineKind, max_threads: usize) -> Self {
        match kind {
            EngineKind::LockFree => Engine::LockFree(Graph::new(max_threads)),
            EngineKind::Coarse => Engine::Coarse(Mutex::new(ListGraph::new())),
            EngineKind::Sequential => Engine::Sequential(Mutex::new(ListGraph::new())),
        }
    }

    pub fn kind(&self) -> EngineKind {
        match self {
            Engine::LockFree(_) => EngineKind::LockFree,
            Engine::Coarse(_) => EngineKind::Coarse,
            Engine::Sequential(_) => EngineKind::Sequential,
        }
    }

    /// Per-thread worker. `scan_cap` bounds reachability queries on the
    /// lock-free engine; `None` waits for a conclusive answer.
    pub fn worker(&self, scan_cap: Option<u32>) -> Result<Worker<'_>, GraphError> {
        if scan_cap == Some(0) {
            return Err(GraphError::ZeroScanCap);
        }
        Ok(match self {
            Engine::LockFree(g) => Worker::LockFree(g.register()?, scan_cap),
            Engine::Coarse(m) => Worker::Coarse(m),
            Engine::Sequential(m) => match m.try_lock() {
                Ok(guard) => Worker::Sequential(guard),
                Err(TryLockError::Poisoned(p)) => Worker::Sequential(p.into_inner()),
                Err(TryLockError::WouldBlock) => {
                    return Err(GraphError::InvalidConfig(
                        "the sequential baseline supports one thread".into(),
                    ))
                }
            },
        })
    }
}

pub enum Worker<'e> {
    LockFree(ThreadHandle, Option<u32>),
    Coarse(&'e Mutex<ListGraph>),
    Sequential(MutexGuard<'e, ListGraph>),
}

fn validate(op: &Op) -> Result<(), GraphError> {
    match *op {
        Op::AddVertex(k) | Op::RemoveVertex(k) | Op::ContainsVertex(k) => check_key(k),
        Op::AddEdge(k, l) | Op::RemoveEdge(k, l) | Op::ContainsEdge(k, l) | Op::GetPath(k, l) => {
            check_pair(k, l)
        }
    }
}

impl Worker<'_> {
    pub fn apply(&mut self, op: &Op) -> Result<OpResult, GraphError> {
        validate(op)?;
        Ok(match self {
            Worker::LockFree(h, cap) => match *op {
                Op::AddVertex(k) => OpResult::Bool(h.add_vertex(k)?),
                Op::RemoveVertex(k) => OpResult::Bool(h.remove_vertex(k)?),
                Op::ContainsVertex(k) => OpResult::Bool(h.contains_vertex(k)?),
                Op::AddEdge(k, l) => OpResult::Edge(h.add_edge(k, l)?),
                Op::RemoveEdge(k, l) => OpResult::Edge(h.remove_edge(k, l)?),
                Op::ContainsEdge(k, l) => OpResult::Edge(h.contains_edge(k, l)?),
                Op::GetPath(k, l) => match cap {
                    None => OpResult::Path(h.get_path(k, l)?),
                    Some(m) => match h.get_path_bounded(k, l, *m)? {
                        BoundedPath::Complete(p) => OpResult::Path(p),
                        BoundedPath::Inconclusive => OpResult::Inconclusive,
                    },
                },
            },
            Worker::Coarse(m) => m.lock().unwrap_or_else(|p| p.into_inner()).apply(op),
            Worker::Sequential(g) => g.apply(op),
        })
    }
}
