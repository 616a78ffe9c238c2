//! Multi-threaded stress driver shared by the stress and acceptance targets.
#![allow(dead_code)]

use std::sync::Barrier;
use std::time::{Duration, Instant};

use nbgraph::atomics::{chaos, OpCounters};
use nbgraph::bench::{MixPreset, WorkloadConfig};
use nbgraph::oracle::Op;
use nbgraph::reach::BoundedPath;
use nbgraph::{EdgeOutcome, Graph, GraphConfig, Key, Reclamation, ThreadHandle};

#[derive(Debug, Clone)]
pub struct StressConfig {
    pub threads: usize,
    pub duration: Duration,
    pub mix: MixPreset,
    pub with_getpath: bool,
    /// Inclusive key range; small ranges mean heavy contention.
    pub keys: (Key, Key),
    pub prefill_vertices: usize,
    pub prefill_degree: usize,
    pub scan_cap: u32,
    /// Yield probability per atomic step and traversal step.
    pub chaos_per_mille: u32,
    pub reclamation: Reclamation,
    pub seed: u64,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self {
            threads: 4,
            duration: Duration::from_secs(1),
            mix: MixPreset::Update,
            with_getpath: true,
            keys: (1, 48),
            prefill_vertices: 32,
            prefill_degree: 4,
            scan_cap: 4,
            chaos_per_mille: 20,
            reclamation: Reclamation::Epoch,
            seed: 1,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct StressReport {
    pub ops: u64,
    pub lookups: u64,
    /// CAS + FAA issued by contains_vertex, contains_edge and get_path.
    pub lookup_rmw: u64,
    pub edge_added: u64,
    pub edge_removed: u64,
    pub paths: u64,
    pub inconclusive: u64,
}

impl StressReport {
    fn merge(&mut self, o: &StressReport) {
        self.ops += o.ops;
        self.lookups += o.lookups;
        self.lookup_rmw += o.lookup_rmw;
        self.edge_added += o.edge_added;
        self.edge_removed += o.edge_removed;
        self.paths += o.paths;
        self.inconclusive += o.inconclusive;
    }
}

impl StressConfig {
    fn workload(&self) -> WorkloadConfig {
        WorkloadConfig {
            threads: self.threads,
            duration: self.duration,
            keys: self.keys,
            mix: self.mix,
            with_getpath: self.with_getpath,
            prefill_vertices: self.prefill_vertices,
            prefill_degree: self.prefill_degree,
            seed: self.seed,
            scan_cap: self.scan_cap,
            ..Default::default()
        }
    }
}

fn apply(h: &ThreadHandle, op: &Op, scan_cap: u32, rep: &mut StressReport) {
    let before = OpCounters::current();
    match *op {
        Op::AddVertex(k) => {
            h.add_vertex(k).unwrap();
        }
        Op::RemoveVertex(k) => {
            h.remove_vertex(k).unwrap();
        }
        Op::ContainsVertex(k) => {
            h.contains_vertex(k).unwrap();
        }
        Op::AddEdge(k, l) => {
            if h.add_edge(k, l).unwrap() == EdgeOutcome::EdgeAdded {
                rep.edge_added += 1;
            }
        }
        Op::RemoveEdge(k, l) => {
            if h.remove_edge(k, l).unwrap() == EdgeOutcome::EdgeRemoved {
                rep.edge_removed += 1;
            }
        }
        Op::ContainsEdge(k, l) => {
            h.contains_edge(k, l).unwrap();
        }
        Op::GetPath(k, l) => {
            rep.paths += 1;
            if h.get_path_bounded(k, l, scan_cap).unwrap() == BoundedPath::Inconclusive {
                rep.inconclusive += 1;
            }
        }
    }
    rep.ops += 1;
    if op.is_lookup() {
        rep.lookups += 1;
        rep.lookup_rmw += OpCounters::current().since(before).rmw();
    }
}

/// Prefills a fresh graph and hammers it from `threads` workers for
/// `duration`. Returns with all workers joined; nothing is quiesced.
pub fn stress(cfg: &StressConfig) -> (Graph, StressReport) {
    let graph = Graph::with_config(GraphConfig {
        max_threads: cfg.threads + 1,
        reclamation: cfg.reclamation,
    })
    .unwrap();
    let wl = cfg.workload();
    let mut report = StressReport::default();
    {
        let h = graph.register().unwrap();
        for op in wl.prefill_ops() {
            apply(&h, &op, cfg.scan_cap, &mut report);
        }
    }
    let barrier = Barrier::new(cfg.threads);
    let parts: Vec<StressReport> = std::thread::scope(|s| {
        let joins: Vec<_> = (0..cfg.threads)
            .map(|tid| {
                let (graph, wl, barrier) = (&graph, &wl, &barrier);
                s.spawn(move || {
                    let h = graph.register().unwrap();
                    let mut ops = wl.op_stream(tid);
                    let mut rep = StressReport::default();
                    if cfg.chaos_per_mille > 0 {
                        chaos::enable(cfg.chaos_per_mille, cfg.seed ^ (tid as u64 + 1) << 20);
                    }
                    barrier.wait();
                    let deadline = Instant::now() + cfg.duration;
                    while Instant::now() < deadline {
                        // Check the clock every few ops only.
                        for _ in 0..16 {
                            apply(&h, &ops.next().unwrap(), cfg.scan_cap, &mut rep);
                        }
                    }
                    chaos::disable();
                    rep
                })
            })
            .collect();
        joins.into_iter().map(|j| j.join().expect("stress worker panicked")).collect()
    });
    for p in &parts {
        report.merge(p);
    }
    (graph, report)
}

/// Structural and counter checks on a graph no thread is modifying.
/// Returns one message per problem.
pub fn quiescent_problems(graph: &Graph) -> Vec<String> {
    let audit = graph.audit();
    let mut out = audit.violations.clone();
    for v in &audit.vertices {
        let attributed = v.by_add + v.by_remove + v.by_purge;
        if v.ecnt != attributed {
            out.push(format!(
                "vertex {}: ecnt {} != add {} + remove {} + purge {}",
                v.key, v.ecnt, v.by_add, v.by_remove, v.by_purge
            ));
        }
        if v.pending_edges != 0 {
            out.push(format!("vertex {}: {} unsettled edges", v.key, v.pending_edges));
        }
    }
    out
}

/// With no modifier running, every contains must finish within the length of
/// the lists it walks plus `slack`. Returns a message per violation.
pub fn step_bound_problems(graph: &Graph, keys: (Key, Key), slack: u64) -> Vec<String> {
    let audit = graph.audit();
    let vlen = audit.vertices.len() as u64;
    let elen = audit
        .vertices
        .iter()
        .map(|v| (v.live_edges.len() + v.stale_edges + v.marked_edges + v.pending_edges) as u64)
        .max()
        .unwrap_or(0);
    let h = graph.register().unwrap();
    let mut out = Vec::new();
    for k in keys.0..=keys.1 {
        let before = OpCounters::current();
        h.contains_vertex(k).unwrap();
        let d = OpCounters::current().since(before);
        if d.steps > vlen + slack || d.rmw() != 0 {
            out.push(format!("contains_vertex {k}: {} steps (bound {}), {} rmw", d.steps, vlen + slack, d.rmw()));
        }
        for l in keys.0..=keys.1 {
            if k == l {
                continue;
            }
            let before = OpCounters::current();
            h.contains_edge(k, l).unwrap();
            let d = OpCounters::current().since(before);
            let bound = vlen + elen + slack;
            if d.steps > bound || d.rmw() != 0 {
                out.push(format!("contains_edge {k} {l}: {} steps (bound {bound}), {} rmw", d.steps, d.rmw()));
            }
        }
    }
    out
}
