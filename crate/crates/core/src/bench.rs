//! Throughput harness: prefill, run a timed mixed workload on one engine,
//! aggregate counts and latency percentiles, write CSV.

use std::fmt;
use std::fs::OpenOptions;
use std::path::Path;
use std::str::FromStr;
use std::sync::Barrier;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Engine, EngineKind};
use crate::oracle::{Op, OpResult};
use crate::{GraphError, Key};

/// Env var overriding the lock-free engine's registry capacity.
pub const MAX_THREADS_ENV: &str = "GRAPH_MAX_THREADS";
pub const DEFAULT_MAX_THREADS: usize = 64;

pub const OP_NAMES: [&str; 7] = [
    "add_vertex",
    "remove_vertex",
    "contains_vertex",
    "add_edge",
    "remove_edge",
    "contains_edge",
    "get_path",
];

const ADD_V: usize = 0;
const REM_V: usize = 1;
const CON_V: usize = 2;
const ADD_E: usize = 3;
const REM_E: usize = 4;
const CON_E: usize = 5;
const PATH: usize = 6;

/// Operation weights in basis points (sum 10 000), indexed like [`OP_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mix(pub [u32; 7]);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixPreset {
    Lookup,
    Balanced,
    Update,
}

impl MixPreset {
    pub const ALL: [MixPreset; 3] = [MixPreset::Lookup, MixPreset::Balanced, MixPreset::Update];

    pub fn name(self) -> &'static str {
        match self {
            MixPreset::Lookup => "lookup",
            MixPreset::Balanced => "balanced",
            MixPreset::Update => "update",
        }
    }

    /// Lookups split evenly over the two contains ops, updates evenly over
    /// the four modifiers. With reachability queries, every weight is scaled
    /// by 0.9 and the freed 10 points go to `get_path`.
    pub fn mix(self, with_getpath: bool) -> Mix {
        let lookup_bp = match self {
            MixPreset::Lookup => 9000,
            MixPreset::Balanced => 5000,
            MixPreset::Update => 1000,
        };
        let mut w = [0u32; 7];
        w[CON_V] = lookup_bp / 2;
        w[CON_E] = lookup_bp / 2;
        for i in [ADD_V, REM_V, ADD_E, REM_E] {
            w[i] = (10_000 - lookup_bp) / 4;
        }
        if with_getpath {
            for x in &mut w {
                *x = *x * 9 / 10;
            }
            w[PATH] = 1000;
        }
        Mix(w)
    }
}

impl fmt::Display for MixPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MixPreset {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lookup" => Ok(MixPreset::Lookup),
            "balanced" => Ok(MixPreset::Balanced),
            "update" => Ok(MixPreset::Update),
            _ => Err(GraphError::InvalidConfig(format!("unknown mix `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorkloadConfig {
    pub engine: EngineKind,
    pub threads: usize,
    pub duration: Duration,
    /// Inclusive key range.
    pub keys: (Key, Key),
    pub mix: MixPreset,
    pub with_getpath: bool,
    pub prefill_vertices: usize,
    /// Average out-degree of the prefilled graph.
    pub prefill_degree: usize,
    pub seed: u64,
    /// Comparison budget for reachability queries on the lock-free engine.
    pub scan_cap: u32,
    /// Registry capacity of the lock-free engine.
    pub max_threads: usize,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            engine: EngineKind::LockFree,
            threads: 1,
            duration: Duration::from_secs(5),
            keys: (1, 100_000),
            mix: MixPreset::Balanced,
            with_getpath: false,
            prefill_vertices: 1000,
            prefill_degree: 8,
            seed: 0,
            scan_cap: 8,
            max_threads: DEFAULT_MAX_THREADS,
        }
    }
}

/// Registry capacity from [`MAX_THREADS_ENV`], if set and valid.
pub fn max_threads_from_env() -> Result<Option<usize>, GraphError> {
    match std::env::var(MAX_THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(GraphError::InvalidConfig(format!("{MAX_THREADS_ENV}={s} is not a positive integer"))),
        },
    }
}

impl WorkloadConfig {
    pub fn mix_weights(&self) -> Mix {
        self.mix.mix(self.with_getpath)
    }

    pub fn mix_label(&self) -> String {
        if self.with_getpath {
            format!("{}+getpath", self.mix)
        } else {
            self.mix.to_string()
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: String| Err(GraphError::InvalidConfig(m));
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if self.engine == EngineKind::LockFree && self.threads > self.max_threads {
            return bad(format!(
                "{} threads exceed the registry capacity of {}",
                self.threads, self.max_threads
            ));
        }
        if self.engine == EngineKind::Sequential && self.threads != 1 {
            return bad("the sequential baseline runs with exactly one thread".into());
        }
        if self.keys.0 >= self.keys.1 || self.keys.0 == crate::KEY_MIN || self.keys.1 == crate::KEY_MAX {
            return bad(format!("bad key range [{}, {}]", self.keys.0, self.keys.1));
        }
        let span = (self.keys.1 - self.keys.0) as u128 + 1;
        if self.prefill_vertices as u128 > span {
            return bad(format!("{} prefill vertices do not fit the key range", self.prefill_vertices));
        }
        if self.prefill_degree > 0 && self.prefill_vertices < 2 {
            return bad("edges need at least two prefill vertices".into());
        }
        if self.scan_cap == 0 {
            return bad("scan cap must be at least 1".into());
        }
        let sum: u32 = self.mix_weights().0.iter().sum();
        if sum != 10_000 {
            return bad(format!("mix sums to {sum} basis points"));
        }
        Ok(())
    }

    /// Keys of the prefilled vertices, deterministic in the seed.
    pub fn prefill_keys(&self) -> Vec<Key> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let span = (self.keys.1 - self.keys.0 + 1) as usize;
        let mut keys: Vec<Key> = sample(&mut rng, span, self.prefill_vertices)
            .into_iter()
            .map(|i| self.keys.0 + i as Key)
            .collect();
        keys.sort_unstable();
        keys
    }

    /// The prefill as a list of operations: vertices first, then
    /// `prefill_vertices * prefill_degree` random edges among them.
    pub fn prefill_ops(&self) -> Vec<Op> {
        let keys = self.prefill_keys();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        let mut ops: Vec<Op> = keys.iter().map(|&k| Op::AddVertex(k)).collect();
        if keys.len() >= 2 {
            for _ in 0..keys.len() * self.prefill_degree {
                let a = keys[rng.gen_range(0..keys.len())];
                let mut b = a;
                while b == a {
                    b = keys[rng.gen_range(0..keys.len())];
                }
                ops.push(Op::AddEdge(a, b));
            }
        }
        ops
    }

    /// Operation stream of worker `tid`. Vertex operations draw keys from
    /// the whole range; edge and path operations draw endpoints from the
    /// prefilled keys so that they touch populated adjacency lists.
    pub fn op_stream(&self, tid: usize) -> OpStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(tid as u64);
        let mut cumulative = [0u32; 7];
        let mut acc = 0;
        for (i, w) in self.mix_weights().0.iter().enumerate() {
            acc += w;
            cumulative[i] = acc;
        }
        let mut hot = self.prefill_keys();
        if hot.len() < 2 {
            hot = vec![self.keys.0, self.keys.1];
        }
        OpStream { rng, cumulative, keys: self.keys, hot }
    }
}

pub struct OpStream {
    rng: ChaCha8Rng,
    cumulative: [u32; 7],
    keys: (Key, Key),
    hot: Vec<Key>,
}

impl OpStream {
    fn pair(&mut self) -> (Key, Key) {
        let a = self.hot[self.rng.gen_range(0..self.hot.len())];
        let mut b = a;
        while b == a {
            b = self.hot[self.rng.gen_range(0..self.hot.len())];
        }
        (a, b)
    }
}

impl Iterator for OpStream {
    type Item = Op;

    fn next(&mut self) -> Option<Op> {
        let r = self.rng.gen_range(0..10_000);
        let kind = self.cumulative.iter().position(|&c| r < c).unwrap_or(CON_V);
        Some(match kind {
            ADD_V | REM_V | CON_V => {
                let k = self.rng.gen_range(self.keys.0..=self.keys.1);
                [Op::AddVertex(k), Op::RemoveVertex(k), Op::ContainsVertex(k)][kind]
            }
            _ => {
                let (a, b) = self.pair();
                match kind {
                    ADD_E => Op::AddEdge(a, b),
                    REM_E => Op::RemoveEdge(a, b),
                    CON_E => Op::ContainsEdge(a, b),
                    _ => Op::GetPath(a, b),
                }
            }
        })
    }
}

fn op_index(op: &Op) -> usize {
    match op {
        Op::AddVertex(_) => ADD_V,
        Op::RemoveVertex(_) => REM_V,
        Op::ContainsVertex(_) => CON_V,
        Op::AddEdge(..) => ADD_E,
        Op::RemoveEdge(..) => REM_E,
        Op::ContainsEdge(..) => CON_E,
        Op::GetPath(..) => PATH,
    }
}

const SUB_BITS: u32 = 3;

/// Log-linear latency histogram over nanoseconds: 8 sub-buckets per power
/// of two, so quantiles are within 12.5%.
#[derive(Debug, Clone)]
pub struct LatencyHistogram {
    buckets: Vec<u64>,
    count: u64,
}

impl Default for LatencyHistogram {
    fn default() -> Self {
        Self { buckets: vec![0; 64 << SUB_BITS], count: 0 }
    }
}

impl LatencyHistogram {
    fn bucket(ns: u64) -> usize {
        if ns < (1 << SUB_BITS) {
            return ns as usize;
        }
        let exp = 63 - ns.leading_zeros();
        let sub = (ns >> (exp - SUB_BITS)) & ((1 << SUB_BITS) - 1);
        (((exp - SUB_BITS + 1) << SUB_BITS) as u64 + sub) as usize
    }

    /// Upper edge of a bucket, in nanoseconds.
    fn upper(b: usize) -> u64 {
        let (hi, sub) = ((b >> SUB_BITS) as u32, (b & ((1 << SUB_BITS) - 1)) as u64);
        if hi == 0 {
            return sub;
        }
        let exp = hi + SUB_BITS - 1;
        let up = (((1u64 << SUB_BITS) + sub + 1) as u128) << (exp - SUB_BITS);
        up.min(u64::MAX as u128) as u64
    }

    pub fn record(&mut self, ns: u64) {
        self.buckets[Self::bucket(ns)] += 1;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &LatencyHistogram) {
        for (a, b) in self.buckets.iter_mut().zip(&other.buckets) {
            *a += b;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Upper bound of the `q`-quantile in nanoseconds; 0 when empty.
    pub fn quantile_ns(&self, q: f64) -> u64 {
        if self.count == 0 {
            return 0;
        }
        let rank = ((q * self.count as f64).ceil() as u64).clamp(1, self.count);
        let mut seen = 0;
        for (b, &n) in self.buckets.iter().enumerate() {
            seen += n;
            if seen >= rank {
                return Self::upper(b);
            }
        }
        Self::upper(self.buckets.len() - 1)
    }
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub engine: EngineKind,
    pub threads: usize,
    pub mix: String,
    /// Measured wall-clock length of the timed phase.
    pub duration_s: f64,
    pub total_ops: u64,
    pub ops_per_sec: f64,
    /// Completed operations per type, indexed like [`OP_NAMES`].
    pub per_op: [u64; 7],
    pub getpath_inconclusive: u64,
    pub p50_us: f64,
    pub p99_us: f64,
    pub config: WorkloadConfig,
}

struct WorkerTally {
    per_op: [u64; 7],
    inconclusive: u64,
    hist: LatencyHistogram,
}

/// Prefills a fresh engine and runs the timed workload.
pub fn run_bench(config: &WorkloadConfig) -> Result<BenchResult, GraphError> {
    config.validate()?;
    let engine = match config.engine {
        EngineKind::LockFree => Engine::LockFree(crate::Graph::with_config(crate::GraphConfig {
            max_threads: config.max_threads,
            ..Default::default()
        })?),
        k => Engine::new(k, config.max_threads),
    };
    {
        let mut w = engine.worker(None)?;
        for op in config.prefill_ops() {
            w.apply(&op)?;
        }
    }

    let barrier = Barrier::new(config.threads + 1);
    let (tallies, elapsed) = std::thread::scope(|s| {
        let joins: Vec<_> = (0..config.threads)
            .map(|tid| {
                let (engine, barrier) = (&engine, &barrier);
                s.spawn(move || -> Result<WorkerTally, GraphError> {
                    let mut stream = config.op_stream(tid);
                    let worker = engine.worker(Some(config.scan_cap));
                    barrier.wait();
                    let mut w = worker?;
                    let deadline = Instant::now() + config.duration;
                    let mut t = WorkerTally { per_op: [0; 7], inconclusive: 0, hist: LatencyHistogram::default() };
                    loop {
                        let op = stream.next().expect("endless stream");
                        let start = Instant::now();
                        if start >= deadline {
                            break;
                        }
                        let r = w.apply(&op)?;
                        t.hist.record(start.elapsed().as_nanos() as u64);
                        if r == OpResult::Inconclusive {
                            t.inconclusive += 1;
                        }
                        t.per_op[op_index(&op)] += 1;
                    }
                    Ok(t)
                })
            })
            .collect();
        barrier.wait();
        let start = Instant::now();
        let tallies: Vec<_> = joins.into_iter().map(|j| j.join().expect("worker panicked")).collect();
        (tallies, start.elapsed())
    });

    let mut per_op = [0u64; 7];
    let mut inconclusive = 0;
    let mut hist = LatencyHistogram::default();
    for t in tallies {
        let t = t?;
        for (a, b) in per_op.iter_mut().zip(t.per_op) {
            *a += b;
        }
        inconclusive += t.inconclusive;
        hist.merge(&t.hist);
    }
    let total_ops: u64 = per_op.iter().sum();
    let duration_s = elapsed.as_secs_f64();
    Ok(BenchResult {
        engine: config.engine,
        threads: config.threads,
        mix: config.mix_label(),
        duration_s,
        total_ops,
        ops_per_sec: total_ops as f64 / duration_s,
        per_op,
        getpath_inconclusive: inconclusive,
        p50_us: hist.quantile_ns(0.50) as f64 / 1e3,
        p99_us: hist.quantile_ns(0.99) as f64 / 1e3,
        config: config.clone(),
    })
}

pub const CSV_HEADER: [&str; 9] = [
    "engine",
    "threads",
    "mix",
    "duration_s",
    "total_ops",
    "ops_per_sec",
    "getpath_inconclusive",
    "p50_us",
    "p99_us",
];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("no results to write")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Writes one row per result. With `append`, rows go after any existing
/// content and the header is written only if the file is empty.
pub fn emit_csv(results: &[BenchResult], path: &Path, append: bool) -> Result<(), CsvError> {
    if results.is_empty() {
        return Err(CsvError::Empty);
    }
    let io = |source| CsvError::Io { path: path.display().to_string(), source };
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(io)?;
    let fresh = file.metadata().map_err(io)?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(CSV_HEADER)?;
    }
    for r in results {
        w.write_record([
            r.engine.name().to_string(),
            r.threads.to_string(),
            r.mix.clone(),
            format!("{:.3}", r.duration_s),
            r.total_ops.to_string(),
            format!("{:.2}", r.ops_per_sec),
            r.getpath_inconclusive.to_string(),
            format!("{:.2}", r.p50_us),
            format!("{:.2}", r.p99_us),
        ])?;
    }
    w.flush().map_err(io)?;
    Ok(())
}
