//! Concurrent histories: recording against an engine, and a line-oriented
//! text format (`tid op arg1 [arg2] result t_inv t_res`).

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Barrier;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atomics::chaos;
use crate::engine::{Engine, EngineKind};
use crate::oracle::{Op, OpResult};
use crate::{EdgeOutcome, GraphError, Key};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryEvent {
    pub tid: usize,
    pub op: Op,
    pub result: OpResult,
    /// Monotonic nanoseconds, read just before invocation.
    pub t_inv: u64,
    /// Monotonic nanoseconds, read just after the response.
    pub t_res: u64,
}

impl HistoryEvent {
    /// Real-time order: `self` responded before `other` was invoked.
    pub fn precedes(&self, other: &HistoryEvent) -> bool {
        self.t_res < other.t_inv
    }
}

impl fmt::Display for HistoryEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {} {}", self.tid, self.op, self.result, self.t_inv, self.t_res)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

fn parse_result(op: &Op, tok: &str) -> Result<OpResult, String> {
    match op {
        Op::AddVertex(_) | Op::RemoveVertex(_) | Op::ContainsVertex(_) => match tok {
            "true" => Ok(OpResult::Bool(true)),
            "false" => Ok(OpResult::Bool(false)),
            _ => Err(format!("expected true/false, got `{tok}`")),
        },
        Op::AddEdge(..) | Op::RemoveEdge(..) | Op::ContainsEdge(..) => tok
            .parse::<EdgeOutcome>()
            .map(OpResult::Edge)
            .map_err(|e| e.to_string()),
        Op::GetPath(..) => match tok {
            "nil" => Ok(OpResult::Path(None)),
            "INCONCLUSIVE" => Ok(OpResult::Inconclusive),
            _ => tok
                .split(',')
                .map(|k| k.parse::<Key>().map_err(|e| format!("bad path key `{k}`: {e}")))
                .collect::<Result<Vec<_>, _>>()
                .map(|p| OpResult::Path(Some(p))),
        },
    }
}

impl HistoryEvent {
    fn parse_line(line: &str) -> Result<Self, String> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let (tid, name) = match toks.as_slice() {
            [tid, name, ..] => (*tid, *name),
            _ => return Err("too few fields".into()),
        };
        let tid = tid.parse::<usize>().map_err(|e| format!("bad tid: {e}"))?;
        let arity = Op::arity(name).ok_or_else(|| format!("unknown op `{name}`"))?;
        if toks.len() != 2 + arity + 3 {
            return Err(format!("expected {} fields, got {}", 5 + arity, toks.len()));
        }
        let args = toks[2..2 + arity]
            .iter()
            .map(|a| a.parse::<Key>().map_err(|e| format!("bad argument `{a}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let op = Op::from_parts(name, &args).expect("arity checked");
        let rest = &toks[2 + arity..];
        let result = parse_result(&op, rest[0])?;
        let t_inv = rest[1].parse::<u64>().map_err(|e| format!("bad t_inv: {e}"))?;
        let t_res = rest[2].parse::<u64>().map_err(|e| format!("bad t_res: {e}"))?;
        if t_res < t_inv {
            return Err("response before invocation".into());
        }
        Ok(Self { tid, op, result, t_inv, t_res })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<HistoryEvent>,
}

impl History {
    pub fn new(events: Vec<HistoryEvent>) -> Self {
        Self { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Each event has `t_inv <= t_res` and a thread's events do not overlap.
    pub fn is_well_formed(&self) -> bool {
        let mut by_tid: std::collections::BTreeMap<usize, Vec<&HistoryEvent>> = Default::default();
        for e in &self.events {
            if e.t_res < e.t_inv {
                return false;
            }
            by_tid.entry(e.tid).or_default().push(e);
        }
        by_tid.values_mut().all(|evs| {
            evs.sort_by_key(|e| e.t_inv);
            evs.windows(2).all(|w| w[0].t_res < w[1].t_inv)
        })
    }

    /// Whether some pair of events from different threads overlaps in time.
    pub fn has_overlap(&self) -> bool {
        self.events.iter().enumerate().any(|(i, a)| {
            self.events[i + 1..]
                .iter()
                .any(|b| a.tid != b.tid && !a.precedes(b) && !b.precedes(a))
        })
    }

    /// Drops events whose result is `Inconclusive`.
    pub fn without_inconclusive(mut self) -> Self {
        self.events.retain(|e| e.result != OpResult::Inconclusive);
        self
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

impl FromStr for History {
    type Err = ParseError;

    /// Blank lines and `#` comments are skipped.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut events = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            events.push(
                HistoryEvent::parse_line(line).map_err(|msg| ParseError { line: i + 1, msg })?,
            );
        }
        Ok(Self { events })
    }
}

#[derive(Debug, Clone)]
pub struct RecordConfig {
    pub engine: EngineKind,
    pub threads: usize,
    /// Inclusive range of operations issued per thread.
    pub ops_per_thread: (usize, usize),
    /// Inclusive key range.
    pub keys: (Key, Key),
    /// Comparison budget for bounded reachability queries.
    pub scan_cap: u32,
    /// Chance, per mille, of yielding at each atomic step (lock-free engine).
    pub chaos_per_mille: u32,
    /// Record a single-threaded random setup phase before the workers start.
    pub prefill: bool,
    /// Thread 0 sleeps this long inside its first operation.
    pub stall: Option<Duration>,
    pub seed: u64,
}

impl Default for RecordConfig {
    fn default() -> Self {
        Self {
            engine: EngineKind::LockFree,
            threads: 2,
            ops_per_thread: (10, 20),
            keys: (1, 6),
            scan_cap: 2,
            chaos_per_mille: 200,
            prefill: true,
            stall: None,
            seed: 0,
        }
    }
}

fn random_op(rng: &mut impl Rng, (lo, hi): (Key, Key)) -> Op {
    let k = rng.gen_range(lo..=hi);
    let mut l = rng.gen_range(lo..=hi);
    if lo < hi {
        while l == k {
            l = rng.gen_range(lo..=hi);
        }
    }
    match rng.gen_range(0..7) {
        0 => Op::AddVertex(k),
        1 => Op::RemoveVertex(k),
        2 => Op::ContainsVertex(k),
        3 => Op::AddEdge(k, l),
        4 => Op::RemoveEdge(k, l),
        5 => Op::ContainsEdge(k, l),
        _ => Op::GetPath(k, l),
    }
}

/// Runs a random concurrent workload and returns its history, with
/// inconclusive reachability results dropped. The setup phase, if any, is
/// recorded under thread id `threads` and completes before any worker starts.
pub fn record(config: &RecordConfig) -> Result<History, GraphError> {
    if config.threads == 0 {
        return Err(GraphError::InvalidConfig("need at least one thread".into()));
    }
    if config.keys.0 >= config.keys.1 {
        return Err(GraphError::InvalidConfig("need at least two keys".into()));
    }
    if config.ops_per_thread.0 > config.ops_per_thread.1 {
        return Err(GraphError::InvalidConfig("empty op-count range".into()));
    }
    let engine = Engine::new(config.engine, config.threads + 1);
    let base = Instant::now();
    let now = move || base.elapsed().as_nanos() as u64;
    let mut events = Vec::new();

    if config.prefill {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
        let mut w = engine.worker(None)?;
        for k in config.keys.0..=config.keys.1 {
            if rng.gen_bool(0.8) {
                let op = Op::AddVertex(k);
                let t_inv = now();
                let result = w.apply(&op)?;
                events.push(HistoryEvent { tid: config.threads, op, result, t_inv, t_res: now() });
            }
        }
        for _ in 0..(config.keys.1 - config.keys.0) {
            let op = Op::AddEdge(
                rng.gen_range(config.keys.0..=config.keys.1),
                rng.gen_range(config.keys.0..=config.keys.1),
            );
            if let Op::AddEdge(k, l) = op {
                if k == l {
                    continue;
                }
            }
            let t_inv = now();
            let result = w.apply(&op)?;
            events.push(HistoryEvent { tid: config.threads, op, result, t_inv, t_res: now() });
        }
    }

    let barrier = Barrier::new(config.threads);
    // With a stall configured, the other workers start only once thread 0
    // is inside its stalled operation (or has finished without one).
    let stalled = AtomicBool::new(config.stall.is_none());
    let per_thread: Vec<Result<Vec<HistoryEvent>, GraphError>> = std::thread::scope(|s| {
        let joins: Vec<_> = (0..config.threads)
            .map(|tid| {
                let engine = &engine;
                let barrier = &barrier;
                let stalled = &stalled;
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(tid as u64 + 1);
                    let n = rng.gen_range(config.ops_per_thread.0..=config.ops_per_thread.1);
                    let ops: Vec<Op> = (0..n).map(|_| random_op(&mut rng, config.keys)).collect();
                    let mut w = engine.worker(Some(config.scan_cap))?;
                    if config.chaos_per_mille > 0 {
                        chaos::enable(config.chaos_per_mille, config.seed ^ ((tid as u64 + 1) << 32));
                    }
                    barrier.wait();
                    let _release = (tid == 0).then(|| SetOnDrop(stalled));
                    while tid != 0 && !stalled.load(Ordering::Acquire) {
                        std::thread::yield_now();
                    }
                    let mut out = Vec::with_capacity(n);
                    // Reachability results may be dropped as inconclusive, so
                    // stall on an operation that is sure to be kept.
                    let mut stall = if tid == 0 { config.stall } else { None };
                    for op in ops {
                        let t_inv = now();
                        if !matches!(op, Op::GetPath(..)) {
                            if let Some(d) = stall.take() {
                                stalled.store(true, Ordering::Release);
                                std::thread::sleep(d);
                            }
                        }
                        let result = w.apply(&op);
                        let t_res = now();
                        match result {
                            Ok(result) => out.push(HistoryEvent { tid, op, result, t_inv, t_res }),
                            Err(e) => {
                                chaos::disable();
                                return Err(e);
                            }
                        }
                    }
                    chaos::disable();
                    Ok(out)
                })
            })
            .collect();
        joins.into_iter().map(|j| j.join().expect("worker panicked")).collect()
    });
    for evs in per_thread {
        events.extend(evs?);
    }
    events.sort_by_key(|e| (e.t_inv, e.tid));
    Ok(History::new(events).without_inconclusive())
}

struct SetOnDrop<'a>(&'a AtomicBool);

impl Drop for SetOnDrop<'_> {
    fn drop(&mut self) {
        self.0.store(true, Ordering::Release);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let text = "\
# setup
0 add_vertex 1 true 0 5
0 add_vertex 2 true 6 9
1 add_edge 1 2 EDGE_ADDED 10 20
0 contains_edge 1 2 EDGE_FOUND 12 14
1 get_path 1 2 1,2 21 30
0 get_path 2 1 nil 22 31
0 remove_edge 1 2 EDGE_REMOVED 32 40
";
        let h: History = text.parse().unwrap();
        assert_eq!(h.len(), 7);
        assert_eq!(h.events[2].result, OpResult::Edge(EdgeOutcome::EdgeAdded));
        assert_eq!(h.events[4].result, OpResult::Path(Some(vec![1, 2])));
        let again: History = h.to_string().parse().unwrap();
        assert_eq!(again, h);
        assert!(h.is_well_formed());
        assert!(h.has_overlap());
    }

    #[test]
    fn spaced_outcomes_are_not_tokens() {
        let err = "0 add_edge 1 2 VERTEX NOT PRESENT 0 1".parse::<History>().unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn parse_errors_name_the_line() {
        for bad in [
            "0 add_vertex true 0 1",
            "0 frob 1 true 0 1",
            "0 add_vertex 1 maybe 0 1",
            "x add_vertex 1 true 0 1",
            "0 add_vertex 1 true 5 1",
            "0 get_path 1 2 1,a 0 1",
        ] {
            let err = format!("\n{bad}").parse::<History>().unwrap_err();
            assert_eq!(err.line, 2, "{bad}");
        }
    }

    #[test]
    fn overlapping_thread_is_ill_formed() {
        let h: History = "0 add_vertex 1 true 0 10\n0 add_vertex 2 true 5 12".parse().unwrap();
        assert!(!h.is_well_formed());
    }

    #[test]
    fn record_respects_bounds() {
        let cfg = RecordConfig {
            threads: 2,
            ops_per_thread: (20, 20),
            keys: (1, 5),
            prefill: false,
            seed: 3,
            ..Default::default()
        };
        let h = record(&cfg).unwrap();
        assert!(h.len() <= 40);
        assert!(h.is_well_formed());
        assert!(h.events.iter().all(|e| e.op.args().iter().all(|k| (1..=5).contains(k))));
    }

    #[test]
    fn single_thread_history_is_sequential() {
        let cfg = RecordConfig { threads: 1, seed: 11, ..Default::default() };
        let h = record(&cfg).unwrap();
        assert!(h.is_well_formed());
        assert!(!h.has_overlap());
    }

    #[test]
    fn stalled_thread_overlaps_others() {
        let cfg = RecordConfig {
            threads: 2,
            stall: Some(Duration::from_millis(20)),
            chaos_per_mille: 0,
            seed: 5,
            ..Default::default()
        };
        let h = record(&cfg).unwrap();
        assert!(h.is_well_formed());
        assert!(h.has_overlap());
    }

    #[test]
    fn record_rejects_bad_config() {
        let cfg = RecordConfig { threads: 0, ..Default::default() };
        assert!(record(&cfg).is_err());
        let cfg = RecordConfig { keys: (3, 3), ..Default::default() };
        assert!(record(&cfg).is_err());
    }
}
