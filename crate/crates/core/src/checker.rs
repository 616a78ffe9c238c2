//! Linearizability checking for small histories: a Wing–Gong style search
//! over real-time-minimal events, replaying on [`SeqGraph`] and memoizing
//! failed `(linearized set, state)` pairs.

use std::collections::HashSet;

use crate::history::{History, HistoryEvent};
use crate::oracle::{OpResult, SeqGraph};

/// Default cap on search nodes expanded per check.
pub const DEFAULT_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// `witness` lists event indices in linearization order.
    Linearizable { witness: Vec<usize> },
    /// `prefix` holds the indices of the shortest invocation-order prefix
    /// that already has no linearization.
    NotLinearizable { prefix: Vec<usize> },
    /// The search ran out of budget; nothing is claimed either way.
    BudgetExceeded,
}

impl Verdict {
    pub fn is_linearizable(&self) -> bool {
        matches!(self, Verdict::Linearizable { .. })
    }

    pub fn is_violation(&self) -> bool {
        matches!(self, Verdict::NotLinearizable { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Linearizable { .. } => "LINEARIZABLE",
            Verdict::NotLinearizable { .. } => "NOT_LINEARIZABLE",
            Verdict::BudgetExceeded => "BUDGET_EXCEEDED",
        }
    }
}

type Bits = Vec<u64>;

fn set(bits: &mut Bits, i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn clear(bits: &mut Bits, i: usize) {
    bits[i / 64] &= !(1 << (i % 64));
}

fn get(bits: &Bits, i: usize) -> bool {
    bits[i / 64] & (1 << (i % 64)) != 0
}

enum Search {
    Found(Vec<usize>),
    None,
    OutOfBudget,
}

struct Searcher<'h> {
    events: Vec<&'h HistoryEvent>,
    budget: u64,
    failed: HashSet<(Bits, SeqGraph)>,
}

impl Searcher<'_> {
    fn run(&mut self) -> Search {
        let n = self.events.len();
        let mut done = vec![0u64; n.div_ceil(64).max(1)];
        let mut order = Vec::with_capacity(n);
        match self.dfs(&mut done, &mut order, SeqGraph::new()) {
            Some(true) => Search::Found(order),
            Some(false) => Search::None,
            None => Search::OutOfBudget,
        }
    }

    /// `Some(found)`, or `None` when out of budget.
    fn dfs(&mut self, done: &mut Bits, order: &mut Vec<usize>, state: SeqGraph) -> Option<bool> {
        let n = self.events.len();
        if order.len() == n {
            return Some(true);
        }
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        if self.failed.contains(&(done.clone(), state.clone())) {
            return Some(false);
        }
        // An event may go next only if no pending event responded before
        // it was invoked.
        let horizon = (0..n)
            .filter(|&i| !get(done, i))
            .map(|i| self.events[i].t_res)
            .min()
            .unwrap_or(u64::MAX);
        for i in 0..n {
            if get(done, i) || self.events[i].t_inv > horizon {
                continue;
            }
            let e = self.events[i];
            let mut next = state.clone();
            if !next.apply_observed(&e.op, &e.result) {
                continue;
            }
            set(done, i);
            order.push(i);
            match self.dfs(done, order, next) {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
            order.pop();
            clear(done, i);
        }
        self.failed.insert((done.clone(), state));
        Some(false)
    }
}

fn search(events: Vec<&HistoryEvent>, budget: u64) -> Search {
    Searcher { events, budget, failed: HashSet::new() }.run()
}

/// Checks `history` with the default search budget.
pub fn check_linearizable(history: &History) -> Verdict {
    check_linearizable_with_budget(history, DEFAULT_BUDGET)
}

/// Inconclusive events are ignored; indices in the verdict refer to
/// `history.events`.
pub fn check_linearizable_with_budget(history: &History, budget: u64) -> Verdict {
    let mut idx: Vec<usize> = (0..history.events.len())
        .filter(|&i| history.events[i].result != OpResult::Inconclusive)
        .collect();
    idx.sort_by_key(|&i| (history.events[i].t_inv, i));
    let pick = |ids: &[usize]| ids.iter().map(|&i| &history.events[i]).collect::<Vec<_>>();

    match search(pick(&idx), budget) {
        Search::Found(order) => Verdict::Linearizable {
            witness: order.into_iter().map(|j| idx[j]).collect(),
        },
        Search::OutOfBudget => Verdict::BudgetExceeded,
        Search::None => {
            for k in 1..=idx.len() {
                match search(pick(&idx[..k]), budget) {
                    Search::Found(_) => {}
                    Search::None => return Verdict::NotLinearizable { prefix: idx[..k].to_vec() },
                    Search::OutOfBudget => break,
                }
            }
            Verdict::NotLinearizable { prefix: idx }
        }
    }
}

/// Independently confirms a witness: it is a permutation of the conclusive
/// events, respects real-time order, and replays on the oracle.
pub fn validate_witness(history: &History, witness: &[usize]) -> Result<(), String> {
    let expected = history
        .events
        .iter()
        .filter(|e| e.result != OpResult::Inconclusive)
        .count();
    if witness.len() != expected {
        return Err(format!("witness has {} events, expected {expected}", witness.len()));
    }
    let mut seen = HashSet::new();
    for (pos, &i) in witness.iter().enumerate() {
        let e = history.events.get(i).ok_or_else(|| format!("index {i} out of range"))?;
        if !seen.insert(i) {
            return Err(format!("event {i} repeated"));
        }
        for &j in &witness[pos + 1..] {
            if history.events[j].precedes(e) {
                return Err(format!("event {j} precedes {i} in real time but follows it"));
            }
        }
    }
    let mut g = SeqGraph::new();
    for &i in witness {
        let e = &history.events[i];
        if !g.apply_observed(&e.op, &e.result) {
            return Err(format!("event {i} (`{e}`) does not replay"));
        }
    }
    Ok(())
}

/// Hand-built histories that no linearization explains.
pub fn violation_corpus() -> Vec<(&'static str, History)> {
    const CASES: &[(&str, &str)] = &[
        (
            // v(k) is removed before v(l) is added, so the two never coexist,
            // yet an add_edge spanning both reports success.
            "add_edge_across_disjoint_lifetimes",
            "0 add_vertex 1 true 0 1
             1 add_edge 1 2 EDGE_ADDED 10 100
             2 remove_vertex 1 true 20 30
             3 add_vertex 2 true 40 50",
        ),
        (
            "stale_read_after_add",
            "0 add_vertex 1 true 0 10
             1 contains_vertex 1 false 20 30",
        ),
        (
            "duplicate_add_vertex",
            "0 add_vertex 1 true 0 10
             1 add_vertex 1 true 5 15",
        ),
        (
            "double_remove_edge",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             0 add_edge 1 2 EDGE_ADDED 4 5
             1 remove_edge 1 2 EDGE_REMOVED 10 20
             2 remove_edge 1 2 EDGE_REMOVED 11 21",
        ),
        (
            "edge_present_never_added",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             1 add_edge 1 2 EDGE_PRESENT 10 20",
        ),
        (
            "edge_survives_endpoint_removal",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             0 add_edge 1 2 EDGE_ADDED 4 5
             0 remove_vertex 2 true 6 7
             0 add_vertex 2 true 8 9
             1 contains_edge 1 2 EDGE_FOUND 10 20",
        ),
        (
            // The two edges never exist at the same time, so no snapshot
            // contains the path.
            "path_from_torn_snapshot",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             0 add_vertex 3 true 4 5
             0 add_edge 1 2 EDGE_ADDED 6 7
             1 get_path 1 3 1,2,3 10 100
             2 remove_edge 1 2 EDGE_REMOVED 20 30
             2 add_edge 2 3 EDGE_ADDED 40 50",
        ),
        (
            "path_misses_existing_route",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             0 add_edge 1 2 EDGE_ADDED 4 5
             1 get_path 1 2 nil 10 20",
        ),
        (
            "path_with_wrong_endpoint",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             0 add_vertex 3 true 4 5
             0 add_edge 1 2 EDGE_ADDED 6 7
             1 get_path 1 3 1,2 10 20",
        ),
        (
            "edge_added_to_absent_vertex",
            "0 add_vertex 1 true 0 1
             1 add_edge 1 2 EDGE_ADDED 10 20",
        ),
        (
            "remove_vertex_twice",
            "0 add_vertex 1 true 0 1
             1 remove_vertex 1 true 10 20
             2 remove_vertex 1 true 15 25",
        ),
        (
            "vertex_not_present_while_both_present",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             1 contains_edge 1 2 VERTEX_NOT_PRESENT 10 20",
        ),
    ];
    CASES
        .iter()
        .map(|(name, text)| (*name, text.parse().expect("corpus history parses")))
        .collect()
}

/// Hand-built histories, mostly concurrent, covering each response of each
/// operation, that do have a linearization.
pub fn linearizable_corpus() -> Vec<(&'static str, History)> {
    const CASES: &[(&str, &str)] = &[
        (
            "add_edge_linearizes_before_overlapping_remove",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             1 add_edge 1 2 EDGE_ADDED 10 100
             2 remove_vertex 1 true 20 30
             1 contains_edge 1 2 VERTEX_NOT_PRESENT 110 120",
        ),
        (
            "add_edge_sees_removed_endpoint",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             1 add_edge 1 2 VERTEX_NOT_PRESENT 10 100
             2 remove_vertex 1 true 20 30",
        ),
        (
            "edge_present_concurrent_adds",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             1 add_edge 1 2 EDGE_ADDED 10 20
             2 add_edge 1 2 EDGE_PRESENT 11 21",
        ),
        (
            "remove_edge_outcomes",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             0 add_edge 1 2 EDGE_ADDED 4 5
             1 remove_edge 1 2 EDGE_REMOVED 10 20
             2 remove_edge 1 2 EDGE_NOT_PRESENT 11 21
             2 remove_edge 3 2 VERTEX_NOT_PRESENT 22 23",
        ),
        (
            "contains_edge_outcomes",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             1 contains_edge 1 2 VERTEX_OR_EDGE_NOT_PRESENT 10 20
             2 add_edge 1 2 EDGE_ADDED 11 21
             1 contains_edge 1 2 EDGE_FOUND 30 40
             2 remove_vertex 2 true 31 41
             1 contains_edge 1 2 VERTEX_NOT_PRESENT 50 60",
        ),
        (
            // A lookup that meets a logically removed but still linked
            // endpoint answers with the combined outcome.
            "contains_edge_with_dying_endpoint",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             1 remove_vertex 2 true 10 30
             2 contains_edge 1 2 VERTEX_OR_EDGE_NOT_PRESENT 40 50",
        ),
        (
            "vertex_ops_overlap",
            "0 add_vertex 1 true 0 10
             1 contains_vertex 1 false 1 2
             1 contains_vertex 1 true 3 4
             2 remove_vertex 1 true 5 20
             1 contains_vertex 1 true 6 7
             1 add_vertex 1 false 8 9
             1 remove_vertex 1 false 21 22",
        ),
        (
            "path_any_valid_route",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             0 add_vertex 3 true 4 5
             0 add_vertex 4 true 6 7
             0 add_edge 1 2 EDGE_ADDED 8 9
             0 add_edge 1 3 EDGE_ADDED 10 11
             0 add_edge 2 4 EDGE_ADDED 12 13
             0 add_edge 3 4 EDGE_ADDED 14 15
             1 get_path 1 4 1,3,4 20 30",
        ),
        (
            "path_races_edge_removal",
            "0 add_vertex 1 true 0 1
             0 add_vertex 2 true 2 3
             0 add_vertex 3 true 4 5
             0 add_edge 1 2 EDGE_ADDED 6 7
             0 add_edge 2 3 EDGE_ADDED 8 9
             1 get_path 1 3 1,2,3 10 100
             2 remove_edge 1 2 EDGE_REMOVED 20 30
             1 get_path 1 3 nil 110 120
             2 add_edge 1 3 EDGE_ADDED 111 121
             1 get_path 1 3 1,3 130 140",
        ),
        (
            "path_to_absent_vertex",
            "0 add_vertex 1 true 0 1
             1 get_path 1 2 nil 10 20",
        ),
        (
            "single_thread_mixed",
            "0 add_vertex 3 true 0 1
             0 add_vertex 4 true 2 3
             0 add_edge 3 4 EDGE_ADDED 4 5
             0 get_path 3 4 3,4 6 7
             0 remove_edge 3 4 EDGE_REMOVED 8 9
             0 get_path 3 4 nil 10 11
             0 remove_vertex 3 true 12 13
             0 contains_vertex 3 false 14 15",
        ),
    ];
    CASES
        .iter()
        .map(|(name, text)| (*name, text.parse().expect("corpus history parses")))
        .collect()
}
