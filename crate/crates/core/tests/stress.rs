mod common;

use std::time::Duration;

use common::{quiescent_problems, step_bound_problems, stress, StressConfig};
use nbgraph::bench::MixPreset;
use nbgraph::Reclamation;

fn secs(s: f64) -> Duration {
    Duration::from_secs_f64(s)
}

#[test]
fn update_heavy_run_leaves_consistent_counters() {
    let cfg = StressConfig { duration: secs(1.5), ..Default::default() };
    let (graph, rep) = stress(&cfg);
    assert!(rep.edge_added > 0 && rep.edge_removed > 0, "{rep:?}");
    assert_eq!(rep.lookup_rmw, 0);
    assert_eq!(quiescent_problems(&graph), Vec::<String>::new());
}

#[test]
fn every_mix_keeps_lookups_read_only() {
    for (i, mix) in MixPreset::ALL.into_iter().enumerate() {
        let cfg = StressConfig { mix, duration: secs(0.5), seed: 10 + i as u64, ..Default::default() };
        let (graph, rep) = stress(&cfg);
        assert!(rep.lookups > 0);
        assert_eq!(rep.lookup_rmw, 0, "{mix:?}");
        assert_eq!(quiescent_problems(&graph), Vec::<String>::new());
    }
}

#[test]
fn lookups_are_bounded_after_modifiers_stop() {
    let cfg = StressConfig { duration: secs(0.5), seed: 3, ..Default::default() };
    let (graph, _) = stress(&cfg);
    assert_eq!(step_bound_problems(&graph, (cfg.keys.0, cfg.keys.1), 2), Vec::<String>::new());
}

#[test]
fn epoch_mode_frees_retired_nodes() {
    let cfg = StressConfig { duration: secs(0.5), seed: 4, ..Default::default() };
    let (graph, _) = stress(&cfg);
    graph.quiesce();
    let s = graph.reclaim_stats();
    assert!(s.retired() > 0);
    assert_eq!(s.double_retires, 0);
    assert!(s.freed_ratio() >= 0.99, "{s:?}");
}

#[test]
fn leak_mode_holds_everything_until_drop() {
    let cfg = StressConfig {
        duration: secs(0.5),
        reclamation: Reclamation::Leak,
        seed: 5,
        ..Default::default()
    };
    let (graph, _) = stress(&cfg);
    graph.quiesce();
    let s = graph.reclaim_stats();
    assert!(s.retired() > 0);
    assert_eq!(s.freed_retired(), 0);
    assert_eq!(quiescent_problems(&graph), Vec::<String>::new());
}

#[test]
fn no_chaos_run_is_clean_too() {
    let cfg = StressConfig { duration: secs(0.5), chaos_per_mille: 0, threads: 3, seed: 6, ..Default::default() };
    let (graph, rep) = stress(&cfg);
    assert_eq!(rep.lookup_rmw, 0);
    assert_eq!(quiescent_problems(&graph), Vec::<String>::new());
}
