use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use nbgraph::bench::{self, emit_csv, run_bench, MixPreset, WorkloadConfig};
use nbgraph::checker::{check_linearizable_with_budget, Verdict, DEFAULT_BUDGET};
use nbgraph::engine::EngineKind;
use nbgraph::history::{record, History, RecordConfig};

#[derive(Parser)]
#[command(name = "nbgraph", version, about = "Concurrent graph benchmark and history checker")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Timed throughput run on one engine.
    Bench {
        #[arg(long, default_value = "lockfree")]
        engine: EngineKind,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value = "balanced")]
        mix: MixPreset,
        /// Give 10% of operations to reachability queries.
        #[arg(long)]
        with_getpath: bool,
        /// Seconds.
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "prefill-v", default_value_t = 1000)]
        prefill_v: usize,
        #[arg(long = "prefill-deg", default_value_t = 8)]
        prefill_deg: usize,
        #[arg(long, default_value_t = 1)]
        key_lo: i64,
        #[arg(long, default_value_t = 100_000)]
        key_hi: i64,
        /// Write a CSV row here instead of only printing a summary.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Append to the CSV file rather than overwrite it.
        #[arg(long)]
        append: bool,
        /// Comparison rounds before a reachability query gives up.
        #[arg(long = "scan-cap", default_value_t = 8)]
        scan_cap: u32,
    },
    /// Record a random concurrent history on an engine.
    Record {
        #[arg(long, default_value = "lockfree")]
        engine: EngineKind,
        #[arg(long, default_value_t = 3)]
        threads: usize,
        /// Operations per thread.
        #[arg(long, default_value_t = 15)]
        ops: usize,
        #[arg(long, default_value_t = 6)]
        keys: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "scan-cap", default_value_t = 2)]
        scan_cap: u32,
        /// Output file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a history file for linearizability.
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Bench {
            engine,
            threads,
            mix,
            with_getpath,
            duration,
            seed,
            prefill_v,
            prefill_deg,
            key_lo,
            key_hi,
            csv,
            append,
            scan_cap,
        } => {
            if !(duration.is_finite() && duration > 0.0) {
                return Err("duration must be a positive number of seconds".into());
            }
            let cfg = WorkloadConfig {
                engine,
                threads,
                duration: Duration::from_secs_f64(duration),
                keys: (key_lo, key_hi),
                mix,
                with_getpath,
                prefill_vertices: prefill_v,
                prefill_degree: prefill_deg,
                seed,
                scan_cap,
                max_threads: bench::max_threads_from_env()?.unwrap_or(bench::DEFAULT_MAX_THREADS),
            };
            let r = run_bench(&cfg)?;
            println!(
                "{} threads={} mix={} ops={} ops/s={:.2} inconclusive={} p50={:.2}us p99={:.2}us",
                r.engine, r.threads, r.mix, r.total_ops, r.ops_per_sec, r.getpath_inconclusive, r.p50_us, r.p99_us
            );
            if let Some(path) = csv {
                emit_csv(&[r], &path, append)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Record { engine, threads, ops, keys, seed, scan_cap, out } => {
            let h = record(&RecordConfig {
                engine,
                threads,
                ops_per_thread: (ops, ops),
                keys: (1, keys),
                scan_cap,
                seed,
                ..Default::default()
            })?;
            match out {
                Some(p) => std::fs::write(p, h.to_string())?,
                None => print!("{h}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { file, budget } => {
            let text = std::fs::read_to_string(&file)?;
            let h: History = text.parse()?;
            let v = check_linearizable_with_budget(&h, budget);
            println!("{}", v.label());
            match v {
                Verdict::Linearizable { witness } => {
                    for i in witness {
                        println!("  {}", h.events[i]);
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Verdict::NotLinearizable { prefix } => {
                    println!("minimal failing prefix:");
                    for i in prefix {
                        println!("  {}", h.events[i]);
                    }
                    Ok(ExitCode::from(1))
                }
                Verdict::BudgetExceeded => Ok(ExitCode::from(3)),
            }
        }
    }
}
