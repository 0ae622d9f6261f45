use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use pits_core::TreeParams;
use pits_harness::{bench, run_scenario, Scenario, SCENARIOS};

#[derive(Parser)]
#[command(about = "Run adversary scenarios or tree benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate devices, notary and validator under one scenario.
    Run {
        /// Built-in scenario name, or path to a scenario JSON file.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print the outcome as JSON.
        #[arg(long)]
        json: bool,
    },
    /// List built-in scenarios.
    List,
    /// Measure tree throughput with the default parameters.
    Bench {
        #[arg(long, default_value_t = 100_000)]
        logs: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

fn load(name: &str, seed: u64) -> anyhow::Result<Scenario> {
    if let Some(s) = Scenario::named(name, seed) {
        return Ok(s);
    }
    let path = PathBuf::from(name);
    if !path.exists() {
        bail!("no scenario named {name:?} (try `harness list`)");
    }
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut s: Scenario = serde_json::from_str(&text).context("parsing scenario")?;
    s.seed = seed;
    Ok(s)
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Run { scenario, seed, json } => {
            let s = load(&scenario, seed)?;
            let out = run_scenario(&s);
            if json {
                println!("{}", serde_json::to_string_pretty(&out)?);
            } else {
                println!(
                    "{} seed={} detected={} windows={:?} expected={:?} inconsistencies={:?} receipts +{}/-{} false_alarms={}",
                    out.scenario,
                    out.seed,
                    out.detected,
                    out.localized_windows,
                    out.expected_windows,
                    out.inconsistency_kinds,
                    out.receipts_corroborating,
                    out.receipts_contradicting,
                    out.false_alarms
                );
                println!("{}", if out.passed { "PASS" } else { "FAIL" });
            }
            Ok(if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Cmd::List => {
            for name in SCENARIOS {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bench {
            logs,
            threads,
            seed,
            json,
        } => {
            let r = bench(TreeParams::default(), logs, threads, seed);
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("{r}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
