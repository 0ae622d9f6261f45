use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use pits_auditor::{audit_device, cross_check_receipts, load_receipts, load_snapshot};
use pits_core::EpochId;
use pits_notary::HttpNotary;

/// Audit one device epoch against its notary and write a JSON report.
///
/// Exits with status 2 when tampering or a chain inconsistency was found.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// The device's log store (`logs.jsonl`).
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    device: String,
    #[arg(long)]
    epoch: u64,
    /// Notary base URL.
    #[arg(long)]
    notary: String,
    /// Directory of interactor receipt stores (`*.jsonl`).
    #[arg(long)]
    receipts: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
}

fn main() -> anyhow::Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    let snapshot = load_snapshot(&args.snapshot)?;
    let notary = HttpNotary::new(args.notary);
    let device = args.device.as_str().into();
    let mut result = audit_device(&snapshot, &device, EpochId(args.epoch), &notary)?;
    if let Some(dir) = &args.receipts {
        result = cross_check_receipts(result, &snapshot, &load_receipts(dir)?);
    }
    let json = serde_json::to_string_pretty(&result)?;
    std::fs::write(&args.report, json).with_context(|| format!("writing {}", args.report.display()))?;
    println!(
        "root {} | {} window(s) | {} chain record(s) | {} receipt(s)",
        if result.root_match { "matches" } else { "MISMATCH" },
        result.tampered_windows.len(),
        result.chain_inconsistencies.len(),
        result.receipt_evidence.len()
    );
    Ok(if result.detected() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}
