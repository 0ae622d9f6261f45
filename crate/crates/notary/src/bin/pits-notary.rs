use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use pits_core::{HashId, TreeParams};
use pits_notary::{Notary, NotaryConfig, RecordStore, RetentionSchedule, SystemClock};

/// Log notary server.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:7400")]
    listen: SocketAddr,
    /// Directory for parity records and inconsistency logs.
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long, default_value_t = 3600)]
    epoch_seconds: u64,
    #[arg(long, default_value_t = 22)]
    size_ts: u8,
    #[arg(long, default_value_t = 12)]
    depth_p: u8,
    #[arg(long, default_value_t = 16)]
    size_p: u16,
    #[arg(long, default_value_t = 10)]
    depth_u: u8,
    /// Native timestamp resolution.
    #[arg(long, default_value_t = 1000)]
    ticks_per_second: u64,
    /// e.g. `leaves-only=1h,parity-only=7d,roots-only=365d`
    #[arg(long, default_value = "")]
    retention: RetentionSchedule,
    #[arg(long, default_value_t = 60)]
    grace_seconds: u64,
    /// Store parity only for sub-epochs that contain logs.
    #[arg(long)]
    omit_empty_parities: bool,
    /// Reject devices that were not registered up front.
    #[arg(long)]
    require_registration: bool,
    /// Devices to register at start-up.
    #[arg(long = "device")]
    devices: Vec<String>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let params = TreeParams {
        size_ts: args.size_ts,
        depth_p: args.depth_p,
        size_p: args.size_p,
        depth_u: args.depth_u,
        epoch_duration: args.epoch_seconds,
        ticks_per_second: args.ticks_per_second,
        hash_id: HashId::Sha256,
    };
    params.validate().context("invalid tree parameters")?;
    let config = NotaryConfig {
        params,
        grace_seconds: args.grace_seconds,
        omit_empty_parities: args.omit_empty_parities,
        retention: args.retention,
        require_registration: args.require_registration,
        secret_seed: None,
    };
    let store = RecordStore::open(&args.data_dir).context("opening data dir")?;
    let clock = Arc::new(SystemClock {
        ticks_per_second: params.ticks_per_second,
    });
    let notary = Arc::new(Notary::with_store(config, clock, store)?);
    for d in args.devices {
        notary.register_device(d.into());
    }
    let listener = tokio::net::TcpListener::bind(args.listen)
        .await
        .with_context(|| format!("binding {}", args.listen))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    pits_notary::server::serve(notary, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
