use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use pits_agent::{AgentConfig, DirInbox, FlushOutcome, Interactor, Node, ReceiptStatus, ReceiptStore};
use pits_core::{Digest, EpochId, TreeParams};
use pits_notary::{Clock, HttpNotary, NotaryApi, SystemClock};

#[derive(Parser, Debug)]
#[command(version, about = "Device agent for a log notary")]
struct Cli {
    #[arg(long, short, default_value = "agent.toml", global = true)]
    config: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write a starter config file.
    Init {
        #[arg(long)]
        device: String,
        #[arg(long, default_value = "http://127.0.0.1:7400")]
        notary: String,
        #[arg(long, default_value = "agent-data")]
        data_dir: PathBuf,
    },
    /// Record one event now.
    Log {
        #[arg(long)]
        content: String,
    },
    /// Send queued digests to the notary.
    Flush,
    /// Deliver a logged event (the latest by default) to a peer's inbox directory.
    Share {
        #[arg(long)]
        peer: PathBuf,
        #[arg(long)]
        digest: Option<Digest>,
    },
    /// Fetch and verify the receipt for a log a peer shared with us.
    Receipt {
        #[arg(long)]
        peer_device: String,
        #[arg(long)]
        epoch: u64,
        #[arg(long)]
        digest: Digest,
        /// Keep polling this long for the epoch to be finalized.
        #[arg(long, default_value_t = 0)]
        wait_seconds: u64,
    },
}

fn now(params: &TreeParams) -> u64 {
    SystemClock {
        ticks_per_second: params.ticks_per_second,
    }
    .now_ticks()
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    if let Cmd::Init {
        device,
        notary,
        data_dir,
    } = &cli.cmd
    {
        let params = match HttpNotary::new(notary.clone()).params() {
            Ok(p) => p,
            Err(e) => {
                eprintln!("notary unreachable ({e}); writing default parameters");
                TreeParams::default()
            }
        };
        let cfg = AgentConfig {
            device: device.as_str().into(),
            notary: notary.clone(),
            data_dir: data_dir.clone(),
            skew_seconds: 2,
            params,
        };
        std::fs::write(&cli.config, cfg.to_toml())?;
        println!("wrote {}", cli.config.display());
        return Ok(());
    }
    let cfg = AgentConfig::load(&cli.config).with_context(|| format!("loading {}", cli.config.display()))?;
    let notary = HttpNotary::new(cfg.notary.clone());

    match cli.cmd {
        Cmd::Init { .. } => unreachable!(),
        Cmd::Log { content } => {
            let mut node = Node::open(cfg.node_config(), &cfg.data_dir)?;
            let e = node.log_event(content.as_bytes(), now(&cfg.params))?;
            let (epoch, ts) = e.locate(&cfg.params);
            println!("{} epoch={} ts={}", e.digest, epoch, ts);
        }
        Cmd::Flush => {
            let theirs = notary.params()?;
            if theirs != cfg.params {
                bail!("notary uses {theirs:?}, config has {:?}", cfg.params);
            }
            let mut node = Node::open(cfg.node_config(), &cfg.data_dir)?;
            node.roll_epoch(now(&cfg.params))?;
            match node.flush_batch(&notary)? {
                FlushOutcome::Deferred => println!("nothing queued"),
                FlushOutcome::Sent(r) => {
                    println!("sent {} batches, {} logs", r.batches, r.logs);
                    for (seq, e) in r.rejected {
                        println!("batch {seq} rejected: {e}");
                    }
                }
            }
        }
        Cmd::Share { peer, digest } => {
            let node = Node::open(cfg.node_config(), &cfg.data_dir)?;
            let entry = match digest {
                Some(d) => node.store().find(&d).context("no such log")?,
                None => node.store().last().context("no logs yet")?,
            };
            node.share_event(entry, &DirInbox::new(&peer))?;
            println!("shared {} with {}", entry.digest, peer.display());
        }
        Cmd::Receipt {
            peer_device,
            epoch,
            digest,
            wait_seconds,
        } => {
            let inbox = DirInbox::new(cfg.inbox_dir());
            let shared = inbox
                .receive_all()?
                .into_iter()
                .find(|m| m.device.0 == peer_device && m.log.to_entry().is_ok_and(|e| e.digest == digest))
                .context("no shared log with that digest from that device")?;
            let mut interactor = Interactor::new(cfg.params, ReceiptStore::open(cfg.receipts_path())?);
            let (device, entry) = interactor.receive(&shared)?;
            if entry.locate(&cfg.params).0 != EpochId(epoch) {
                bail!("log belongs to epoch {}, not {epoch}", entry.locate(&cfg.params).0);
            }
            let deadline = std::time::Instant::now() + Duration::from_secs(wait_seconds);
            loop {
                match interactor.obtain_receipt(&notary, &device, &entry)? {
                    ReceiptStatus::Verified(r) => {
                        println!("{}", serde_json::to_string_pretty(&r)?);
                        return Ok(());
                    }
                    status if std::time::Instant::now() >= deadline => {
                        println!("not yet available: {status:?}");
                        return Ok(());
                    }
                    _ => std::thread::sleep(Duration::from_secs(1)),
                }
            }
        }
    }
    Ok(())
}
