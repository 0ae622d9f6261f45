//! The monitored node: hashes each log, keeps the forward chain and batches
//! digests to the notary.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use pits_core::{BatchEntry, Boundary, ChainState, DeviceId, Digest, EpochId, LogBatch, TreeParams, DIGEST_LEN};
use pits_notary::{ApiError, BatchAck, NotaryApi, NotaryError};

use crate::entry::LogEntry;
use crate::share::{PeerTransport, SharedLog};
use crate::store::LogStore;
use crate::AgentError;

/// Content of the log that opens every epoch's chain.
pub const CHAIN_START: &[u8] = b"chain-start";

#[derive(Clone, Debug)]
pub struct NodeConfig {
    pub device: DeviceId,
    pub params: TreeParams,
    /// How far the clock may step back before logging is refused, in ticks.
    pub skew_ticks: u64,
}

impl NodeConfig {
    pub fn new(device: impl Into<DeviceId>, params: TreeParams) -> Self {
        NodeConfig {
            device: device.into(),
            params,
            skew_ticks: 2 * params.ticks_per_second,
        }
    }
}

/// Unsent digests of one epoch, sent as one batch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub epoch: EpochId,
    pub entries: Vec<BatchEntry>,
    /// Chain value after the last entry.
    pub chain_value: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
    /// Assigned on the first send attempt; retries reuse it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
}

impl Segment {
    /// Bytes this segment occupies as digests, timestamps and chain values.
    pub fn held_bytes(&self) -> usize {
        let boundary = self
            .boundary
            .map_or(0, |b| DIGEST_LEN + b.prev_final.map_or(0, |_| 8 + DIGEST_LEN));
        8 + DIGEST_LEN + self.entries.len() * (8 + DIGEST_LEN) + boundary
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct NodeState {
    next_seq: u64,
    chain: Option<ChainState>,
    last_ts: Option<u64>,
    queue: VecDeque<Segment>,
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct FlushReport {
    pub batches: usize,
    pub logs: usize,
    pub acks: Vec<BatchAck>,
    /// Batches the notary refused for good (e.g. the epoch was already closed).
    pub rejected: Vec<(u64, NotaryError)>,
}

#[derive(Debug, PartialEq, Eq)]
pub enum FlushOutcome {
    /// Nothing queued; no message sent.
    Deferred,
    Sent(FlushReport),
}

pub struct Node {
    config: NodeConfig,
    state: NodeState,
    store: LogStore,
    state_path: Option<PathBuf>,
    rng: StdRng,
}

impl Node {
    pub fn in_memory(config: NodeConfig) -> Self {
        Node {
            config,
            state: NodeState::default(),
            store: LogStore::in_memory(),
            state_path: None,
            rng: StdRng::from_os_rng(),
        }
    }

    /// Opens (or creates) an agent directory holding `logs.jsonl` and `state.json`.
    pub fn open(config: NodeConfig, dir: impl AsRef<Path>) -> Result<Self, AgentError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let state_path = dir.join("state.json");
        let state = if state_path.exists() {
            serde_json::from_slice(&fs::read(&state_path)?)
                .map_err(|e| AgentError::Corrupt(format!("agent state: {e}")))?
        } else {
            NodeState::default()
        };
        Ok(Node {
            config,
            state,
            store: LogStore::open(dir.join("logs.jsonl"))?,
            state_path: Some(state_path),
            rng: StdRng::from_os_rng(),
        })
    }

    /// Replaces the seed source; simulations use this for reproducible runs.
    pub fn with_rng_seed(mut self, seed: u64) -> Self {
        self.rng = StdRng::seed_from_u64(seed);
        self
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn device(&self) -> &DeviceId {
        &self.config.device
    }

    pub fn store(&self) -> &LogStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut LogStore {
        &mut self.store
    }

    pub fn chain_value(&self) -> Option<Digest> {
        self.state.chain.as_ref().map(|c| *c.current())
    }

    pub fn current_epoch(&self) -> Option<EpochId> {
        self.state.chain.as_ref().map(|c| c.epoch)
    }

    pub fn queue(&self) -> &VecDeque<Segment> {
        &self.state.queue
    }

    pub fn queue_mut(&mut self) -> &mut VecDeque<Segment> {
        &mut self.state.queue
    }

    pub fn queued_logs(&self) -> usize {
        self.state.queue.iter().map(|s| s.entries.len()).sum()
    }

    /// Agent-side storage beyond the logs: the current chain value plus the unsent queue.
    pub fn overhead_bytes(&self) -> usize {
        let chain = if self.state.chain.is_some() { DIGEST_LEN } else { 0 };
        chain + self.state.queue.iter().map(Segment::held_bytes).sum::<usize>()
    }

    fn persist(&self) -> Result<(), AgentError> {
        if let Some(path) = &self.state_path {
            let tmp = path.with_extension("json.tmp");
            fs::write(&tmp, serde_json::to_vec(&self.state).expect("state serializes"))?;
            fs::rename(&tmp, path)?;
        }
        Ok(())
    }

    fn check_clock(&self, now: u64) -> Result<u64, AgentError> {
        match self.state.last_ts {
            Some(last) if now + self.config.skew_ticks < last => Err(AgentError::ClockRegression { now, last }),
            Some(last) => Ok(now.max(last)),
            None => Ok(now),
        }
    }

    /// Records one event: hashed, chained, stored and queued.
    pub fn log_event(&mut self, content: &[u8], now: u64) -> Result<LogEntry, AgentError> {
        let now = self.check_clock(now)?;
        self.roll_epoch(now)?;
        let entry = LogEntry::new(content, now);
        self.append(entry.clone())?;
        Ok(entry)
    }

    /// Starts a fresh chain when `now` lies in a later epoch than the current
    /// one; returns the chain-start log it creates.
    pub fn roll_epoch(&mut self, now: u64) -> Result<Option<LogEntry>, AgentError> {
        let now = self.check_clock(now)?;
        let epoch = self.config.params.epoch_of(now);
        if self.state.chain.as_ref().is_some_and(|c| c.epoch >= epoch) {
            return Ok(None);
        }
        let seed = ChainState::fresh_seed(&mut self.rng);
        let prev = self.state.chain.take();
        let boundary = Boundary {
            seed,
            prev_epoch: prev.as_ref().map(|c| c.epoch),
            prev_final: prev.as_ref().map(|c| *c.current()),
        };
        debug!(device = %self.config.device, %epoch, "starting chain");
        self.state.chain = Some(ChainState::start(epoch, seed));
        self.state.queue.push_back(Segment {
            epoch,
            entries: Vec::new(),
            chain_value: seed,
            boundary: Some(boundary),
            seq: None,
        });
        let entry = LogEntry::new(CHAIN_START, now);
        self.append(entry.clone())?;
        Ok(Some(entry))
    }

    fn append(&mut self, entry: LogEntry) -> Result<(), AgentError> {
        let (epoch, ts) = self.config.params.locate(entry.ts);
        let chain = self.state.chain.as_mut().expect("chain started before append");
        debug_assert_eq!(chain.epoch, epoch);
        let value = chain.extend(&entry.digest);
        let open = self
            .state
            .queue
            .back()
            .is_some_and(|s| s.epoch == epoch && s.seq.is_none());
        if !open {
            self.state.queue.push_back(Segment {
                epoch,
                entries: Vec::new(),
                chain_value: value,
                boundary: None,
                seq: None,
            });
        }
        let seg = self.state.queue.back_mut().expect("segment present");
        seg.entries.push(BatchEntry {
            ts,
            digest: entry.digest,
        });
        seg.chain_value = value;
        self.state.last_ts = Some(entry.ts);
        self.store.append(entry)?;
        self.persist()
    }

    /// Sends queued segments in order, one message each, waiting for every ack.
    ///
    /// A transport failure keeps the queue; the next flush resends the same
    /// message under the same sequence number.
    pub fn flush_batch(&mut self, api: &dyn NotaryApi) -> Result<FlushOutcome, AgentError> {
        if self.state.queue.is_empty() {
            return Ok(FlushOutcome::Deferred);
        }
        let mut report = FlushReport::default();
        while let Some(seg) = self.state.queue.front_mut() {
            if seg.seq.is_none() {
                seg.seq = Some(self.state.next_seq);
                self.state.next_seq += 1;
                self.persist()?;
            }
            let seg = self.state.queue.front().expect("front");
            let batch = LogBatch {
                device: self.config.device.clone(),
                epoch: seg.epoch,
                seq: seg.seq.expect("assigned"),
                entries: seg.entries.clone(),
                chain_value: seg.chain_value,
                boundary: seg.boundary,
            };
            match api.submit_batch(&batch) {
                Ok(ack) => {
                    report.logs += batch.entries.len();
                    report.acks.push(ack);
                }
                Err(ApiError::Transport(e)) => return Err(AgentError::Transport(e)),
                Err(ApiError::Notary(e @ NotaryError::OutOfOrder { .. })) => return Err(AgentError::Notary(e)),
                Err(ApiError::Notary(e)) => {
                    warn!(device = %self.config.device, seq = batch.seq, "batch rejected: {e}");
                    report.rejected.push((batch.seq, e));
                }
            }
            report.batches += 1;
            self.state.queue.pop_front();
            self.persist()?;
        }
        Ok(FlushOutcome::Sent(report))
    }

    /// Hands a logged entry, content and all, to an interacting peer.
    pub fn share_event(&self, entry: &LogEntry, peer: &dyn PeerTransport) -> Result<(), AgentError> {
        peer.deliver(&SharedLog::new(self.config.device.clone(), entry))
    }
}
