#![allow(dead_code)]

use std::collections::BTreeMap;

use sha2::{Digest as _, Sha256};

use pits_core::{hash, BatchEntry, Boundary, ChainState, DeviceId, Digest, EpochId, LogBatch, TimestampOffset};
use pits_notary::StartEpochRequest;

fn sha(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest::from_bytes(h.finalize().into())
}

/// Root of a dense tree of height `size_ts` over `logs`, computed level by level.
pub fn dense_root(size_ts: u8, logs: &[(TimestampOffset, Digest)]) -> Digest {
    let mut slots: BTreeMap<u64, Vec<Digest>> = BTreeMap::new();
    for (ts, d) in logs {
        let v = slots.entry(ts.0).or_default();
        if !v.contains(d) {
            v.push(*d);
        }
    }
    let empty = sha(&[]);
    let mut level: Vec<Digest> = (0..1u64 << size_ts)
        .map(|i| match slots.get_mut(&i) {
            None => empty,
            Some(v) if v.len() == 1 => v[0],
            Some(v) => {
                v.sort();
                let parts: Vec<&[u8]> = v.iter().map(|d| d.as_bytes().as_slice()).collect();
                sha(&parts)
            }
        })
        .collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|p| sha(&[p[0].as_bytes(), p[1].as_bytes()]))
            .collect();
    }
    level[0]
}

/// Minimal honest device: keeps one chain per epoch and numbers its messages.
pub struct SimDevice {
    pub id: DeviceId,
    pub seq: u64,
    pub chain: Option<ChainState>,
    pub pending_boundary: Option<Boundary>,
    pub logs: BTreeMap<EpochId, Vec<(TimestampOffset, Digest)>>,
    counter: u64,
}

impl SimDevice {
    pub fn new(id: &str) -> Self {
        SimDevice {
            id: id.into(),
            seq: 0,
            chain: None,
            pending_boundary: None,
            logs: BTreeMap::new(),
            counter: 0,
        }
    }

    /// Starts a new chain; the boundary goes out with the next message.
    pub fn begin_epoch(&mut self, epoch: EpochId) {
        let seed = hash(format!("{}-seed-{}", self.id, epoch.0).as_bytes());
        let prev = self.chain.take();
        self.pending_boundary = Some(Boundary {
            seed,
            prev_epoch: prev.as_ref().map(|c| c.epoch),
            prev_final: prev.as_ref().map(|c| *c.current()),
        });
        self.chain = Some(ChainState::start(epoch, seed));
    }

    pub fn epoch(&self) -> EpochId {
        self.chain.as_ref().expect("epoch started").epoch
    }

    pub fn next_digest(&mut self) -> Digest {
        self.counter += 1;
        hash(format!("{}-log-{}", self.id, self.counter).as_bytes())
    }

    /// Builds the next batch from `(ts, digest)` pairs and advances the chain.
    pub fn batch(&mut self, entries: &[(TimestampOffset, Digest)]) -> LogBatch {
        let chain = self.chain.as_mut().expect("epoch started");
        for (_, d) in entries {
            chain.extend(d);
        }
        self.logs.entry(chain.epoch).or_default().extend_from_slice(entries);
        let b = LogBatch {
            device: self.id.clone(),
            epoch: chain.epoch,
            seq: self.seq,
            entries: entries.iter().map(|&(ts, digest)| BatchEntry { ts, digest }).collect(),
            chain_value: *chain.current(),
            boundary: self.pending_boundary.take(),
        };
        self.seq += 1;
        b
    }

    pub fn start_request(&mut self) -> StartEpochRequest {
        let r = StartEpochRequest {
            device: self.id.clone(),
            epoch: self.epoch(),
            seq: self.seq,
            boundary: self.pending_boundary.take().expect("boundary pending"),
        };
        self.seq += 1;
        r
    }

    pub fn logs_of(&self, epoch: EpochId) -> Vec<(TimestampOffset, Digest)> {
        self.logs.get(&epoch).cloned().unwrap_or_default()
    }
}
