//! Forward-integrity hash chain kept by the monitored node.
//!
//! `h_i = H(h_{i-1} ‖ H(l_i))`, with the previous value overwritten on every
//! step. Nothing here can walk the chain backwards.

use std::fmt;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{hash_pair, Digest, DIGEST_LEN};
use crate::params::{EpochId, TimestampOffset};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("epoch {0} never received its chain seed")]
    MissingBoundary(EpochId),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub String);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DeviceId {
    fn from(s: &str) -> Self {
        DeviceId(s.to_owned())
    }
}

impl From<String> for DeviceId {
    fn from(s: String) -> Self {
        DeviceId(s)
    }
}

/// `H(prev ‖ log_digest)`.
pub fn chain_extend(prev: &Digest, log_digest: &Digest) -> Digest {
    hash_pair(prev, log_digest)
}

pub fn fold_chain<'a>(known: &Digest, entries: impl IntoIterator<Item = &'a Digest>) -> Digest {
    entries.into_iter().fold(*known, |acc, d| chain_extend(&acc, d))
}

/// Accepts iff extending `known` over `entries` yields `claimed`.
pub fn verify_batch_chain<'a>(known: &Digest, entries: impl IntoIterator<Item = &'a Digest>, claimed: &Digest) -> bool {
    fold_chain(known, entries) == *claimed
}

/// Epoch-close check: the previous epoch's final chain value sent with the next
/// epoch's seed must match what the notary folded from the batches it received.
pub fn close_epoch_check(
    epoch: EpochId,
    expected_final: Option<&Digest>,
    claimed_h_ep: &Digest,
) -> Result<bool, ChainError> {
    let expected = expected_final.ok_or(ChainError::MissingBoundary(epoch))?;
    Ok(expected == claimed_h_ep)
}

/// Current chain value of one epoch on the monitored node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainState {
    pub epoch: EpochId,
    current: Digest,
    pub counter: u64,
}

impl ChainState {
    pub fn start(epoch: EpochId, seed: Digest) -> Self {
        ChainState {
            epoch,
            current: seed,
            counter: 0,
        }
    }

    pub fn fresh_seed<R: RngCore + CryptoRng>(rng: &mut R) -> Digest {
        let mut bytes = [0u8; DIGEST_LEN];
        rng.fill_bytes(&mut bytes);
        Digest::from_bytes(bytes)
    }

    pub fn current(&self) -> &Digest {
        &self.current
    }

    /// Advances the chain, dropping the old value.
    pub fn extend(&mut self, log_digest: &Digest) -> Digest {
        self.current = chain_extend(&self.current, log_digest);
        self.counter += 1;
        self.current
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub ts: TimestampOffset,
    pub digest: Digest,
}

/// Sent with the first batch of an epoch: the seed `h_0` of the new chain and
/// the final value `h_ep` of the epoch the device logged in before.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundary {
    pub seed: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prev_epoch: Option<EpochId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prev_final: Option<Digest>,
}

/// Log hashes of one epoch in chain order, with the chain value after the last one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogBatch {
    pub device: DeviceId,
    pub epoch: EpochId,
    pub seq: u64,
    pub entries: Vec<BatchEntry>,
    pub chain_value: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
}

impl LogBatch {
    pub fn digests(&self) -> impl Iterator<Item = &Digest> {
        self.entries.iter().map(|e| &e.digest)
    }
}
