//! The interacting peer: receives full logs, collects and verifies receipts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pits_core::{finalize_receipt, verify_receipt, verify_update, DeviceId, Digest, EpochId, Receipt, TreeParams};
use pits_notary::{ApiError, EpochRef, NotaryApi, NotaryError, ReceiptRequest};

use crate::entry::LogEntry;
use crate::share::SharedLog;
use crate::AgentError;

pub type ReceiptKey = (DeviceId, EpochId, Digest);

#[derive(Serialize, Deserialize)]
struct StoredReceipt {
    device: DeviceId,
    receipt: Receipt,
}

/// Receipts that verified against a published root, keyed by (device, epoch, digest).
#[derive(Debug, Default)]
pub struct ReceiptStore {
    path: Option<PathBuf>,
    receipts: BTreeMap<ReceiptKey, Receipt>,
}

impl ReceiptStore {
    pub fn in_memory() -> Self {
        ReceiptStore::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        let path = path.as_ref().to_path_buf();
        let mut receipts = BTreeMap::new();
        if path.exists() {
            for line in fs::read_to_string(&path)?.lines().filter(|l| !l.trim().is_empty()) {
                let s: StoredReceipt =
                    serde_json::from_str(line).map_err(|e| AgentError::Corrupt(format!("receipt store: {e}")))?;
                receipts.insert((s.device, s.receipt.epoch, s.receipt.log_digest), s.receipt);
            }
        }
        Ok(ReceiptStore {
            path: Some(path),
            receipts,
        })
    }

    fn insert(&mut self, device: DeviceId, receipt: Receipt) -> Result<(), AgentError> {
        if let Some(path) = &self.path {
            let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
            let line = serde_json::to_string(&StoredReceipt {
                device: device.clone(),
                receipt: receipt.clone(),
            })
            .expect("receipt serializes");
            writeln!(f, "{line}")?;
        }
        self.receipts
            .insert((device, receipt.epoch, receipt.log_digest), receipt);
        Ok(())
    }

    pub fn get(&self, device: &DeviceId, epoch: EpochId, digest: &Digest) -> Option<&Receipt> {
        self.receipts.get(&(device.clone(), epoch, *digest))
    }

    pub fn len(&self) -> usize {
        self.receipts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.receipts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ReceiptKey, &Receipt)> {
        self.receipts.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReceiptStatus {
    Verified(Receipt),
    /// The branch covering the log is still open at the notary.
    AwaitingBranch,
    /// Partial receipt held; completes once the epoch's update is published.
    AwaitingUpdate,
}

pub struct Interactor {
    params: TreeParams,
    receipts: ReceiptStore,
    pending: BTreeMap<ReceiptKey, Receipt>,
}

fn verification(e: impl std::fmt::Display) -> AgentError {
    AgentError::VerificationFailed(e.to_string())
}

impl Interactor {
    pub fn new(params: TreeParams, receipts: ReceiptStore) -> Self {
        Interactor {
            params,
            receipts,
            pending: BTreeMap::new(),
        }
    }

    pub fn receipts(&self) -> &ReceiptStore {
        &self.receipts
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Accepts a shared log and recomputes its digest from content and time.
    pub fn receive(&self, msg: &SharedLog) -> Result<(DeviceId, LogEntry), AgentError> {
        Ok((msg.device.clone(), msg.log.to_entry()?))
    }

    pub fn obtain_receipt(
        &mut self,
        api: &dyn NotaryApi,
        device: &DeviceId,
        entry: &LogEntry,
    ) -> Result<ReceiptStatus, AgentError> {
        let (epoch, ts) = entry.locate(&self.params);
        let req = ReceiptRequest {
            device: device.clone(),
            epoch,
            digest: entry.digest,
            ts,
        };
        let receipt = match api.get_receipt(&req) {
            Ok(r) => r,
            Err(ApiError::Notary(NotaryError::UnknownLog(_))) => return Err(AgentError::UnknownLog),
            Err(ApiError::Notary(NotaryError::BranchNotFinal(_))) => return Ok(ReceiptStatus::AwaitingBranch),
            Err(e) => return Err(e.into()),
        };
        if receipt.log_digest != entry.digest || receipt.ts != ts || receipt.epoch != epoch {
            return Err(verification("receipt is for a different log"));
        }
        let key = (device.clone(), epoch, entry.digest);
        self.pending.insert(key.clone(), receipt);
        self.try_complete(api, key)
    }

    fn try_complete(&mut self, api: &dyn NotaryApi, key: ReceiptKey) -> Result<ReceiptStatus, AgentError> {
        let r = EpochRef {
            device: key.0.clone(),
            epoch: key.1,
        };
        let root = match api.get_root(&r) {
            Ok(root) => root.root,
            Err(ApiError::Notary(NotaryError::NotFinalized(_))) => return Ok(ReceiptStatus::AwaitingUpdate),
            Err(e) => return Err(e.into()),
        };
        let held = self.pending.remove(&key).expect("pending receipt");
        let full = if held.is_full() {
            held
        } else {
            let update = api.get_update(&r)?;
            if !verify_update(&update, &root, &self.params).map_err(verification)? {
                return Err(verification("receipt update does not match the published root"));
            }
            finalize_receipt(&held, &update, &root, &self.params).map_err(verification)?
        };
        if !verify_receipt(&full, &root, &self.params).map_err(verification)? {
            return Err(verification("receipt does not fold to the published root"));
        }
        self.receipts.insert(key.0, full.clone())?;
        Ok(ReceiptStatus::Verified(full))
    }

    /// Completes held partial receipts whose epochs have been finalized.
    pub fn complete_pending(&mut self, api: &dyn NotaryApi) -> Vec<(ReceiptKey, Result<ReceiptStatus, AgentError>)> {
        let keys: Vec<ReceiptKey> = self.pending.keys().cloned().collect();
        keys.into_iter()
            .map(|k| {
                let res = self.try_complete(api, k.clone());
                if res.is_err() {
                    self.pending.remove(&k);
                }
                (k, res)
            })
            .collect()
    }
}
