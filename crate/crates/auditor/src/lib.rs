//! The validator: recomputes a device's epoch tree from its log store,
//! compares it with the published root and, on mismatch, asks the notary's
//! parity audit which sub-epochs changed. Interactor receipts then confirm
//! or contradict individual logs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use pits_agent::{LogEntry, LogStore, ReceiptStore};
use pits_core::{verify_receipt, DeviceId, Digest, EpochId, PitsTree, Receipt, TimestampOffset, TreeParams};
use pits_notary::{ApiError, AuditRequest, EpochRef, InconsistencyQuery, InconsistencyRecord, NotaryApi, NotaryError};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("no published root for {device} epoch {epoch}")]
    NoPublishedRoot { device: DeviceId, epoch: EpochId },
    #[error("snapshot unreadable: {0}")]
    SnapshotUnreadable(String),
    #[error(transparent)]
    Api(#[from] ApiError),
}

/// Absolute time span of one flagged sub-epoch, in native ticks `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamperedWindow {
    pub subepoch: usize,
    pub start: u64,
    pub end: u64,
    /// Exact times of logs that receipts prove existed here but the snapshot lacks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub receipt_times: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// The log is in the snapshot.
    Corroborates,
    /// The notary committed to the log but the snapshot lacks it.
    Contradicts,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiptEvidence {
    pub receipt: Receipt,
    pub verdict: Verdict,
    /// Absolute time of the receipt's leaf.
    pub time: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedReceipt {
    pub log_digest: Digest,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub device: DeviceId,
    pub epoch: EpochId,
    pub params: TreeParams,
    pub published_root: Digest,
    pub recomputed_root: Digest,
    pub root_match: bool,
    pub snapshot_logs: usize,
    /// False when the root differs but the notary no longer holds parity.
    pub localization_available: bool,
    pub tampered_windows: Vec<TamperedWindow>,
    pub chain_inconsistencies: Vec<InconsistencyRecord>,
    #[serde(default)]
    pub receipt_evidence: Vec<ReceiptEvidence>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_receipts: Vec<ExcludedReceipt>,
}

impl LocalizationResult {
    /// Whether anything at all points at tampering.
    pub fn detected(&self) -> bool {
        !self.root_match
            || !self.chain_inconsistencies.is_empty()
            || self.receipt_evidence.iter().any(|e| e.verdict == Verdict::Contradicts)
    }
}

/// Reads a device's line-delimited log store.
pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Vec<LogEntry>, AuditError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(AuditError::SnapshotUnreadable(format!(
            "{} is not a file",
            path.display()
        )));
    }
    LogStore::open(path)
        .map(|s| s.entries().to_vec())
        .map_err(|e| AuditError::SnapshotUnreadable(e.to_string()))
}

/// Receipts collected by interactors: every `*.jsonl` receipt store in `dir`.
pub fn load_receipts(dir: impl AsRef<Path>) -> Result<Vec<(DeviceId, Receipt)>, AuditError> {
    let mut out = Vec::new();
    let read =
        std::fs::read_dir(dir.as_ref()).map_err(|e| AuditError::SnapshotUnreadable(format!("receipts dir: {e}")))?;
    let mut paths: Vec<_> = read
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    paths.sort();
    for p in paths {
        let store = ReceiptStore::open(&p).map_err(|e| AuditError::SnapshotUnreadable(e.to_string()))?;
        out.extend(store.iter().map(|((dev, _, _), r)| (dev.clone(), r.clone())));
    }
    Ok(out)
}

/// Leaf positions of the snapshot's logs that fall in `epoch`.
pub fn epoch_logs(snapshot: &[LogEntry], params: &TreeParams, epoch: EpochId) -> Vec<(TimestampOffset, Digest)> {
    snapshot
        .iter()
        .filter_map(|e| {
            let (ep, ts) = e.locate(params);
            (ep == epoch).then_some((ts, e.digest))
        })
        .collect()
}

fn no_root(device: &DeviceId, epoch: EpochId) -> AuditError {
    AuditError::NoPublishedRoot {
        device: device.clone(),
        epoch,
    }
}

pub fn audit_device(
    snapshot: &[LogEntry],
    device: &DeviceId,
    epoch: EpochId,
    notary: &dyn NotaryApi,
) -> Result<LocalizationResult, AuditError> {
    let params = notary.params()?;
    let published_root = match notary.get_root(&EpochRef {
        device: device.clone(),
        epoch,
    }) {
        Ok(r) => r.root,
        Err(ApiError::Notary(
            NotaryError::NotFinalized(_) | NotaryError::UnknownEpoch(_) | NotaryError::UnknownDevice(_),
        )) => return Err(no_root(device, epoch)),
        Err(e) => return Err(e.into()),
    };
    let logs = epoch_logs(snapshot, &params, epoch);
    let snapshot_logs = logs.len();
    let tree = PitsTree::from_logs(params, epoch, logs).map_err(|e| AuditError::SnapshotUnreadable(e.to_string()))?;
    let recomputed_root = tree.root();
    let root_match = recomputed_root == published_root;

    let mut tampered_windows = Vec::new();
    let mut localization_available = true;
    if !root_match {
        let level = tree.level_hashes(params.depth_p).expect("depth_p within tree");
        match notary.audit(&AuditRequest {
            device: device.clone(),
            epoch,
            level,
        }) {
            Ok(report) => {
                tampered_windows = report
                    .mismatched_subepochs
                    .into_iter()
                    .map(|i| {
                        let (start, end) = params.subepoch_window(epoch, i);
                        TamperedWindow {
                            subepoch: i,
                            start,
                            end,
                            receipt_times: Vec::new(),
                        }
                    })
                    .collect();
            }
            Err(ApiError::Notary(NotaryError::ParityPruned(_))) => localization_available = false,
            Err(e) => return Err(e.into()),
        }
    }
    let chain_inconsistencies = notary.get_inconsistencies(&InconsistencyQuery {
        device: device.clone(),
        epoch: Some(epoch),
    })?;
    Ok(LocalizationResult {
        device: device.clone(),
        epoch,
        params,
        published_root,
        recomputed_root,
        root_match,
        snapshot_logs,
        localization_available,
        tampered_windows,
        chain_inconsistencies,
        receipt_evidence: Vec::new(),
        excluded_receipts: Vec::new(),
    })
}

/// Weighs interactor receipts for the audited (device, epoch) against the snapshot.
pub fn cross_check_receipts(
    mut result: LocalizationResult,
    snapshot: &[LogEntry],
    receipts: &[(DeviceId, Receipt)],
) -> LocalizationResult {
    let params = result.params;
    let present = epoch_logs(snapshot, &params, result.epoch);
    let epoch_start = params.epoch_start_ticks(result.epoch);
    for (device, receipt) in receipts {
        if *device != result.device || receipt.epoch != result.epoch {
            continue;
        }
        match verify_receipt(receipt, &result.published_root, &params) {
            Ok(true) => {}
            Ok(false) => {
                warn!(digest = %receipt.log_digest, "receipt does not match the published root");
                result.excluded_receipts.push(ExcludedReceipt {
                    log_digest: receipt.log_digest,
                    reason: "does not fold to the published root".into(),
                });
                continue;
            }
            Err(e) => {
                warn!(digest = %receipt.log_digest, "malformed receipt: {e}");
                result.excluded_receipts.push(ExcludedReceipt {
                    log_digest: receipt.log_digest,
                    reason: e.to_string(),
                });
                continue;
            }
        }
        let time = epoch_start + params.node_start_tick(params.size_ts, receipt.ts.0);
        let verdict = if present.contains(&(receipt.ts, receipt.log_digest)) {
            Verdict::Corroborates
        } else {
            Verdict::Contradicts
        };
        if verdict == Verdict::Contradicts {
            let sub = receipt.ts.ancestor(params.size_ts, params.depth_p).index as usize;
            if let Some(w) = result.tampered_windows.iter_mut().find(|w| w.subepoch == sub) {
                if !w.receipt_times.contains(&time) {
                    w.receipt_times.push(time);
                    w.receipt_times.sort_unstable();
                }
            }
        }
        result.receipt_evidence.push(ReceiptEvidence {
            receipt: receipt.clone(),
            verdict,
            time,
        });
    }
    result
}
