//! Wire messages of the notary API and the client-side trait over them.
//!
//! Every endpoint takes one JSON request object and answers with one JSON
//! response object. Digests are lowercase hex, epochs and timestamps decimal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use pits_core::{Boundary, DeviceId, Digest, EpochId, LogBatch, Receipt, ReceiptUpdate, TimestampOffset, TreeParams};

use crate::retention::RetentionStage;

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum NotaryError {
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("no state for epoch {0}")]
    UnknownEpoch(EpochId),
    #[error("epoch {0} is already finalized")]
    EpochFinalized(EpochId),
    #[error("epoch {0} is already finalized")]
    AlreadyFinalized(EpochId),
    #[error("epoch {0} has not ended yet")]
    EpochNotEnded(EpochId),
    #[error("epoch {0} is not finalized yet")]
    NotFinalized(EpochId),
    #[error("malformed batch: {0}")]
    MalformedBatch(String),
    #[error("batch sequence {got} out of order, expected {expected}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("no such log at timestamp {0}")]
    UnknownLog(TimestampOffset),
    #[error("branch covering timestamp {0} is still open")]
    BranchNotFinal(TimestampOffset),
    #[error("tree for epoch {0} has been pruned")]
    TreePruned(EpochId),
    #[error("parity for epoch {0} has been pruned")]
    ParityPruned(EpochId),
    #[error("cannot move retention from {from:?} to {to:?}")]
    InvalidTransition { from: RetentionStage, to: RetentionStage },
    #[error("expected {expected} digests, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("storage: {0}")]
    Storage(String),
}

/// Failure seen by a client: either the notary answered with an error or the
/// message never made it.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApiError {
    #[error(transparent)]
    Notary(#[from] NotaryError),
    #[error("transport: {0}")]
    Transport(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InconsistencyKind {
    ChainMismatch,
    Truncation,
    LateSubmission,
    MissingBoundary,
}

/// Immutable evidence of a batch or epoch close that failed a chain check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InconsistencyRecord {
    pub device: DeviceId,
    pub epoch: EpochId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_seq: Option<u64>,
    pub kind: InconsistencyKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<pits_core::BatchEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub received_chain_value: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_chain_value: Option<Digest>,
    /// Notary clock, native ticks since the Unix epoch.
    pub detected_at: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchAck {
    pub seq: u64,
    pub epoch: EpochId,
    /// Chain value the notary now expects the next batch to continue from.
    pub chain_value: Digest,
    pub inserted: usize,
    pub duplicates: usize,
    /// Set when the batch was already processed; nothing was applied again.
    #[serde(default)]
    pub replay: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flagged: Option<InconsistencyKind>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartEpochRequest {
    pub device: DeviceId,
    pub epoch: EpochId,
    pub seq: u64,
    pub boundary: Boundary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRef {
    pub device: DeviceId,
    pub epoch: EpochId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiptRequest {
    pub device: DeviceId,
    pub epoch: EpochId,
    pub digest: Digest,
    pub ts: TimestampOffset,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootResponse {
    pub device: DeviceId,
    pub epoch: EpochId,
    pub root: Digest,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRequest {
    pub device: DeviceId,
    pub epoch: EpochId,
    pub level: Vec<Digest>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub device: DeviceId,
    pub epoch: EpochId,
    pub root_match: bool,
    pub mismatched_subepochs: Vec<usize>,
    pub inconsistencies: Vec<InconsistencyRecord>,
    pub params: TreeParams,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InconsistencyQuery {
    pub device: DeviceId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<EpochId>,
}

/// Endpoint names, shared by server routing and the HTTP client.
pub mod endpoint {
    pub const SUBMIT_BATCH: &str = "submit_batch";
    pub const START_EPOCH: &str = "start_epoch";
    pub const GET_RECEIPT: &str = "get_receipt";
    pub const GET_UPDATE: &str = "get_update";
    pub const GET_ROOT: &str = "get_root";
    pub const AUDIT: &str = "audit";
    pub const GET_INCONSISTENCIES: &str = "get_inconsistencies";
    pub const GET_PARAMS: &str = "get_params";
}

/// Client view of a notary, local or remote.
pub trait NotaryApi: Send + Sync {
    fn params(&self) -> Result<TreeParams, ApiError>;
    fn submit_batch(&self, batch: &LogBatch) -> Result<BatchAck, ApiError>;
    fn start_epoch(&self, req: &StartEpochRequest) -> Result<BatchAck, ApiError>;
    fn get_receipt(&self, req: &ReceiptRequest) -> Result<Receipt, ApiError>;
    fn get_update(&self, req: &EpochRef) -> Result<ReceiptUpdate, ApiError>;
    fn get_root(&self, req: &EpochRef) -> Result<RootResponse, ApiError>;
    fn audit(&self, req: &AuditRequest) -> Result<AuditReport, ApiError>;
    fn get_inconsistencies(&self, req: &InconsistencyQuery) -> Result<Vec<InconsistencyRecord>, ApiError>;
}

impl<T: NotaryApi + ?Sized> NotaryApi for std::sync::Arc<T> {
    fn params(&self) -> Result<TreeParams, ApiError> {
        (**self).params()
    }
    fn submit_batch(&self, batch: &LogBatch) -> Result<BatchAck, ApiError> {
        (**self).submit_batch(batch)
    }
    fn start_epoch(&self, req: &StartEpochRequest) -> Result<BatchAck, ApiError> {
        (**self).start_epoch(req)
    }
    fn get_receipt(&self, req: &ReceiptRequest) -> Result<Receipt, ApiError> {
        (**self).get_receipt(req)
    }
    fn get_update(&self, req: &EpochRef) -> Result<ReceiptUpdate, ApiError> {
        (**self).get_update(req)
    }
    fn get_root(&self, req: &EpochRef) -> Result<RootResponse, ApiError> {
        (**self).get_root(req)
    }
    fn audit(&self, req: &AuditRequest) -> Result<AuditReport, ApiError> {
        (**self).audit(req)
    }
    fn get_inconsistencies(&self, req: &InconsistencyQuery) -> Result<Vec<InconsistencyRecord>, ApiError> {
        (**self).get_inconsistencies(req)
    }
}
