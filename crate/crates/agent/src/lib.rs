//! Device-side roles: the monitored node that logs, chains and submits
//! digests, and the interacting peer that receives full logs and collects
//! verified receipts for them.

pub mod config;
pub mod entry;
pub mod interactor;
pub mod node;
pub mod share;
pub mod store;

use thiserror::Error;

use pits_notary::{ApiError, NotaryError};

pub use config::AgentConfig;
pub use entry::{log_digest, ContentEncoding, LogEntry, LogLine};
pub use interactor::{Interactor, ReceiptKey, ReceiptStatus, ReceiptStore};
pub use node::{FlushOutcome, FlushReport, Node, NodeConfig, Segment, CHAIN_START};
pub use share::{DirInbox, MemoryInbox, PeerTransport, SharedLog};
pub use store::LogStore;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("clock went back to {now}, last log at {last}")]
    ClockRegression { now: u64, last: u64 },
    #[error("transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Notary(NotaryError),
    #[error("the notary has no such log for this device")]
    UnknownLog,
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("corrupt agent data: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ApiError> for AgentError {
    fn from(e: ApiError) -> Self {
        match e {
            ApiError::Notary(e) => AgentError::Notary(e),
            ApiError::Transport(e) => AgentError::Transport(e),
        }
    }
}
