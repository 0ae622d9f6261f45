//! Log notary service for the PITS commitment scheme.
//!
//! [`Notary`] holds per-device epoch trees, checks each batch against the
//! device's forward hash chain, finalizes epochs into a root, a receipt update
//! and a secret parity record, and serves receipts and audits. [`server`]
//! exposes it over JSON/HTTP and [`HttpNotary`] is the matching client.

pub mod api;
pub mod clock;
pub mod http;
pub mod record;
pub mod retention;
pub mod server;
pub mod service;

pub use api::{
    endpoint, ApiError, AuditReport, AuditRequest, BatchAck, EpochRef, InconsistencyKind, InconsistencyQuery,
    InconsistencyRecord, NotaryApi, NotaryError, ReceiptRequest, RootResponse, StartEpochRequest,
};
pub use clock::{Clock, ManualClock, SystemClock};
pub use http::HttpNotary;
pub use record::{RecordBody, RecordError, RecordStore, StoredRecord};
pub use retention::{RetentionSchedule, RetentionStage};
pub use service::{Notary, NotaryConfig};
