//! Tamper-evident log commitments: a sparse hash tree addressed by log
//! timestamps, secret-indexed parity for locating alterations inside an epoch,
//! and the forward-integrity hash chain devices keep between submissions.

pub mod chain;
pub mod digest;
pub mod empty;
pub mod params;
pub mod parity;
pub mod receipt;
pub mod tree;

pub use chain::{
    chain_extend, close_epoch_check, fold_chain, verify_batch_chain, BatchEntry, Boundary, ChainError, ChainState,
    DeviceId, LogBatch,
};
pub use digest::{hash, hash_concat, hash_pair, Digest, DigestParseError, HashId, DIGEST_LEN};
pub use empty::{build_empty_hash_table, EmptyHashTable};
pub use params::{EpochId, NodeAddr, ParamsError, TimestampOffset, TreeParams};
pub use parity::{
    compare_parity, extract_parity, finalize_tree, gen_secret, ParityBits, ParityError, ParityRecord, ParitySecret,
};
pub use receipt::{
    finalize_receipt, fold_level, verify_receipt, verify_receipt_with, verify_update, Receipt, ReceiptError,
    ReceiptUpdate,
};
pub use tree::{PitsTree, TreeError};
