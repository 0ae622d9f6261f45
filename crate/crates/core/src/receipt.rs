//! Proofs of inclusion and the generic receipt update.
//!
//! A receipt carries only the non-empty siblings along a log's path. Bit `k`
//! of the bitmap (least significant first) stands for the sibling met at fold
//! step `k`, i.e. at depth `size_ts - k`; a clear bit means that sibling is the
//! empty-subtree digest and was left out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{hash_concat, hash_pair, Digest};
use crate::empty::EmptyHashTable;
use crate::params::{EpochId, TimestampOffset, TreeParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReceiptError {
    #[error("malformed receipt: {0}")]
    Malformed(&'static str),
    #[error("receipt is partial (covers up to depth {0}), a full receipt is required")]
    Partial(u8),
    #[error("receipt update must hold {expected} digests, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("receipt is for epoch {receipt}, update is for epoch {update}")]
    EpochMismatch { receipt: EpochId, update: EpochId },
    #[error("receipt update does not fold to the trusted root or does not contain the receipt's branch")]
    UpdateInconsistent,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Receipt {
    pub epoch: EpochId,
    pub ts: TimestampOffset,
    pub log_digest: Digest,
    /// Other digests sharing the leaf, ascending.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub co_leaf: Vec<Digest>,
    /// Index of `log_digest` within the full sorted leaf list.
    #[serde(default)]
    pub co_leaf_position: u32,
    /// Non-empty siblings, leaf-adjacent first.
    pub poi: Vec<Digest>,
    pub bitmap: u64,
    /// Depth the path reaches: 0 for a full receipt, `depth_u` for a partial one.
    pub partial_depth: u8,
}

impl Receipt {
    pub fn is_full(&self) -> bool {
        self.partial_depth == 0
    }

    /// Leaf digest: the log digest alone, or `H` over the sorted co-leaf list.
    pub fn leaf_digest(&self) -> Result<Digest, ReceiptError> {
        if self.co_leaf.is_empty() {
            if self.co_leaf_position != 0 {
                return Err(ReceiptError::Malformed("co-leaf position out of range"));
            }
            return Ok(self.log_digest);
        }
        let pos = self.co_leaf_position as usize;
        if pos > self.co_leaf.len() {
            return Err(ReceiptError::Malformed("co-leaf position out of range"));
        }
        let mut all = Vec::with_capacity(self.co_leaf.len() + 1);
        all.extend_from_slice(&self.co_leaf[..pos]);
        all.push(self.log_digest);
        all.extend_from_slice(&self.co_leaf[pos..]);
        if !all.windows(2).all(|w| w[0] < w[1]) {
            return Err(ReceiptError::Malformed("co-leaf digests not strictly ascending"));
        }
        Ok(hash_concat(&all))
    }

    /// Folds the path up to `partial_depth` and returns the node reached there.
    pub fn fold(&self, size_ts: u8, empty: &EmptyHashTable) -> Result<Digest, ReceiptError> {
        if size_ts as usize + 1 != empty.len() {
            return Err(ReceiptError::Malformed("empty table does not match tree height"));
        }
        if size_ts < 64 && self.ts.0 >> size_ts != 0 {
            return Err(ReceiptError::Malformed("timestamp outside the tree"));
        }
        if self.partial_depth > size_ts {
            return Err(ReceiptError::Malformed("partial depth below the leaves"));
        }
        let steps = (size_ts - self.partial_depth) as u32;
        if steps < 64 && self.bitmap >> steps != 0 {
            return Err(ReceiptError::Malformed("bitmap bits set beyond the path"));
        }
        if self.bitmap.count_ones() as usize != self.poi.len() {
            return Err(ReceiptError::Malformed("bitmap popcount differs from poi length"));
        }

        let mut node = self.leaf_digest()?;
        let mut poi = self.poi.iter();
        for k in 0..steps {
            let depth = size_ts - k as u8;
            let sibling = if self.bitmap >> k & 1 == 1 {
                poi.next().expect("popcount checked")
            } else {
                empty.get(depth)
            };
            node = if self.ts.0 >> k & 1 == 1 {
                hash_pair(sibling, &node)
            } else {
                hash_pair(&node, sibling)
            };
        }
        Ok(node)
    }
}

/// Accepts iff the full receipt recomputes to `root`.
pub fn verify_receipt(receipt: &Receipt, root: &Digest, params: &TreeParams) -> Result<bool, ReceiptError> {
    verify_receipt_with(receipt, root, params.size_ts, &EmptyHashTable::new(params.size_ts))
}

pub fn verify_receipt_with(
    receipt: &Receipt,
    root: &Digest,
    size_ts: u8,
    empty: &EmptyHashTable,
) -> Result<bool, ReceiptError> {
    if !receipt.is_full() {
        return Err(ReceiptError::Partial(receipt.partial_depth));
    }
    Ok(receipt.fold(size_ts, empty)? == *root)
}

/// Every node at depth `depth_u`, empty branches as `E[depth_u]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiptUpdate {
    pub epoch: EpochId,
    pub level: Vec<Digest>,
}

impl ReceiptUpdate {
    /// Raw concatenation of the level digests.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.level.iter().flat_map(|d| d.as_bytes().iter().copied()).collect()
    }

    /// Pairwise `H`-fold of the level up to a single digest.
    pub fn fold_root(&self) -> Digest {
        fold_level(self.level.clone())
    }
}

/// Folds a power-of-two level pairwise until one digest remains.
pub fn fold_level(mut level: Vec<Digest>) -> Digest {
    debug_assert!(level.len().is_power_of_two());
    while level.len() > 1 {
        level = level
            .chunks_exact(2)
            .map(|pair| hash_pair(&pair[0], &pair[1]))
            .collect();
    }
    level[0]
}

/// Accepts iff `update.level` has `2^depth_u` entries folding to `root`.
pub fn verify_update(update: &ReceiptUpdate, root: &Digest, params: &TreeParams) -> Result<bool, ReceiptError> {
    let expected = 1usize << params.depth_u;
    if update.level.len() != expected {
        return Err(ReceiptError::WrongLength {
            expected,
            got: update.level.len(),
        });
    }
    Ok(update.fold_root() == *root)
}

/// Completes a partial receipt using a published update that folds to `trusted_root`.
pub fn finalize_receipt(
    partial: &Receipt,
    update: &ReceiptUpdate,
    trusted_root: &Digest,
    params: &TreeParams,
) -> Result<Receipt, ReceiptError> {
    let size_ts = params.size_ts;
    let depth_u = params.depth_u;
    if partial.partial_depth != depth_u {
        return Err(ReceiptError::Malformed("receipt is not partial at depth_u"));
    }
    if partial.epoch != update.epoch {
        return Err(ReceiptError::EpochMismatch {
            receipt: partial.epoch,
            update: update.epoch,
        });
    }
    if !verify_update(update, trusted_root, params)? {
        return Err(ReceiptError::UpdateInconsistent);
    }
    let empty = EmptyHashTable::new(size_ts);
    let branch = partial.fold(size_ts, &empty)?;
    let mut index = (partial.ts.0 >> (size_ts - depth_u)) as usize;
    if update.level[index] != branch {
        return Err(ReceiptError::UpdateInconsistent);
    }

    let mut full = partial.clone();
    full.partial_depth = 0;
    let mut level = update.level.clone();
    for depth in (1..=depth_u).rev() {
        let sibling = level[index ^ 1];
        if sibling != *empty.get(depth) {
            full.poi.push(sibling);
            full.bitmap |= 1 << (size_ts - depth);
        }
        level = level
            .chunks_exact(2)
            .map(|pair| hash_pair(&pair[0], &pair[1]))
            .collect();
        index >>= 1;
    }
    Ok(full)
}
