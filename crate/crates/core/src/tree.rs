//! The timestamp-addressed sparse hash tree of one (device, epoch).

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::digest::{hash_concat, hash_pair, Digest, DIGEST_LEN};
use crate::empty::EmptyHashTable;
use crate::params::{EpochId, NodeAddr, TimestampOffset, TreeParams};
use crate::receipt::{Receipt, ReceiptUpdate};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("tree is finalized")]
    Finalized,
    #[error("digest already present at timestamp {0}")]
    DuplicateDigest(TimestampOffset),
    #[error("timestamp {ts} does not fit in {size_ts} bits")]
    TimestampOutOfRange { ts: TimestampOffset, size_ts: u8 },
    #[error("depth {depth} outside 0..={size_ts}")]
    DepthOutOfRange { depth: u8, size_ts: u8 },
    #[error("no such log at timestamp {0}")]
    UnknownLog(TimestampOffset),
    #[error("branch covering timestamp {0} is still open")]
    BranchNotFinal(TimestampOffset),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Leaf {
    /// Ascending, no duplicates.
    logs: Vec<Digest>,
    digest: Digest,
}

impl Leaf {
    fn recompute(&mut self) {
        self.digest = match self.logs.as_slice() {
            [only] => *only,
            many => hash_concat(many),
        };
    }
}

/// Sparse binary hash tree whose leaves are addressed by timestamp offsets.
///
/// Only non-empty nodes are stored, keyed by `(depth, index)`. Branch nodes can
/// be dropped ([`PitsTree::drop_branches`]) and are then recomputed from the
/// leaves on demand.
#[derive(Clone, Debug)]
pub struct PitsTree {
    params: TreeParams,
    epoch: EpochId,
    empty: EmptyHashTable,
    /// `branches[y]` holds the non-empty nodes at depth `y < size_ts`.
    branches: Vec<HashMap<u64, Digest>>,
    has_branches: bool,
    leaves: BTreeMap<u64, Leaf>,
    log_count: usize,
    finalized: bool,
}

impl PitsTree {
    pub fn new(params: TreeParams, epoch: EpochId) -> Self {
        PitsTree {
            params,
            epoch,
            empty: EmptyHashTable::new(params.size_ts),
            branches: vec![HashMap::new(); params.size_ts as usize],
            has_branches: true,
            leaves: BTreeMap::new(),
            log_count: 0,
            finalized: false,
        }
    }

    pub fn from_logs(
        params: TreeParams,
        epoch: EpochId,
        logs: impl IntoIterator<Item = (TimestampOffset, Digest)>,
    ) -> Result<Self, TreeError> {
        let mut tree = PitsTree::new(params, epoch);
        for (ts, d) in logs {
            match tree.add_log(ts, d) {
                Ok(_) | Err(TreeError::DuplicateDigest(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(tree)
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn epoch(&self) -> EpochId {
        self.epoch
    }

    pub fn empty_table(&self) -> &EmptyHashTable {
        &self.empty
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn mark_finalized(&mut self) {
        self.finalized = true;
    }

    pub fn log_count(&self) -> usize {
        self.log_count
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Number of stored non-empty branch nodes (depth < `size_ts`).
    pub fn branch_count(&self) -> usize {
        self.branches.iter().map(HashMap::len).sum()
    }

    /// Non-empty nodes at every depth, leaves included.
    pub fn node_count(&self) -> usize {
        self.branch_count() + self.leaves.len()
    }

    pub fn has_branches(&self) -> bool {
        self.has_branches
    }

    /// Inserts a log digest at `ts` and updates its path. Returns the new root.
    pub fn add_log(&mut self, ts: TimestampOffset, log_digest: Digest) -> Result<Digest, TreeError> {
        if self.finalized {
            return Err(TreeError::Finalized);
        }
        self.check_ts(ts)?;
        let leaf = self.leaves.entry(ts.0).or_insert_with(|| Leaf {
            logs: Vec::with_capacity(1),
            digest: Digest::default(),
        });
        match leaf.logs.binary_search(&log_digest) {
            Ok(_) => return Err(TreeError::DuplicateDigest(ts)),
            Err(pos) => leaf.logs.insert(pos, log_digest),
        }
        leaf.recompute();
        let leaf_digest = leaf.digest;
        self.log_count += 1;
        if !self.has_branches {
            return Ok(self.root());
        }
        Ok(self.update_path(ts, leaf_digest))
    }

    fn update_path(&mut self, ts: TimestampOffset, leaf_digest: Digest) -> Digest {
        let size_ts = self.params.size_ts;
        let mut node = leaf_digest;
        let mut index = ts.0;
        for depth in (1..=size_ts).rev() {
            let sibling = self.stored(depth, index ^ 1).unwrap_or(*self.empty.get(depth));
            node = if index & 1 == 1 {
                hash_pair(&sibling, &node)
            } else {
                hash_pair(&node, &sibling)
            };
            index >>= 1;
            self.branches[depth as usize - 1].insert(index, node);
        }
        node
    }

    fn check_ts(&self, ts: TimestampOffset) -> Result<(), TreeError> {
        if ts.0 >= self.params.leaf_count() {
            return Err(TreeError::TimestampOutOfRange {
                ts,
                size_ts: self.params.size_ts,
            });
        }
        Ok(())
    }

    fn stored(&self, depth: u8, index: u64) -> Option<Digest> {
        if depth == self.params.size_ts {
            self.leaves.get(&index).map(|l| l.digest)
        } else {
            self.branches[depth as usize].get(&index).copied()
        }
    }

    /// Node `b_index^depth`, or `None` when its subtree holds no log.
    pub fn node(&self, addr: NodeAddr) -> Option<Digest> {
        if self.has_branches || addr.depth == self.params.size_ts {
            self.stored(addr.depth, addr.index)
        } else {
            self.subtree_from_leaves(addr.depth, addr.index)
        }
    }

    fn node_or_empty(&self, depth: u8, index: u64) -> Digest {
        self.node(NodeAddr { depth, index }).unwrap_or(*self.empty.get(depth))
    }

    fn subtree_from_leaves(&self, depth: u8, index: u64) -> Option<Digest> {
        let shift = self.params.size_ts - depth;
        let lo = index << shift;
        let hi = (index + 1) << shift;
        let mut range = self.leaves.range(lo..hi);
        let first = range.next()?;
        if shift == 0 {
            return Some(first.1.digest);
        }
        let left = self.subtree_from_leaves(depth + 1, index << 1);
        let right = self.subtree_from_leaves(depth + 1, (index << 1) | 1);
        let e = self.empty.get(depth + 1);
        Some(hash_pair(left.as_ref().unwrap_or(e), right.as_ref().unwrap_or(e)))
    }

    pub fn root(&self) -> Digest {
        self.node_or_empty(0, 0)
    }

    /// All `2^depth` nodes at `depth`, empty positions filled with `E[depth]`.
    pub fn level_hashes(&self, depth: u8) -> Result<Vec<Digest>, TreeError> {
        let size_ts = self.params.size_ts;
        if depth > size_ts {
            return Err(TreeError::DepthOutOfRange { depth, size_ts });
        }
        let mut level = vec![*self.empty.get(depth); 1usize << depth];
        if self.has_branches || depth == size_ts {
            if depth == size_ts {
                for (&i, leaf) in &self.leaves {
                    level[i as usize] = leaf.digest;
                }
            } else {
                for (&i, d) in &self.branches[depth as usize] {
                    level[i as usize] = *d;
                }
            }
        } else {
            for (i, d) in self.rebuild_branches_map().remove(depth as usize) {
                level[i as usize] = d;
            }
        }
        Ok(level)
    }

    fn rebuild_branches_map(&self) -> Vec<HashMap<u64, Digest>> {
        let size_ts = self.params.size_ts as usize;
        let mut branches: Vec<HashMap<u64, Digest>> = vec![HashMap::new(); size_ts];
        let mut below: Vec<(u64, Digest)> = self.leaves.iter().map(|(&i, l)| (i, l.digest)).collect();
        for depth in (0..size_ts).rev() {
            let e = *self.empty.get(depth as u8 + 1);
            let mut current = Vec::with_capacity(below.len());
            let mut i = 0;
            while i < below.len() {
                let (idx, d) = below[i];
                let parent = idx >> 1;
                let (left, right, step) = if idx & 1 == 0 {
                    match below.get(i + 1) {
                        Some(&(n, nd)) if n == idx + 1 => (d, nd, 2),
                        _ => (d, e, 1),
                    }
                } else {
                    (e, d, 1)
                };
                current.push((parent, hash_pair(&left, &right)));
                i += step;
            }
            branches[depth].extend(current.iter().copied());
            below = current;
        }
        branches
    }

    /// Keeps only the leaves; branch nodes are recomputed when needed.
    pub fn drop_branches(&mut self) {
        self.branches = vec![HashMap::new(); self.params.size_ts as usize];
        self.has_branches = false;
    }

    pub fn restore_branches(&mut self) {
        if !self.has_branches {
            self.branches = self.rebuild_branches_map();
            self.has_branches = true;
        }
    }

    /// Approximate heap footprint of the stored nodes.
    pub fn memory_bytes(&self) -> usize {
        const KEY: usize = std::mem::size_of::<u64>();
        let leaf_bytes: usize = self
            .leaves
            .values()
            .map(|l| KEY + DIGEST_LEN + l.logs.len() * DIGEST_LEN)
            .sum();
        leaf_bytes + self.branch_count() * (KEY + DIGEST_LEN)
    }

    /// Log digests stored at a leaf, ascending.
    pub fn leaf_logs(&self, ts: TimestampOffset) -> Option<&[Digest]> {
        self.leaves.get(&ts.0).map(|l| l.logs.as_slice())
    }

    /// Every `(ts, digest)` in the tree, by ascending timestamp.
    pub fn logs(&self) -> impl Iterator<Item = (TimestampOffset, Digest)> + '_ {
        self.leaves
            .iter()
            .flat_map(|(&ts, l)| l.logs.iter().map(move |d| (TimestampOffset(ts), *d)))
    }

    fn receipt_base(&self, log_digest: &Digest, ts: TimestampOffset) -> Result<Receipt, TreeError> {
        self.check_ts(ts)?;
        let leaf = self.leaves.get(&ts.0).ok_or(TreeError::UnknownLog(ts))?;
        let pos = leaf
            .logs
            .binary_search(log_digest)
            .map_err(|_| TreeError::UnknownLog(ts))?;
        let co_leaf: Vec<Digest> = leaf
            .logs
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != pos)
            .map(|(_, d)| *d)
            .collect();
        Ok(Receipt {
            epoch: self.epoch,
            ts,
            log_digest: *log_digest,
            co_leaf_position: if co_leaf.is_empty() { 0 } else { pos as u32 },
            co_leaf,
            poi: Vec::new(),
            bitmap: 0,
            partial_depth: self.params.size_ts,
        })
    }

    fn collect_siblings(&self, receipt: &mut Receipt, stop_depth: u8) {
        let size_ts = self.params.size_ts;
        let mut index = receipt.ts.0;
        for k in 0..(size_ts - stop_depth) {
            let depth = size_ts - k;
            if let Some(sibling) = self.node(NodeAddr {
                depth,
                index: index ^ 1,
            }) {
                receipt.poi.push(sibling);
                receipt.bitmap |= 1 << k;
            }
            index >>= 1;
        }
        receipt.partial_depth = stop_depth;
    }

    /// Full proof of inclusion for `log_digest` at `ts`.
    pub fn calc_receipt(&self, log_digest: &Digest, ts: TimestampOffset) -> Result<Receipt, TreeError> {
        let mut receipt = self.receipt_base(log_digest, ts)?;
        self.collect_siblings(&mut receipt, 0);
        Ok(receipt)
    }

    /// Proof of inclusion up to depth `depth_u`.
    ///
    /// `now_tick` is the current tick offset within the epoch; the branch at
    /// `depth_u` covering `ts` must have ended by then.
    pub fn partial_receipt(
        &self,
        log_digest: &Digest,
        ts: TimestampOffset,
        now_tick: u64,
    ) -> Result<Receipt, TreeError> {
        let mut receipt = self.receipt_base(log_digest, ts)?;
        let depth_u = self.params.depth_u;
        if !self.finalized {
            let branch = ts.ancestor(self.params.size_ts, depth_u).index;
            if now_tick < self.params.node_start_tick(depth_u, branch + 1) {
                return Err(TreeError::BranchNotFinal(ts));
            }
        }
        self.collect_siblings(&mut receipt, depth_u);
        Ok(receipt)
    }

    pub fn receipt_update(&self) -> ReceiptUpdate {
        ReceiptUpdate {
            epoch: self.epoch,
            level: self
                .level_hashes(self.params.depth_u)
                .expect("depth_u is within the tree"),
        }
    }
}
