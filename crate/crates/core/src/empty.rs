//! Digests of all-empty subtrees.

use std::sync::OnceLock;

use crate::digest::{hash, hash_pair, Digest};
use crate::params::TreeParams;

const MAX_HEIGHT: usize = 64;

/// Empty-subtree digest by height above the leaves; independent of tree size.
fn by_height() -> &'static [Digest; MAX_HEIGHT] {
    static TABLE: OnceLock<[Digest; MAX_HEIGHT]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [Digest::default(); MAX_HEIGHT];
        t[0] = hash(b"");
        for h in 1..MAX_HEIGHT {
            t[h] = hash_pair(&t[h - 1], &t[h - 1]);
        }
        t
    })
}

/// `E[y]` for `y = 0..=size_ts`: `E[size_ts] = H("")`, `E[y] = H(E[y+1] ‖ E[y+1])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmptyHashTable {
    by_depth: Vec<Digest>,
}

impl EmptyHashTable {
    pub fn new(size_ts: u8) -> Self {
        let heights = by_height();
        let by_depth = (0..=size_ts).map(|y| heights[(size_ts - y) as usize]).collect();
        EmptyHashTable { by_depth }
    }

    pub fn get(&self, depth: u8) -> &Digest {
        &self.by_depth[depth as usize]
    }

    pub fn len(&self) -> usize {
        self.by_depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_depth.is_empty()
    }

    pub fn as_slice(&self) -> &[Digest] {
        &self.by_depth
    }
}

pub fn build_empty_hash_table(params: &TreeParams) -> EmptyHashTable {
    EmptyHashTable::new(params.size_ts)
}
