//! Brute-force reference implementations used as test oracles.
//!
//! Nothing here touches the tree code: every node of a dense `2^size_ts`-leaf
//! tree is materialized and hashed with plain SHA-256 over byte concatenations.

#![allow(dead_code)]

use sha2::{Digest as _, Sha256};

use pits_core::Digest;

fn sha(bytes: &[u8]) -> Digest {
    Digest::from_bytes(Sha256::digest(bytes).into())
}

fn sha_concat(parts: &[Digest]) -> Digest {
    let mut buf = Vec::with_capacity(parts.len() * 32);
    for p in parts {
        buf.extend_from_slice(p.as_bytes());
    }
    sha(&buf)
}

pub struct DenseTree {
    /// `levels[y][x]` = node `b_x^y`.
    pub levels: Vec<Vec<Digest>>,
    /// Whether node `b_x^y` covers at least one log.
    pub occupied: Vec<Vec<bool>>,
}

impl DenseTree {
    pub fn build(size_ts: u8, logs: &[(u64, Digest)]) -> Self {
        let n = 1usize << size_ts;
        let mut slots: Vec<Vec<Digest>> = vec![Vec::new(); n];
        for &(ts, d) in logs {
            slots[ts as usize].push(d);
        }
        let mut leaf_level = Vec::with_capacity(n);
        let mut leaf_occ = Vec::with_capacity(n);
        for mut s in slots {
            s.sort();
            s.dedup();
            leaf_occ.push(!s.is_empty());
            leaf_level.push(match s.len() {
                0 => sha(b""),
                1 => s[0],
                _ => sha_concat(&s),
            });
        }
        let mut levels = vec![leaf_level];
        let mut occupied = vec![leaf_occ];
        for _ in 0..size_ts {
            let below = levels.last().unwrap();
            let below_occ = occupied.last().unwrap();
            let next: Vec<Digest> = below.chunks(2).map(sha_concat).collect();
            let next_occ: Vec<bool> = below_occ.chunks(2).map(|c| c[0] || c[1]).collect();
            levels.push(next);
            occupied.push(next_occ);
        }
        levels.reverse();
        occupied.reverse();
        DenseTree { levels, occupied }
    }

    pub fn root(&self) -> Digest {
        self.levels[0][0]
    }

    /// Non-empty siblings along the path of `ts`, leaf-adjacent first, with
    /// their fold-step bitmap.
    pub fn path_siblings(&self, size_ts: u8, ts: u64, stop_depth: u8) -> (Vec<Digest>, u64) {
        let mut poi = Vec::new();
        let mut bitmap = 0u64;
        for k in 0..(size_ts - stop_depth) {
            let depth = (size_ts - k) as usize;
            let sib = ((ts >> k) ^ 1) as usize;
            if self.occupied[depth][sib] {
                poi.push(self.levels[depth][sib]);
                bitmap |= 1 << k;
            }
        }
        (poi, bitmap)
    }
}

/// Independent bit extraction: shift-and-mask on the raw bytes.
pub fn extract_bits(digest: &Digest, positions: &[u16]) -> Vec<bool> {
    positions
        .iter()
        .map(|&p| {
            let byte = digest.as_bytes()[(p / 8) as usize];
            (byte >> (7 - (p % 8))) & 1 == 1
        })
        .collect()
}

/// Chain fold written out step by step.
pub fn manual_chain(seed: &Digest, entries: &[Digest]) -> Digest {
    let mut cur = *seed;
    for e in entries {
        let mut buf = [0u8; 64];
        buf[..32].copy_from_slice(cur.as_bytes());
        buf[32..].copy_from_slice(e.as_bytes());
        cur = sha(&buf);
    }
    cur
}
