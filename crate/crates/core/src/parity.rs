//! Secret-indexed parity over the sub-epoch nodes.
//!
//! At epoch close the notary draws `size_p` distinct digest bit positions (the
//! secret) and keeps, for every node at depth `depth_p`, the bits found at those
//! positions. Recomputing the parity over an altered log set and comparing word
//! by word points at the sub-epochs that changed, while an adversary without the
//! secret matches a word only by chance (`2^-size_p`).

use bitvec::prelude::*;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::digest::{Digest, DIGEST_LEN};
use crate::params::{EpochId, TreeParams};
use crate::tree::PitsTree;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParityError {
    #[error("size_p {size_p} exceeds the {digest_bits} bits of a digest")]
    InvalidParams { size_p: usize, digest_bits: usize },
    #[error("expected {expected} sub-epoch digests, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("tree is already finalized")]
    AlreadyFinalized,
    #[error("record body is truncated or has trailing bytes")]
    BadBody,
}

/// Distinct digest bit positions; parity bit `j` comes from `positions[j]`.
#[derive(Clone, PartialEq, Eq)]
pub struct ParitySecret {
    positions: Vec<u16>,
}

impl std::fmt::Debug for ParitySecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ParitySecret({} positions)", self.positions.len())
    }
}

impl ParitySecret {
    pub fn from_positions(positions: Vec<u16>, digest_bits: usize) -> Result<Self, ParityError> {
        let mut seen = vec![false; digest_bits];
        for &p in &positions {
            let p = p as usize;
            if p >= digest_bits || std::mem::replace(&mut seen[p], true) {
                return Err(ParityError::InvalidParams {
                    size_p: positions.len(),
                    digest_bits,
                });
            }
        }
        Ok(ParitySecret { positions })
    }

    pub fn positions(&self) -> &[u16] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Draws `size_p` distinct positions in `[0, digest_bits)` without replacement.
pub fn gen_secret<R: RngCore + CryptoRng>(
    size_p: usize,
    digest_bits: usize,
    rng: &mut R,
) -> Result<ParitySecret, ParityError> {
    if size_p == 0 || size_p > digest_bits || digest_bits > u16::MAX as usize + 1 {
        return Err(ParityError::InvalidParams { size_p, digest_bits });
    }
    let positions = rand::seq::index::sample(rng, digest_bits, size_p)
        .into_iter()
        .map(|p| p as u16)
        .collect();
    Ok(ParitySecret { positions })
}

/// Parity words of all sub-epochs, packed back to back, MSB-first.
#[derive(Clone, PartialEq, Eq)]
pub struct ParityBits {
    size_p: usize,
    bits: BitVec<u8, Msb0>,
}

impl std::fmt::Debug for ParityBits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ParityBits({} words × {} bits)", self.len(), self.size_p)
    }
}

impl ParityBits {
    pub fn len(&self) -> usize {
        self.bits.len() / self.size_p
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn word_bits(&self) -> usize {
        self.size_p
    }

    pub fn word(&self, i: usize) -> &BitSlice<u8, Msb0> {
        &self.bits[i * self.size_p..(i + 1) * self.size_p]
    }

    /// Word `i` as lowercase hex (bits padded to whole bytes).
    pub fn word_hex(&self, i: usize) -> String {
        let bv: BitVec<u8, Msb0> = self.word(i).to_bitvec();
        hex::encode(bv.into_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits.clone().into_vec()
    }

    pub fn byte_len(&self) -> usize {
        self.bits.len().div_ceil(8)
    }

    fn from_bytes(bytes: &[u8], words: usize, size_p: usize) -> Self {
        let mut bits = BitVec::<u8, Msb0>::from_slice(bytes);
        bits.truncate(words * size_p);
        ParityBits { size_p, bits }
    }
}

fn extract_word(digest: &Digest, secret: &ParitySecret, out: &mut BitVec<u8, Msb0>) {
    let bytes = digest.as_bytes().view_bits::<Msb0>();
    for &p in secret.positions() {
        out.push(bytes[p as usize]);
    }
}

/// Word `i`, bit `j` = bit `secret.positions[j]` of `level[i]`.
pub fn extract_parity(level: &[Digest], secret: &ParitySecret) -> ParityBits {
    let mut bits = BitVec::with_capacity(level.len() * secret.len());
    for d in level {
        extract_word(d, secret, &mut bits);
    }
    ParityBits {
        size_p: secret.len(),
        bits,
    }
}

fn check_level(level: &[Digest], params: &TreeParams) -> Result<(), ParityError> {
    let expected = params.subepoch_count();
    if level.len() != expected {
        return Err(ParityError::WrongLength {
            expected,
            got: level.len(),
        });
    }
    Ok(())
}

/// Retained per-epoch state: root, parity, secret and optional occupancy map.
///
/// Not `Serialize`; [`ParityRecord::body_bytes`] is the only encoding and goes to private storage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityRecord {
    pub epoch: EpochId,
    pub root: Digest,
    pub parity: ParityBits,
    pub secret: ParitySecret,
    /// Set bit `i` = sub-epoch `i` holds logs; only those carry a parity word.
    pub occupancy: Option<BitVec<u8, Msb0>>,
}

impl ParityRecord {
    /// `root ‖ secret ‖ parity [‖ occupancy]`.
    ///
    /// Secret positions take `ceil(log2(digest_bits) / 8)` bytes each (one byte
    /// for SHA-256); parity words are packed bitwise.
    pub fn body_bytes(&self, params: &TreeParams) -> Vec<u8> {
        let pos_bytes = position_bytes(params);
        let mut out = Vec::with_capacity(self.body_len(params));
        out.extend_from_slice(self.root.as_bytes());
        for &p in self.secret.positions() {
            out.extend_from_slice(&p.to_be_bytes()[2 - pos_bytes..]);
        }
        out.extend_from_slice(&self.parity.to_bytes());
        if let Some(occ) = &self.occupancy {
            out.extend_from_slice(occ.as_raw_slice());
        }
        out
    }

    pub fn body_len(&self, params: &TreeParams) -> usize {
        DIGEST_LEN
            + self.secret.len() * position_bytes(params)
            + self.parity.byte_len()
            + self.occupancy.as_ref().map_or(0, |o| o.len().div_ceil(8))
    }

    pub fn from_body(
        epoch: EpochId,
        body: &[u8],
        params: &TreeParams,
        with_occupancy: bool,
    ) -> Result<Self, ParityError> {
        let size_p = params.size_p as usize;
        let pos_bytes = position_bytes(params);
        let subepochs = params.subepoch_count();
        let occ_len = if with_occupancy { subepochs.div_ceil(8) } else { 0 };
        let head = DIGEST_LEN + size_p * pos_bytes;
        if body.len() < head + occ_len {
            return Err(ParityError::BadBody);
        }
        let root = Digest::from_slice(&body[..DIGEST_LEN]).map_err(|_| ParityError::BadBody)?;
        let positions = body[DIGEST_LEN..head]
            .chunks_exact(pos_bytes)
            .map(|c| c.iter().fold(0u16, |acc, b| acc << 8 | *b as u16))
            .collect();
        let secret =
            ParitySecret::from_positions(positions, params.hash_id.digest_bits()).map_err(|_| ParityError::BadBody)?;
        let occupancy = with_occupancy.then(|| {
            let mut bits = BitVec::<u8, Msb0>::from_slice(&body[body.len() - occ_len..]);
            bits.truncate(subepochs);
            bits
        });
        let words = occupancy.as_ref().map_or(subepochs, |o| o.count_ones());
        let parity_bytes = &body[head..body.len() - occ_len];
        if parity_bytes.len() != (words * size_p).div_ceil(8) {
            return Err(ParityError::BadBody);
        }
        Ok(ParityRecord {
            epoch,
            root,
            parity: ParityBits::from_bytes(parity_bytes, words, size_p),
            secret,
            occupancy,
        })
    }
}

fn position_bytes(params: &TreeParams) -> usize {
    let bits = params.hash_id.digest_bits();
    let width = usize::BITS - (bits - 1).leading_zeros();
    (width as usize).div_ceil(8)
}

/// Seals the tree and computes its parity with a fresh secret.
///
/// With `omit_empty` set, sub-epochs whose node is `E[depth_p]` get no word and
/// are marked absent in the occupancy map instead.
pub fn finalize_tree<R: RngCore + CryptoRng>(
    tree: &mut PitsTree,
    omit_empty: bool,
    rng: &mut R,
) -> Result<ParityRecord, ParityError> {
    if tree.is_finalized() {
        return Err(ParityError::AlreadyFinalized);
    }
    let params = *tree.params();
    let secret = gen_secret(params.size_p as usize, params.hash_id.digest_bits(), rng)?;
    let level = tree.level_hashes(params.depth_p).expect("depth_p is within the tree");
    let (parity, occupancy) = if omit_empty {
        let empty = *tree.empty_table().get(params.depth_p);
        let occupancy: BitVec<u8, Msb0> = level.iter().map(|d| *d != empty).collect();
        let populated: Vec<Digest> = level.into_iter().filter(|d| *d != empty).collect();
        (extract_parity(&populated, &secret), Some(occupancy))
    } else {
        (extract_parity(&level, &secret), None)
    };
    tree.mark_finalized();
    Ok(ParityRecord {
        epoch: tree.epoch(),
        root: tree.root(),
        parity,
        secret,
        occupancy,
    })
}

/// Ascending indices of sub-epochs whose recomputed parity differs from `stored`.
pub fn compare_parity(
    stored: &ParityRecord,
    candidate_level: &[Digest],
    params: &TreeParams,
) -> Result<Vec<usize>, ParityError> {
    check_level(candidate_level, params)?;
    let size_p = stored.secret.len();
    let mut word = BitVec::<u8, Msb0>::with_capacity(size_p);
    let mut mismatched = Vec::new();
    match &stored.occupancy {
        None => {
            for (i, d) in candidate_level.iter().enumerate() {
                word.clear();
                extract_word(d, &stored.secret, &mut word);
                if word.as_bitslice() != stored.parity.word(i) {
                    mismatched.push(i);
                }
            }
        }
        Some(occ) => {
            let empty = crate::empty::EmptyHashTable::new(params.size_ts);
            let empty = empty.get(params.depth_p);
            let mut rank = 0;
            for (i, d) in candidate_level.iter().enumerate() {
                let was_populated = occ[i];
                let is_populated = d != empty;
                let differs = match (was_populated, is_populated) {
                    (false, false) => false,
                    (true, true) => {
                        word.clear();
                        extract_word(d, &stored.secret, &mut word);
                        word.as_bitslice() != stored.parity.word(rank)
                    }
                    _ => true,
                };
                if was_populated {
                    rank += 1;
                }
                if differs {
                    mismatched.push(i);
                }
            }
        }
    }
    Ok(mismatched)
}
