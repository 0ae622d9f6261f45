//! Fixed-length digests and the hash function `H` used throughout the tree.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Length of a SHA-256 digest in bytes.
pub const DIGEST_LEN: usize = 32;

/// Identifier of the hash function, stored as one byte in persisted records.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashId {
    #[default]
    Sha256,
}

impl HashId {
    pub const fn code(self) -> u8 {
        match self {
            HashId::Sha256 => 1,
        }
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(HashId::Sha256),
            _ => None,
        }
    }

    pub const fn digest_len(self) -> usize {
        match self {
            HashId::Sha256 => DIGEST_LEN,
        }
    }

    pub const fn digest_bits(self) -> usize {
        self.digest_len() * 8
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DigestParseError {
    #[error("digest must be {DIGEST_LEN} bytes, got {0}")]
    Length(usize),
    #[error("invalid hex: {0}")]
    Hex(#[from] hex::FromHexError),
}

/// A SHA-256 output.
///
/// Ordering is byte-wise, which is the order co-leaf digests are sorted in.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    pub const fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, DigestParseError> {
        let arr: [u8; DIGEST_LEN] = bytes.try_into().map_err(|_| DigestParseError::Length(bytes.len()))?;
        Ok(Digest(arr))
    }

    pub const fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Bit `pos` of the digest, numbered MSB-first: byte `pos / 8`, bit `7 - pos % 8`.
    pub fn bit(&self, pos: usize) -> bool {
        (self.0[pos / 8] >> (7 - pos % 8)) & 1 == 1
    }

    pub fn flip_bit(&mut self, pos: usize) {
        self.0[pos / 8] ^= 1 << (7 - pos % 8);
    }
}

impl From<[u8; DIGEST_LEN]> for Digest {
    fn from(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl FromStr for Digest {
    type Err = DigestParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s)?;
        Digest::from_slice(&bytes)
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}…)", &self.to_hex()[..12])
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `H(data)`.
pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// `H(left ‖ right)`.
pub fn hash_pair(left: &Digest, right: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update(left.0);
    h.update(right.0);
    Digest(h.finalize().into())
}

/// `H(d_0 ‖ d_1 ‖ … ‖ d_n)`.
pub fn hash_concat<'a>(parts: impl IntoIterator<Item = &'a Digest>) -> Digest {
    let mut h = Sha256::new();
    for d in parts {
        h.update(d.0);
    }
    Digest(h.finalize().into())
}
