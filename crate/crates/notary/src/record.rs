//! On-disk layout of one (device, epoch) record.
//!
//! ```text
//! "PITS" | version u8 | hash_id u8 | size_ts u8 | depth_p u8 | depth_u u8
//!        | size_p u16 | flags u8 | epoch u64 | device_len u16 | device bytes
//! body: root ‖ secret ‖ parity [‖ occupancy]   (stages up to parity-only)
//!       root                                   (roots-only)
//! ```
//! Integers are little-endian. Flags: bit 0 = occupancy present, bits 1–2 =
//! retention stage.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use pits_core::{DeviceId, Digest, EpochId, HashId, ParityRecord, TreeParams, DIGEST_LEN};

use crate::retention::RetentionStage;

pub const MAGIC: &[u8; 4] = b"PITS";
pub const VERSION: u8 = 1;
const FLAG_OCCUPANCY: u8 = 0b001;
const STAGE_SHIFT: u8 = 1;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("not a record file")]
    BadMagic,
    #[error("unsupported record version {0}")]
    Version(u8),
    #[error("unknown hash id {0}")]
    HashId(u8),
    #[error("record truncated")]
    Truncated,
    #[error("bad record body")]
    Body,
    #[error("device id is not UTF-8")]
    DeviceId,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RecordBody {
    Parity(ParityRecord),
    RootOnly(Digest),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredRecord {
    pub device: DeviceId,
    pub epoch: EpochId,
    pub params: TreeParams,
    pub stage: RetentionStage,
    pub body: RecordBody,
}

impl StoredRecord {
    pub fn root(&self) -> Digest {
        match &self.body {
            RecordBody::Parity(r) => r.root,
            RecordBody::RootOnly(root) => *root,
        }
    }

    fn has_occupancy(&self) -> bool {
        matches!(&self.body, RecordBody::Parity(r) if r.occupancy.is_some())
    }

    pub fn header_len(&self) -> usize {
        4 + 1 + 1 + 1 + 1 + 1 + 2 + 1 + 8 + 2 + self.device.0.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(self.header_len() + DIGEST_LEN);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(p.hash_id.code());
        out.push(p.size_ts);
        out.push(p.depth_p);
        out.push(p.depth_u);
        out.extend_from_slice(&p.size_p.to_le_bytes());
        let mut flags = self.stage.code() << STAGE_SHIFT;
        if self.has_occupancy() {
            flags |= FLAG_OCCUPANCY;
        }
        out.push(flags);
        out.extend_from_slice(&self.epoch.0.to_le_bytes());
        let dev = self.device.0.as_bytes();
        out.extend_from_slice(&(dev.len() as u16).to_le_bytes());
        out.extend_from_slice(dev);
        match &self.body {
            RecordBody::Parity(r) => out.extend_from_slice(&r.body_bytes(p)),
            RecordBody::RootOnly(root) => out.extend_from_slice(root.as_bytes()),
        }
        out
    }

    /// Decodes a record; `base` supplies the epoch timing not kept in the header.
    pub fn decode(bytes: &[u8], base: &TreeParams) -> Result<Self, RecordError> {
        let mut cur = Cursor(bytes);
        if cur.take(4)? != MAGIC {
            return Err(RecordError::BadMagic);
        }
        let version = cur.u8()?;
        if version != VERSION {
            return Err(RecordError::Version(version));
        }
        let hash_code = cur.u8()?;
        let hash_id = HashId::from_code(hash_code).ok_or(RecordError::HashId(hash_code))?;
        let size_ts = cur.u8()?;
        let depth_p = cur.u8()?;
        let depth_u = cur.u8()?;
        let size_p = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
        let flags = cur.u8()?;
        let epoch = EpochId(u64::from_le_bytes(cur.take(8)?.try_into().unwrap()));
        let dev_len = u16::from_le_bytes(cur.take(2)?.try_into().unwrap()) as usize;
        let device = String::from_utf8(cur.take(dev_len)?.to_vec()).map_err(|_| RecordError::DeviceId)?;
        let stage = RetentionStage::from_code(flags >> STAGE_SHIFT).ok_or(RecordError::Body)?;
        let params = TreeParams {
            size_ts,
            depth_p,
            size_p,
            depth_u,
            hash_id,
            ..*base
        };
        let body = cur.0;
        let body = if stage == RetentionStage::RootsOnly {
            RecordBody::RootOnly(Digest::from_slice(body).map_err(|_| RecordError::Body)?)
        } else {
            let occ = flags & FLAG_OCCUPANCY != 0;
            RecordBody::Parity(ParityRecord::from_body(epoch, body, &params, occ).map_err(|_| RecordError::Body)?)
        };
        Ok(StoredRecord {
            device: DeviceId(device),
            epoch,
            params,
            stage,
            body,
        })
    }
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RecordError> {
        if self.0.len() < n {
            return Err(RecordError::Truncated);
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, RecordError> {
        Ok(self.take(1)?[0])
    }
}

/// One directory per device, one `<epoch>.pits` file per finalized epoch,
/// plus `inconsistencies.jsonl`.
#[derive(Clone, Debug)]
pub struct RecordStore {
    root: PathBuf,
}

fn sanitize(device: &DeviceId) -> String {
    device
        .0
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

impl RecordStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, RecordError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(RecordStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn device_dir(&self, device: &DeviceId) -> PathBuf {
        self.root.join(sanitize(device))
    }

    pub fn record_path(&self, device: &DeviceId, epoch: EpochId) -> PathBuf {
        self.device_dir(device).join(format!("{}.pits", epoch.0))
    }

    pub fn write(&self, record: &StoredRecord) -> Result<u64, RecordError> {
        let dir = self.device_dir(&record.device);
        fs::create_dir_all(&dir)?;
        let path = self.record_path(&record.device, record.epoch);
        let tmp = path.with_extension("pits.tmp");
        let bytes = record.encode();
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(bytes.len() as u64)
    }

    pub fn append_inconsistency(&self, device: &DeviceId, line: &str) -> Result<(), RecordError> {
        let dir = self.device_dir(device);
        fs::create_dir_all(&dir)?;
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join("inconsistencies.jsonl"))?;
        writeln!(f, "{line}")?;
        Ok(())
    }

    /// Every stored record and inconsistency line, grouped by device directory.
    pub fn load_all(&self, base: &TreeParams) -> Result<(Vec<StoredRecord>, Vec<String>), RecordError> {
        let mut records = Vec::new();
        let mut lines = Vec::new();
        for dev in fs::read_dir(&self.root)? {
            let dev = dev?.path();
            if !dev.is_dir() {
                continue;
            }
            for entry in fs::read_dir(&dev)? {
                let path = entry?.path();
                match path.extension().and_then(|e| e.to_str()) {
                    Some("pits") => records.push(StoredRecord::decode(&fs::read(&path)?, base)?),
                    Some("jsonl") => lines.extend(
                        fs::read_to_string(&path)?
                            .lines()
                            .filter(|l| !l.trim().is_empty())
                            .map(str::to_owned),
                    ),
                    _ => {}
                }
            }
        }
        Ok((records, lines))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pits_core::{finalize_tree, hash, PitsTree, TimestampOffset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sample(params: TreeParams, omit: bool) -> StoredRecord {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut t = PitsTree::new(params, EpochId(77));
        t.add_log(TimestampOffset(3), hash(b"a")).unwrap();
        StoredRecord {
            device: "dev-α".into(),
            epoch: EpochId(77),
            params,
            stage: RetentionStage::FullTree,
            body: RecordBody::Parity(finalize_tree(&mut t, omit, &mut rng).unwrap()),
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        for omit in [false, true] {
            let r = sample(TreeParams::small(), omit);
            let back = StoredRecord::decode(&r.encode(), &TreeParams::small()).unwrap();
            assert_eq!(back, r);
        }
        let mut r = sample(TreeParams::small(), false);
        r.stage = RetentionStage::RootsOnly;
        r.body = RecordBody::RootOnly(hash(b"root"));
        assert_eq!(StoredRecord::decode(&r.encode(), &TreeParams::small()).unwrap(), r);
    }

    #[test]
    fn header_layout_is_fixed() {
        let r = sample(TreeParams::default(), false);
        let bytes = r.encode();
        assert_eq!(&bytes[..4], b"PITS");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 1);
        assert_eq!(bytes[6], 22);
        assert_eq!(bytes[7], 12);
        assert_eq!(bytes[8], 10);
        assert_eq!(&bytes[9..11], &16u16.to_le_bytes());
        assert_eq!(bytes[11], 0);
        assert_eq!(&bytes[12..20], &77u64.to_le_bytes());
        let dev_len = "dev-α".len();
        assert_eq!(&bytes[20..22], &(dev_len as u16).to_le_bytes());
        assert_eq!(bytes.len(), r.header_len() + 8240);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            StoredRecord::decode(b"NOPE", &TreeParams::small()),
            Err(RecordError::BadMagic)
        ));
        let r = sample(TreeParams::small(), false);
        let bytes = r.encode();
        assert!(StoredRecord::decode(&bytes[..bytes.len() - 1], &TreeParams::small()).is_err());
        assert!(StoredRecord::decode(&bytes[..10], &TreeParams::small()).is_err());
    }
}
