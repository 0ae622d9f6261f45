//! Plain-Rust state behind the page; everything returned is serializable.

use std::collections::BTreeSet;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use pits_core::{
    compare_parity, finalize_tree, hash, hash_pair, verify_receipt, Digest, EmptyHashTable, EpochId, ParityRecord,
    PitsTree, TimestampOffset, TreeParams,
};

#[derive(Debug, PartialEq, Eq)]
pub enum DemoError {
    Sealed,
    NotSealed,
    NoSuchLog(usize),
    TickOutOfRange(u64),
    Tree(String),
}

impl std::fmt::Display for DemoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DemoError::Sealed => f.write_str("epoch already sealed"),
            DemoError::NotSealed => f.write_str("seal the epoch first"),
            DemoError::NoSuchLog(i) => write!(f, "no log #{i}"),
            DemoError::TickOutOfRange(t) => write!(f, "tick {t} is outside the epoch"),
            DemoError::Tree(e) => f.write_str(e),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoLog {
    pub id: usize,
    /// Milliseconds into the epoch.
    pub tick: u64,
    pub text: String,
    pub slot: u64,
    pub subepoch: usize,
    #[serde(serialize_with = "hex")]
    pub digest: Digest,
    /// Edited or removed on the device after sealing.
    pub state: LogState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LogState {
    Intact,
    Modified,
    Deleted,
    Inserted,
}

fn hex<S: serde::Serializer>(d: &Digest, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&d.to_string())
}

#[derive(Debug, Serialize)]
pub struct SubepochView {
    pub index: usize,
    pub start: u64,
    pub end: u64,
    pub logs: usize,
    pub flagged: bool,
}

#[derive(Debug, Serialize)]
pub struct View {
    pub size_ts: u8,
    pub depth_p: u8,
    pub size_p: u16,
    pub epoch_ms: u64,
    pub sealed: bool,
    pub root: Option<String>,
    pub nodes: usize,
    pub subepochs: Vec<SubepochView>,
    pub logs: Vec<DemoLog>,
}

#[derive(Debug, Serialize)]
pub struct PathStep {
    pub depth: u8,
    /// The running node is the right child at this depth.
    pub is_right: bool,
    /// Sibling came from the receipt rather than the empty-subtree table.
    pub from_receipt: bool,
    pub sibling: String,
    pub result: String,
}

#[derive(Debug, Serialize)]
pub struct ReceiptView {
    pub log: usize,
    pub slot: u64,
    pub co_leaf: usize,
    pub poi_len: usize,
    pub bitmap: String,
    pub json_bytes: usize,
    pub steps: Vec<PathStep>,
    pub root: String,
    pub verified: bool,
}

#[derive(Debug, Serialize)]
pub struct AuditView {
    pub published_root: String,
    pub recomputed_root: String,
    pub root_match: bool,
    pub flagged: Vec<SubepochView>,
    /// Sub-epochs that were really touched, for comparison.
    pub touched: Vec<usize>,
}

/// One epoch of one device: the notary's sealed tree and the device's local copy.
pub struct Demo {
    params: TreeParams,
    logs: Vec<DemoLog>,
    tree: PitsTree,
    record: Option<ParityRecord>,
    flagged: BTreeSet<usize>,
    rng: ChaCha20Rng,
}

impl Demo {
    /// A one-minute epoch at millisecond resolution.
    pub fn new(depth_p: u8, size_p: u16, seed: u64) -> Self {
        let params = TreeParams {
            size_ts: 16,
            depth_p: depth_p.clamp(1, 8),
            size_p: size_p.clamp(1, 256),
            depth_u: 4,
            epoch_duration: 60,
            ticks_per_second: 1000,
            ..TreeParams::default()
        };
        Demo {
            params,
            logs: Vec::new(),
            tree: PitsTree::new(params, EpochId(0)),
            record: None,
            flagged: BTreeSet::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    fn entry(&self, id: usize, tick: u64, text: String, state: LogState) -> DemoLog {
        let slot = self.params.slot_of(tick);
        let mut bytes = text.clone().into_bytes();
        bytes.extend_from_slice(&tick.to_be_bytes());
        DemoLog {
            id,
            tick,
            text,
            slot: slot.0,
            subepoch: slot.ancestor(self.params.size_ts, self.params.depth_p).index as usize,
            digest: hash(&bytes),
            state,
        }
    }

    pub fn add_log(&mut self, text: &str, tick: u64) -> Result<usize, DemoError> {
        if self.record.is_some() {
            return Err(DemoError::Sealed);
        }
        if tick >= self.params.epoch_ticks() {
            return Err(DemoError::TickOutOfRange(tick));
        }
        let e = self.entry(self.logs.len(), tick, text.to_owned(), LogState::Intact);
        self.tree
            .add_log(TimestampOffset(e.slot), e.digest)
            .map_err(|err| DemoError::Tree(err.to_string()))?;
        self.logs.push(e);
        Ok(self.logs.len() - 1)
    }

    pub fn add_random(&mut self, n: usize) -> Result<(), DemoError> {
        const WORDS: [&str; 6] = [
            "login",
            "door opened",
            "sensor read",
            "config change",
            "reboot",
            "upload",
        ];
        for _ in 0..n {
            let tick = self.rng.next_u64() % self.params.epoch_ticks();
            let word = WORDS[(self.rng.next_u32() as usize) % WORDS.len()];
            self.add_log(&format!("{word} #{}", self.logs.len()), tick)?;
        }
        Ok(())
    }

    /// Closes the epoch: computes the root and the secret parity.
    pub fn seal(&mut self) -> Result<String, DemoError> {
        if self.record.is_some() {
            return Err(DemoError::Sealed);
        }
        let record = finalize_tree(&mut self.tree, false, &mut self.rng).map_err(|e| DemoError::Tree(e.to_string()))?;
        let root = record.root.to_string();
        self.record = Some(record);
        Ok(root)
    }

    pub fn receipt(&self, id: usize) -> Result<ReceiptView, DemoError> {
        let log = self.logs.get(id).ok_or(DemoError::NoSuchLog(id))?;
        if log.state == LogState::Inserted {
            return Err(DemoError::NoSuchLog(id));
        }
        let r = self
            .tree
            .calc_receipt(&log.digest, TimestampOffset(log.slot))
            .map_err(|e| DemoError::Tree(e.to_string()))?;
        let size_ts = self.params.size_ts;
        let empty = EmptyHashTable::new(size_ts);
        let mut node = r.leaf_digest().map_err(|e| DemoError::Tree(e.to_string()))?;
        let mut poi = r.poi.iter();
        let mut steps = Vec::with_capacity(size_ts as usize);
        for depth in (1..=size_ts).rev() {
            let k = size_ts - depth;
            let from_receipt = r.bitmap >> k & 1 == 1;
            let sibling = if from_receipt {
                *poi.next().expect("bitmap matches poi")
            } else {
                *empty.get(depth)
            };
            let is_right = log.slot >> k & 1 == 1;
            node = if is_right {
                hash_pair(&sibling, &node)
            } else {
                hash_pair(&node, &sibling)
            };
            steps.push(PathStep {
                depth,
                is_right,
                from_receipt,
                sibling: sibling.to_string(),
                result: node.to_string(),
            });
        }
        let root = self.tree.root();
        Ok(ReceiptView {
            log: id,
            slot: log.slot,
            co_leaf: r.co_leaf.len(),
            poi_len: r.poi.len(),
            bitmap: (0..size_ts)
                .rev()
                .map(|k| if r.bitmap >> k & 1 == 1 { '1' } else { '0' })
                .collect(),
            json_bytes: serde_json::to_vec(&r).map_or(0, |v| v.len()),
            steps,
            root: root.to_string(),
            verified: verify_receipt(&r, &root, &self.params) == Ok(true),
        })
    }

    /// Edits the device's copy after the epoch was sealed.
    pub fn tamper(&mut self, id: usize, delete: bool) -> Result<(), DemoError> {
        self.record.as_ref().ok_or(DemoError::NotSealed)?;
        let log = self.logs.get(id).ok_or(DemoError::NoSuchLog(id))?.clone();
        let e = if delete {
            DemoLog {
                state: LogState::Deleted,
                ..log
            }
        } else {
            let mut e = self.entry(id, log.tick, format!("{} (edited)", log.text), LogState::Modified);
            if log.state == LogState::Inserted {
                e.state = LogState::Inserted;
            }
            e
        };
        self.logs[id] = e;
        Ok(())
    }

    pub fn insert(&mut self, text: &str, tick: u64) -> Result<usize, DemoError> {
        self.record.as_ref().ok_or(DemoError::NotSealed)?;
        if tick >= self.params.epoch_ticks() {
            return Err(DemoError::TickOutOfRange(tick));
        }
        let e = self.entry(self.logs.len(), tick, text.to_owned(), LogState::Inserted);
        self.logs.push(e);
        Ok(self.logs.len() - 1)
    }

    /// Rebuilds the tree from the device's copy and checks it against the sealed record.
    pub fn audit(&mut self) -> Result<AuditView, DemoError> {
        let record = self.record.as_ref().ok_or(DemoError::NotSealed)?;
        let snapshot = self
            .logs
            .iter()
            .filter(|l| l.state != LogState::Deleted)
            .map(|l| (TimestampOffset(l.slot), l.digest));
        let rebuilt =
            PitsTree::from_logs(self.params, EpochId(0), snapshot).map_err(|e| DemoError::Tree(e.to_string()))?;
        let level = rebuilt
            .level_hashes(self.params.depth_p)
            .map_err(|e| DemoError::Tree(e.to_string()))?;
        let flagged = compare_parity(record, &level, &self.params).map_err(|e| DemoError::Tree(e.to_string()))?;
        self.flagged = flagged.iter().copied().collect();
        let touched: BTreeSet<usize> = self
            .logs
            .iter()
            .filter(|l| l.state != LogState::Intact)
            .map(|l| l.subepoch)
            .collect();
        Ok(AuditView {
            published_root: record.root.to_string(),
            recomputed_root: rebuilt.root().to_string(),
            root_match: rebuilt.root() == record.root,
            flagged: flagged.into_iter().map(|i| self.subepoch_view(i)).collect(),
            touched: touched.into_iter().collect(),
        })
    }

    fn subepoch_view(&self, index: usize) -> SubepochView {
        let (start, end) = self.params.subepoch_window(EpochId(0), index);
        SubepochView {
            index,
            start,
            end,
            logs: self
                .logs
                .iter()
                .filter(|l| l.subepoch == index && l.state != LogState::Deleted)
                .count(),
            flagged: self.flagged.contains(&index),
        }
    }

    pub fn view(&self) -> View {
        View {
            size_ts: self.params.size_ts,
            depth_p: self.params.depth_p,
            size_p: self.params.size_p,
            epoch_ms: self.params.epoch_ticks(),
            sealed: self.record.is_some(),
            root: self.record.as_ref().map(|r| r.root.to_string()),
            nodes: self.tree.node_count(),
            subepochs: (0..self.params.subepoch_count())
                .map(|i| self.subepoch_view(i))
                .collect(),
            logs: self.logs.clone(),
        }
    }
}
