//! The log notary: per-device epoch trees, chain checks, finalization,
//! receipt service, parity audits and retention.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use rand::rngs::StdRng;
use rand::SeedableRng;
use tracing::{debug, info, warn};

use pits_core::{
    close_epoch_check, compare_parity, finalize_tree, fold_chain, fold_level, BatchEntry, Boundary, ChainError,
    DeviceId, Digest, EpochId, LogBatch, ParityRecord, PitsTree, Receipt, ReceiptUpdate, TreeError, TreeParams,
};

use crate::api::{
    ApiError, AuditReport, AuditRequest, BatchAck, EpochRef, InconsistencyKind, InconsistencyQuery,
    InconsistencyRecord, NotaryApi, NotaryError, ReceiptRequest, RootResponse, StartEpochRequest,
};
use crate::clock::Clock;
use crate::record::{RecordBody, RecordStore, StoredRecord};
use crate::retention::{RetentionSchedule, RetentionStage};

#[derive(Clone, Debug)]
pub struct NotaryConfig {
    pub params: TreeParams,
    /// Seconds after an epoch ends before it is closed without its successor's boundary.
    pub grace_seconds: u64,
    /// Store parity only for populated sub-epochs, plus an occupancy bitmap.
    pub omit_empty_parities: bool,
    pub retention: RetentionSchedule,
    /// When false, a device's first message carrying a chain seed registers it.
    pub require_registration: bool,
    /// Seeds the parity-secret generator; `None` draws from the OS. Simulations only.
    pub secret_seed: Option<u64>,
}

impl NotaryConfig {
    pub fn new(params: TreeParams) -> Self {
        NotaryConfig {
            params,
            grace_seconds: 60,
            omit_empty_parities: false,
            retention: RetentionSchedule::default(),
            require_registration: false,
            secret_seed: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CloseStatus {
    Open,
    Verified,
    Failed,
}

struct Finalized {
    at: u64,
    root: Digest,
    update: Option<ReceiptUpdate>,
    record: Option<ParityRecord>,
    stage: RetentionStage,
    persisted_bytes: u64,
}

struct EpochState {
    tree: Option<PitsTree>,
    seed: Option<Digest>,
    /// Last chain value received for this epoch.
    chain: Option<Digest>,
    missing_boundary_recorded: bool,
    close: CloseStatus,
    finalized: Option<Finalized>,
}

impl EpochState {
    fn new() -> Self {
        EpochState {
            tree: None,
            seed: None,
            chain: None,
            missing_boundary_recorded: false,
            close: CloseStatus::Open,
            finalized: None,
        }
    }
}

struct DeviceState {
    id: DeviceId,
    epochs: BTreeMap<EpochId, EpochState>,
    /// `None` until the first message fixes the sequence (or after a restart).
    next_seq: Option<u64>,
    outcomes: BTreeMap<u64, Result<BatchAck, NotaryError>>,
    inconsistencies: Vec<InconsistencyRecord>,
}

const KEPT_OUTCOMES: usize = 4096;

impl DeviceState {
    fn new(id: DeviceId) -> Self {
        DeviceState {
            id,
            epochs: BTreeMap::new(),
            next_seq: None,
            outcomes: BTreeMap::new(),
            inconsistencies: Vec::new(),
        }
    }
}

pub struct Notary {
    config: NotaryConfig,
    clock: Arc<dyn Clock>,
    devices: RwLock<HashMap<DeviceId, Arc<Mutex<DeviceState>>>>,
    store: Option<RecordStore>,
    secret_rng: Mutex<StdRng>,
}

fn secret_rng(config: &NotaryConfig) -> Mutex<StdRng> {
    Mutex::new(match config.secret_seed {
        Some(seed) => StdRng::seed_from_u64(seed),
        None => StdRng::from_os_rng(),
    })
}

fn map_tree_err(e: TreeError) -> NotaryError {
    match e {
        TreeError::UnknownLog(ts) => NotaryError::UnknownLog(ts),
        TreeError::BranchNotFinal(ts) => NotaryError::BranchNotFinal(ts),
        TreeError::TimestampOutOfRange { ts, .. } => NotaryError::UnknownLog(ts),
        other => NotaryError::MalformedBatch(other.to_string()),
    }
}

impl Notary {
    pub fn new(config: NotaryConfig, clock: Arc<dyn Clock>) -> Self {
        Notary {
            secret_rng: secret_rng(&config),
            config,
            clock,
            devices: RwLock::new(HashMap::new()),
            store: None,
        }
    }

    /// Opens a notary persisting to `store`, reloading records written earlier.
    ///
    /// Trees do not survive a restart, so reloaded epochs start at `parity-only`
    /// or later.
    pub fn with_store(config: NotaryConfig, clock: Arc<dyn Clock>, store: RecordStore) -> Result<Self, NotaryError> {
        let (records, lines) = store
            .load_all(&config.params)
            .map_err(|e| NotaryError::Storage(e.to_string()))?;
        let mut devices: HashMap<DeviceId, DeviceState> = HashMap::new();
        for rec in records {
            let dev = devices
                .entry(rec.device.clone())
                .or_insert_with(|| DeviceState::new(rec.device.clone()));
            let stage = rec.stage.max(RetentionStage::ParityOnly);
            let bytes = rec.encode().len() as u64;
            let root = rec.root();
            let record = match rec.body {
                RecordBody::Parity(r) => Some(r),
                RecordBody::RootOnly(_) => None,
            };
            let mut st = EpochState::new();
            st.close = CloseStatus::Verified;
            st.finalized = Some(Finalized {
                at: 0,
                root,
                update: None,
                record,
                stage,
                persisted_bytes: bytes,
            });
            dev.epochs.insert(rec.epoch, st);
        }
        for line in lines {
            match serde_json::from_str::<InconsistencyRecord>(&line) {
                Ok(r) => devices
                    .entry(r.device.clone())
                    .or_insert_with(|| DeviceState::new(r.device.clone()))
                    .inconsistencies
                    .push(r),
                Err(e) => warn!("skipping unreadable inconsistency record: {e}"),
            }
        }
        let devices = devices.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect();
        Ok(Notary {
            secret_rng: secret_rng(&config),
            config,
            clock,
            devices: RwLock::new(devices),
            store: Some(store),
        })
    }

    pub fn config(&self) -> &NotaryConfig {
        &self.config
    }

    pub fn params(&self) -> &TreeParams {
        &self.config.params
    }

    pub fn now(&self) -> u64 {
        self.clock.now_ticks()
    }

    pub fn register_device(&self, id: DeviceId) {
        self.devices
            .write()
            .entry(id.clone())
            .or_insert_with(|| Arc::new(Mutex::new(DeviceState::new(id))));
    }

    pub fn devices(&self) -> Vec<DeviceId> {
        let mut ids: Vec<DeviceId> = self.devices.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    fn device(&self, id: &DeviceId) -> Result<Arc<Mutex<DeviceState>>, NotaryError> {
        self.devices
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| NotaryError::UnknownDevice(id.clone()))
    }

    fn device_for_message(&self, id: &DeviceId, seeds_chain: bool) -> Result<Arc<Mutex<DeviceState>>, NotaryError> {
        if let Ok(d) = self.device(id) {
            return Ok(d);
        }
        if !seeds_chain || self.config.require_registration {
            return Err(NotaryError::UnknownDevice(id.clone()));
        }
        info!(device = %id, "registering device on first chain seed");
        self.register_device(id.clone());
        self.device(id)
    }

    fn epoch_end(&self, epoch: EpochId) -> u64 {
        self.config.params.epoch_start_ticks(EpochId(epoch.0 + 1))
    }

    fn record_inconsistency(&self, dev: &mut DeviceState, rec: InconsistencyRecord) {
        warn!(device = %rec.device, epoch = %rec.epoch, kind = ?rec.kind, "inconsistency");
        if let Some(store) = &self.store {
            let line = serde_json::to_string(&rec).expect("record serializes");
            if let Err(e) = store.append_inconsistency(&dev.id, &line) {
                warn!("failed to persist inconsistency: {e}");
            }
        }
        dev.inconsistencies.push(rec);
    }

    /// Ingests one batch: boundary first, then the chain check, then the tree.
    pub fn submit_batch(&self, batch: &LogBatch) -> Result<BatchAck, NotaryError> {
        let dev = self.device_for_message(&batch.device, batch.boundary.is_some())?;
        let mut dev = dev.lock();
        let expected = dev.next_seq.unwrap_or(batch.seq);
        if batch.seq < expected {
            return match dev.outcomes.get(&batch.seq) {
                Some(Ok(ack)) => Ok(BatchAck {
                    replay: true,
                    ..ack.clone()
                }),
                Some(Err(e)) => Err(e.clone()),
                None => Err(NotaryError::OutOfOrder {
                    expected,
                    got: batch.seq,
                }),
            };
        }
        if batch.seq > expected {
            return Err(NotaryError::OutOfOrder {
                expected,
                got: batch.seq,
            });
        }
        let outcome = self.apply_batch(&mut dev, batch);
        dev.next_seq = Some(batch.seq + 1);
        dev.outcomes.insert(batch.seq, outcome.clone());
        while dev.outcomes.len() > KEPT_OUTCOMES {
            dev.outcomes.pop_first();
        }
        outcome
    }

    pub fn start_epoch(&self, req: &StartEpochRequest) -> Result<BatchAck, NotaryError> {
        self.submit_batch(&LogBatch {
            device: req.device.clone(),
            epoch: req.epoch,
            seq: req.seq,
            entries: Vec::new(),
            chain_value: req.boundary.seed,
            boundary: Some(req.boundary),
        })
    }

    fn apply_batch(&self, dev: &mut DeviceState, batch: &LogBatch) -> Result<BatchAck, NotaryError> {
        let params = self.config.params;
        if let Some(bad) = batch.entries.iter().find(|e| e.ts.0 >= params.leaf_count()) {
            return Err(NotaryError::MalformedBatch(format!(
                "timestamp {} outside the {}-bit tree",
                bad.ts, params.size_ts
            )));
        }
        let now = self.now();
        if dev.epochs.get(&batch.epoch).is_some_and(|st| st.finalized.is_some()) {
            let rec = InconsistencyRecord {
                device: dev.id.clone(),
                epoch: batch.epoch,
                batch_seq: Some(batch.seq),
                kind: InconsistencyKind::LateSubmission,
                entries: batch.entries.clone(),
                received_chain_value: Some(batch.chain_value),
                expected_chain_value: None,
                detected_at: now,
            };
            self.record_inconsistency(dev, rec);
            return Err(NotaryError::EpochFinalized(batch.epoch));
        }

        let mut flagged = None;
        if let Some(boundary) = &batch.boundary {
            flagged = self.apply_boundary(dev, batch, boundary, now)?;
        }

        let st = dev.epochs.entry(batch.epoch).or_insert_with(EpochState::new);
        let mut chain_record = None;
        match st.chain {
            Some(known) => {
                let folded = fold_chain(&known, batch.digests());
                if folded != batch.chain_value {
                    chain_record = Some((InconsistencyKind::ChainMismatch, Some(folded)));
                }
            }
            None if !st.missing_boundary_recorded => {
                st.missing_boundary_recorded = true;
                chain_record = Some((InconsistencyKind::MissingBoundary, None));
            }
            None => {}
        }
        // Resynchronize so one bad batch does not taint every later one.
        st.chain = Some(batch.chain_value);

        let tree = st.tree.get_or_insert_with(|| PitsTree::new(params, batch.epoch));
        let mut inserted = 0;
        let mut duplicates = 0;
        for BatchEntry { ts, digest } in &batch.entries {
            match tree.add_log(*ts, *digest) {
                Ok(_) => inserted += 1,
                Err(TreeError::DuplicateDigest(_)) => duplicates += 1,
                Err(e) => return Err(map_tree_err(e)),
            }
        }
        let chain_value = batch.chain_value;

        if let Some((kind, expected)) = chain_record {
            let rec = InconsistencyRecord {
                device: dev.id.clone(),
                epoch: batch.epoch,
                batch_seq: Some(batch.seq),
                kind,
                entries: batch.entries.clone(),
                received_chain_value: Some(batch.chain_value),
                expected_chain_value: expected,
                detected_at: now,
            };
            self.record_inconsistency(dev, rec);
            flagged = Some(kind);
        }
        debug!(device = %dev.id, epoch = %batch.epoch, seq = batch.seq, inserted, duplicates, "batch applied");
        Ok(BatchAck {
            seq: batch.seq,
            epoch: batch.epoch,
            chain_value,
            inserted,
            duplicates,
            replay: false,
            flagged,
        })
    }

    fn apply_boundary(
        &self,
        dev: &mut DeviceState,
        batch: &LogBatch,
        boundary: &Boundary,
        now: u64,
    ) -> Result<Option<InconsistencyKind>, NotaryError> {
        let mut flagged = None;
        let st = dev.epochs.entry(batch.epoch).or_insert_with(EpochState::new);
        match st.seed {
            Some(seed) if seed == boundary.seed => {}
            Some(_) => {
                let rec = InconsistencyRecord {
                    device: dev.id.clone(),
                    epoch: batch.epoch,
                    batch_seq: Some(batch.seq),
                    kind: InconsistencyKind::ChainMismatch,
                    entries: Vec::new(),
                    received_chain_value: Some(boundary.seed),
                    expected_chain_value: st.seed,
                    detected_at: now,
                };
                self.record_inconsistency(dev, rec);
                flagged = Some(InconsistencyKind::ChainMismatch);
            }
            None => {
                st.seed = Some(boundary.seed);
                if st.chain.is_none() {
                    st.chain = Some(boundary.seed);
                }
            }
        }

        let Some(prev) = boundary.prev_epoch else {
            return Ok(flagged);
        };
        if prev >= batch.epoch {
            return Err(NotaryError::MalformedBatch(
                "previous epoch not before batch epoch".into(),
            ));
        }
        let claimed = boundary
            .prev_final
            .ok_or_else(|| NotaryError::MalformedBatch("prev_epoch without prev_final".into()))?;
        let expected = dev.epochs.get(&prev).and_then(|s| s.chain);
        let kind = match close_epoch_check(prev, expected.as_ref(), &claimed) {
            Ok(true) => None,
            Ok(false) => Some(InconsistencyKind::Truncation),
            Err(ChainError::MissingBoundary(_)) => Some(InconsistencyKind::MissingBoundary),
        };
        if let Some(st) = dev.epochs.get_mut(&prev) {
            st.close = if kind.is_none() {
                CloseStatus::Verified
            } else {
                CloseStatus::Failed
            };
        }
        if let Some(kind) = kind {
            let rec = InconsistencyRecord {
                device: dev.id.clone(),
                epoch: prev,
                batch_seq: Some(batch.seq),
                kind,
                entries: Vec::new(),
                received_chain_value: Some(claimed),
                expected_chain_value: expected,
                detected_at: now,
            };
            self.record_inconsistency(dev, rec);
            flagged = flagged.or(Some(kind));
        }
        let ready = dev.epochs.get(&prev).is_some_and(|s| s.finalized.is_none());
        if ready && now >= self.epoch_end(prev) {
            self.finalize_locked(dev, prev, now)?;
        }
        Ok(flagged)
    }

    /// Closes an ended epoch: parity with a fresh secret, root and receipt update published.
    pub fn finalize_epoch(&self, device: &DeviceId, epoch: EpochId) -> Result<Digest, NotaryError> {
        let dev = self.device(device)?;
        let mut dev = dev.lock();
        let st = dev.epochs.get(&epoch).ok_or(NotaryError::UnknownEpoch(epoch))?;
        if st.finalized.is_some() {
            return Err(NotaryError::AlreadyFinalized(epoch));
        }
        let now = self.now();
        if now < self.epoch_end(epoch) {
            return Err(NotaryError::EpochNotEnded(epoch));
        }
        self.finalize_locked(&mut dev, epoch, now)
    }

    fn finalize_locked(&self, dev: &mut DeviceState, epoch: EpochId, now: u64) -> Result<Digest, NotaryError> {
        let params = self.config.params;
        let omit = self.config.omit_empty_parities;
        let st = dev.epochs.get_mut(&epoch).ok_or(NotaryError::UnknownEpoch(epoch))?;
        let tree = st.tree.get_or_insert_with(|| PitsTree::new(params, epoch));
        let record = finalize_tree(tree, omit, &mut *self.secret_rng.lock())
            .map_err(|_| NotaryError::AlreadyFinalized(epoch))?;
        let update = tree.receipt_update();
        let root = record.root;
        let close = st.close;
        let chain = st.chain;
        let missing = st.seed.is_none() && !st.missing_boundary_recorded;
        if missing {
            st.missing_boundary_recorded = true;
        }

        let stored = StoredRecord {
            device: dev.id.clone(),
            epoch,
            params,
            stage: RetentionStage::FullTree,
            body: RecordBody::Parity(record.clone()),
        };
        let persisted_bytes = self.persist(&stored)?;
        let st = dev.epochs.get_mut(&epoch).expect("present");
        st.finalized = Some(Finalized {
            at: now,
            root,
            update: Some(update),
            record: Some(record),
            stage: RetentionStage::FullTree,
            persisted_bytes,
        });
        info!(device = %dev.id, %epoch, root = %root, "epoch finalized");

        if close == CloseStatus::Open {
            let rec = InconsistencyRecord {
                device: dev.id.clone(),
                epoch,
                batch_seq: None,
                kind: InconsistencyKind::Truncation,
                entries: Vec::new(),
                received_chain_value: None,
                expected_chain_value: chain,
                detected_at: now,
            };
            self.record_inconsistency(dev, rec);
        }
        if missing {
            let rec = InconsistencyRecord {
                device: dev.id.clone(),
                epoch,
                batch_seq: None,
                kind: InconsistencyKind::MissingBoundary,
                entries: Vec::new(),
                received_chain_value: None,
                expected_chain_value: None,
                detected_at: now,
            };
            self.record_inconsistency(dev, rec);
        }
        Ok(root)
    }

    fn persist(&self, record: &StoredRecord) -> Result<u64, NotaryError> {
        match &self.store {
            Some(store) => store.write(record).map_err(|e| NotaryError::Storage(e.to_string())),
            None => Ok(record.encode().len() as u64),
        }
    }

    /// Finalizes epochs past their grace window and applies the retention schedule.
    pub fn tick(&self) {
        let now = self.now();
        let grace = self.config.grace_seconds * self.config.params.ticks_per_second;
        let tps = self.config.params.ticks_per_second;
        let devices: Vec<_> = self.devices.read().values().cloned().collect();
        for dev in devices {
            let mut dev = dev.lock();
            let due: Vec<EpochId> = dev
                .epochs
                .iter()
                .filter(|(e, st)| st.finalized.is_none() && now >= self.epoch_end(**e) + grace)
                .map(|(e, _)| *e)
                .collect();
            for epoch in due {
                if let Err(e) = self.finalize_locked(&mut dev, epoch, now) {
                    warn!(device = %dev.id, %epoch, "finalization failed: {e}");
                }
            }
            let moves: Vec<(EpochId, RetentionStage)> = dev
                .epochs
                .iter()
                .filter_map(|(e, st)| {
                    let fin = st.finalized.as_ref()?;
                    let target = self.config.retention.due(now.saturating_sub(fin.at) / tps)?;
                    (target > fin.stage).then_some((*e, target))
                })
                .collect();
            for (epoch, target) in moves {
                if let Err(e) = self.advance_locked(&mut dev, epoch, target) {
                    warn!(device = %dev.id, %epoch, "retention failed: {e}");
                }
            }
        }
    }

    pub fn advance_retention(
        &self,
        device: &DeviceId,
        epoch: EpochId,
        target: RetentionStage,
    ) -> Result<u64, NotaryError> {
        let dev = self.device(device)?;
        let mut dev = dev.lock();
        self.advance_locked(&mut dev, epoch, target)
    }

    fn advance_locked(
        &self,
        dev: &mut DeviceState,
        epoch: EpochId,
        target: RetentionStage,
    ) -> Result<u64, NotaryError> {
        let params = self.config.params;
        let device = dev.id.clone();
        let st = dev.epochs.get_mut(&epoch).ok_or(NotaryError::UnknownEpoch(epoch))?;
        let fin = st.finalized.as_mut().ok_or(NotaryError::NotFinalized(epoch))?;
        if target <= fin.stage {
            return Err(NotaryError::InvalidTransition {
                from: fin.stage,
                to: target,
            });
        }
        match target {
            RetentionStage::FullTree => unreachable!("initial stage"),
            RetentionStage::LeavesOnly => {
                if let Some(tree) = st.tree.as_mut() {
                    tree.drop_branches();
                }
            }
            RetentionStage::ParityOnly => st.tree = None,
            RetentionStage::RootsOnly => {
                st.tree = None;
                fin.record = None;
                fin.update = None;
            }
        }
        fin.stage = target;
        let body = match &fin.record {
            Some(r) => RecordBody::Parity(r.clone()),
            None => RecordBody::RootOnly(fin.root),
        };
        let stored = StoredRecord {
            device,
            epoch,
            params,
            stage: target,
            body,
        };
        let bytes = match &self.store {
            Some(store) => store.write(&stored).map_err(|e| NotaryError::Storage(e.to_string()))?,
            None => stored.encode().len() as u64,
        };
        let fin = st.finalized.as_mut().expect("finalized");
        fin.persisted_bytes = bytes;
        Ok(bytes)
    }

    pub fn retention_stage(&self, device: &DeviceId, epoch: EpochId) -> Result<RetentionStage, NotaryError> {
        self.with_finalized(device, epoch, |_, fin| Ok(fin.stage))
    }

    /// Size of the persisted record (header + stage-dependent body).
    pub fn persisted_bytes(&self, device: &DeviceId, epoch: EpochId) -> Result<u64, NotaryError> {
        self.with_finalized(device, epoch, |_, fin| Ok(fin.persisted_bytes))
    }

    /// In-memory tree footprint, if the tree is still held.
    pub fn tree_memory(&self, device: &DeviceId, epoch: EpochId) -> Result<Option<usize>, NotaryError> {
        let dev = self.device(device)?;
        let dev = dev.lock();
        let st = dev.epochs.get(&epoch).ok_or(NotaryError::UnknownEpoch(epoch))?;
        Ok(st.tree.as_ref().map(PitsTree::memory_bytes))
    }

    fn with_finalized<T>(
        &self,
        device: &DeviceId,
        epoch: EpochId,
        f: impl FnOnce(&EpochState, &Finalized) -> Result<T, NotaryError>,
    ) -> Result<T, NotaryError> {
        let dev = self.device(device)?;
        let dev = dev.lock();
        let st = dev.epochs.get(&epoch).ok_or(NotaryError::UnknownEpoch(epoch))?;
        let fin = st.finalized.as_ref().ok_or(NotaryError::NotFinalized(epoch))?;
        f(st, fin)
    }

    /// Full receipt once the epoch is finalized, partial (up to `depth_u`) before.
    pub fn get_receipt(&self, req: &ReceiptRequest) -> Result<Receipt, NotaryError> {
        let dev = self.device(&req.device)?;
        let dev = dev.lock();
        let st = dev.epochs.get(&req.epoch).ok_or(NotaryError::UnknownEpoch(req.epoch))?;
        match &st.finalized {
            Some(fin) if !fin.stage.serves_receipts() => Err(NotaryError::TreePruned(req.epoch)),
            Some(_) => {
                let tree = st.tree.as_ref().ok_or(NotaryError::TreePruned(req.epoch))?;
                tree.calc_receipt(&req.digest, req.ts).map_err(map_tree_err)
            }
            None => {
                let tree = st.tree.as_ref().ok_or(NotaryError::UnknownLog(req.ts))?;
                let start = self.config.params.epoch_start_ticks(req.epoch);
                let now = self.now();
                if now < start {
                    return Err(NotaryError::BranchNotFinal(req.ts));
                }
                tree.partial_receipt(&req.digest, req.ts, now - start)
                    .map_err(map_tree_err)
            }
        }
    }

    pub fn get_update(&self, req: &EpochRef) -> Result<ReceiptUpdate, NotaryError> {
        self.with_finalized(&req.device, req.epoch, |_, fin| {
            fin.update.clone().ok_or(NotaryError::TreePruned(req.epoch))
        })
    }

    pub fn get_root(&self, req: &EpochRef) -> Result<RootResponse, NotaryError> {
        self.with_finalized(&req.device, req.epoch, |_, fin| {
            Ok(RootResponse {
                device: req.device.clone(),
                epoch: req.epoch,
                root: fin.root,
            })
        })
    }

    /// Recomputes the parity of a validator-supplied sub-epoch level with the
    /// stored secret and reports the sub-epochs that differ.
    pub fn audit(&self, req: &AuditRequest) -> Result<AuditReport, NotaryError> {
        let params = self.config.params;
        let dev = self.device(&req.device)?;
        let dev = dev.lock();
        let st = dev.epochs.get(&req.epoch).ok_or(NotaryError::UnknownEpoch(req.epoch))?;
        let fin = st.finalized.as_ref().ok_or(NotaryError::NotFinalized(req.epoch))?;
        let record = fin.record.as_ref().ok_or(NotaryError::ParityPruned(req.epoch))?;
        let expected = params.subepoch_count();
        if req.level.len() != expected {
            return Err(NotaryError::WrongLength {
                expected,
                got: req.level.len(),
            });
        }
        let root_match = fold_level(req.level.clone()) == fin.root;
        let mismatched_subepochs =
            compare_parity(record, &req.level, &params).map_err(|_| NotaryError::WrongLength {
                expected,
                got: req.level.len(),
            })?;
        let inconsistencies = dev
            .inconsistencies
            .iter()
            .filter(|r| r.epoch == req.epoch)
            .cloned()
            .collect();
        Ok(AuditReport {
            device: req.device.clone(),
            epoch: req.epoch,
            root_match,
            mismatched_subepochs,
            inconsistencies,
            params,
        })
    }

    pub fn get_inconsistencies(&self, q: &InconsistencyQuery) -> Result<Vec<InconsistencyRecord>, NotaryError> {
        let dev = self.device(&q.device)?;
        let dev = dev.lock();
        Ok(dev
            .inconsistencies
            .iter()
            .filter(|r| q.epoch.is_none_or(|e| r.epoch == e))
            .cloned()
            .collect())
    }

    /// Epochs known for a device with whether each is finalized.
    pub fn epochs(&self, device: &DeviceId) -> Result<Vec<(EpochId, bool)>, NotaryError> {
        let dev = self.device(device)?;
        let dev = dev.lock();
        Ok(dev.epochs.iter().map(|(e, st)| (*e, st.finalized.is_some())).collect())
    }
}

impl NotaryApi for Notary {
    fn params(&self) -> Result<TreeParams, ApiError> {
        Ok(self.config.params)
    }
    fn submit_batch(&self, batch: &LogBatch) -> Result<BatchAck, ApiError> {
        Ok(Notary::submit_batch(self, batch)?)
    }
    fn start_epoch(&self, req: &StartEpochRequest) -> Result<BatchAck, ApiError> {
        Ok(Notary::start_epoch(self, req)?)
    }
    fn get_receipt(&self, req: &ReceiptRequest) -> Result<Receipt, ApiError> {
        Ok(Notary::get_receipt(self, req)?)
    }
    fn get_update(&self, req: &EpochRef) -> Result<ReceiptUpdate, ApiError> {
        Ok(Notary::get_update(self, req)?)
    }
    fn get_root(&self, req: &EpochRef) -> Result<RootResponse, ApiError> {
        Ok(Notary::get_root(self, req)?)
    }
    fn audit(&self, req: &AuditRequest) -> Result<AuditReport, ApiError> {
        Ok(Notary::audit(self, req)?)
    }
    fn get_inconsistencies(&self, q: &InconsistencyQuery) -> Result<Vec<InconsistencyRecord>, ApiError> {
        Ok(Notary::get_inconsistencies(self, q)?)
    }
}
