//! Lossy in-process link between agents and the notary.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use pits_core::{DeviceId, LogBatch, Receipt, ReceiptUpdate, TreeParams};
use pits_notary::{
    ApiError, AuditReport, AuditRequest, BatchAck, EpochRef, InconsistencyQuery, InconsistencyRecord, Notary,
    NotaryApi, ReceiptRequest, RootResponse, StartEpochRequest,
};

/// Per-batch fault probabilities. Queries are never faulted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransportFaults {
    /// The batch never arrives.
    pub drop: f64,
    /// The batch arrives, the ack does not.
    pub ack_loss: f64,
    /// The batch is held and delivered later, after the sender has timed out.
    pub delay: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportStats {
    pub delivered: u64,
    pub dropped: u64,
    pub acks_lost: u64,
    pub delayed: u64,
    pub late_deliveries: u64,
    pub blocked: u64,
}

pub struct SimTransport {
    notary: Arc<Notary>,
    faults: TransportFaults,
    rng: Mutex<ChaCha20Rng>,
    held: Mutex<Vec<LogBatch>>,
    partitioned: Mutex<BTreeSet<DeviceId>>,
    stats: Mutex<TransportStats>,
}

impl SimTransport {
    pub fn new(notary: Arc<Notary>, faults: TransportFaults, seed: u64) -> Self {
        SimTransport {
            notary,
            faults,
            rng: Mutex::new(ChaCha20Rng::seed_from_u64(seed)),
            held: Mutex::new(Vec::new()),
            partitioned: Mutex::new(BTreeSet::new()),
            stats: Mutex::new(TransportStats::default()),
        }
    }

    pub fn notary(&self) -> &Arc<Notary> {
        &self.notary
    }

    /// Cuts a device off (or reconnects it); its batches fail until reconnected.
    pub fn set_partitioned(&self, device: &DeviceId, cut: bool) {
        let mut p = self.partitioned.lock().unwrap();
        if cut {
            p.insert(device.clone());
        } else {
            p.remove(device);
        }
    }

    pub fn is_partitioned(&self, device: &DeviceId) -> bool {
        self.partitioned.lock().unwrap().contains(device)
    }

    pub fn stats(&self) -> TransportStats {
        *self.stats.lock().unwrap()
    }

    /// Delivers held batches of reachable devices, each with probability 1/2.
    fn release_held(&self) {
        let ready: Vec<LogBatch> = {
            let mut held = self.held.lock().unwrap();
            let cut = self.partitioned.lock().unwrap();
            let mut rng = self.rng.lock().unwrap();
            let mut keep = Vec::new();
            let mut ready = Vec::new();
            for b in held.drain(..) {
                if !cut.contains(&b.device) && rng.random_bool(0.5) {
                    ready.push(b);
                } else {
                    keep.push(b);
                }
            }
            *held = keep;
            ready
        };
        for b in ready {
            let _ = Notary::submit_batch(&self.notary, &b);
            self.stats.lock().unwrap().late_deliveries += 1;
        }
    }

    /// Delivers everything still held (end of a simulation).
    pub fn drain(&self) {
        let held: Vec<LogBatch> = std::mem::take(&mut *self.held.lock().unwrap());
        for b in held {
            let _ = Notary::submit_batch(&self.notary, &b);
            self.stats.lock().unwrap().late_deliveries += 1;
        }
    }
}

impl NotaryApi for SimTransport {
    fn params(&self) -> Result<TreeParams, ApiError> {
        Ok(*Notary::params(&self.notary))
    }

    fn submit_batch(&self, batch: &LogBatch) -> Result<BatchAck, ApiError> {
        if self.partitioned.lock().unwrap().contains(&batch.device) {
            self.stats.lock().unwrap().blocked += 1;
            return Err(ApiError::Transport("partitioned".into()));
        }
        self.release_held();
        let f = self.faults;
        let roll: f64 = self.rng.lock().unwrap().random();
        if roll < f.drop {
            self.stats.lock().unwrap().dropped += 1;
            return Err(ApiError::Transport("request lost".into()));
        }
        if roll < f.drop + f.delay {
            self.held.lock().unwrap().push(batch.clone());
            self.stats.lock().unwrap().delayed += 1;
            return Err(ApiError::Transport("timed out".into()));
        }
        let res = Notary::submit_batch(&self.notary, batch);
        self.stats.lock().unwrap().delivered += 1;
        if self.rng.lock().unwrap().random_bool(f.ack_loss.clamp(0.0, 1.0)) {
            self.stats.lock().unwrap().acks_lost += 1;
            return Err(ApiError::Transport("ack lost".into()));
        }
        res.map_err(ApiError::Notary)
    }

    fn start_epoch(&self, req: &StartEpochRequest) -> Result<BatchAck, ApiError> {
        self.submit_batch(&LogBatch {
            device: req.device.clone(),
            epoch: req.epoch,
            seq: req.seq,
            entries: Vec::new(),
            chain_value: req.boundary.seed,
            boundary: Some(req.boundary),
        })
    }

    fn get_receipt(&self, req: &ReceiptRequest) -> Result<Receipt, ApiError> {
        NotaryApi::get_receipt(&*self.notary, req)
    }

    fn get_update(&self, req: &EpochRef) -> Result<ReceiptUpdate, ApiError> {
        NotaryApi::get_update(&*self.notary, req)
    }

    fn get_root(&self, req: &EpochRef) -> Result<RootResponse, ApiError> {
        NotaryApi::get_root(&*self.notary, req)
    }

    fn audit(&self, req: &AuditRequest) -> Result<AuditReport, ApiError> {
        NotaryApi::audit(&*self.notary, req)
    }

    fn get_inconsistencies(&self, req: &InconsistencyQuery) -> Result<Vec<InconsistencyRecord>, ApiError> {
        NotaryApi::get_inconsistencies(&*self.notary, req)
    }
}
