mod common;

use std::sync::Arc;

use common::{dense_root, SimDevice};
use pits_core::{
    finalize_receipt, hash, verify_receipt, verify_update, Digest, EpochId, PitsTree, TimestampOffset, TreeParams,
};
use pits_notary::{
    AuditRequest, EpochRef, InconsistencyKind, InconsistencyQuery, ManualClock, Notary, NotaryConfig, NotaryError,
    ReceiptRequest, RecordStore, RetentionStage,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn setup(params: TreeParams) -> (Notary, ManualClock) {
    let clock = ManualClock::new(0);
    let mut config = NotaryConfig::new(params);
    config.grace_seconds = 2;
    (Notary::new(config, Arc::new(clock.clone())), clock)
}

fn entries(dev: &mut SimDevice, slots: impl IntoIterator<Item = u64>) -> Vec<(TimestampOffset, Digest)> {
    slots
        .into_iter()
        .map(|t| (TimestampOffset(t), dev.next_digest()))
        .collect()
}

fn inconsistencies(n: &Notary, dev: &SimDevice) -> Vec<InconsistencyKind> {
    n.get_inconsistencies(&InconsistencyQuery {
        device: dev.id.clone(),
        epoch: None,
    })
    .unwrap()
    .into_iter()
    .map(|r| r.kind)
    .collect()
}

/// Runs one honest epoch 0 with `n_logs` logs and rolls the device into epoch 1.
fn honest_epoch(n: &Notary, clock: &ManualClock, dev: &mut SimDevice, n_logs: u64) {
    dev.begin_epoch(EpochId(0));
    let e = entries(dev, (0..n_logs).map(|i| (i * 7) % 1024));
    for chunk in e.chunks(10) {
        n.submit_batch(&dev.batch(chunk)).unwrap();
    }
    clock.set(1000);
    dev.begin_epoch(EpochId(1));
    n.start_epoch(&dev.start_request()).unwrap();
}

#[test]
fn honest_device_finalizes_cleanly() {
    let p = TreeParams::small();
    let (n, clock) = setup(p);
    let mut dev = SimDevice::new("d1");
    honest_epoch(&n, &clock, &mut dev, 50);

    let logs = dev.logs_of(EpochId(0));
    let root = n
        .get_root(&EpochRef {
            device: dev.id.clone(),
            epoch: EpochId(0),
        })
        .unwrap()
        .root;
    assert_eq!(root, dense_root(p.size_ts, &logs));
    assert!(inconsistencies(&n, &dev).is_empty());

    let update = n
        .get_update(&EpochRef {
            device: dev.id.clone(),
            epoch: EpochId(0),
        })
        .unwrap();
    assert!(verify_update(&update, &root, &p).unwrap());
    for (ts, d) in &logs {
        let r = n
            .get_receipt(&ReceiptRequest {
                device: dev.id.clone(),
                epoch: EpochId(0),
                digest: *d,
                ts: *ts,
            })
            .unwrap();
        assert!(r.is_full());
        assert!(verify_receipt(&r, &root, &p).unwrap());
    }
}

#[test]
fn tampered_batch_yields_exactly_one_chain_mismatch() {
    let (n, _clock) = setup(TreeParams::small());
    let mut dev = SimDevice::new("d1");
    dev.begin_epoch(EpochId(0));
    let first = entries(&mut dev, 0..5);
    n.submit_batch(&dev.batch(&first)).unwrap();

    let second = entries(&mut dev, 10..15);
    let mut b = dev.batch(&second);
    b.entries[2].digest = hash(b"forged");
    let ack = n.submit_batch(&b).unwrap();
    assert_eq!(ack.flagged, Some(InconsistencyKind::ChainMismatch));

    let third = entries(&mut dev, 20..25);
    let ack = n.submit_batch(&dev.batch(&third)).unwrap();
    assert_eq!(ack.flagged, None);

    let recs = n
        .get_inconsistencies(&InconsistencyQuery {
            device: dev.id.clone(),
            epoch: Some(EpochId(0)),
        })
        .unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].kind, InconsistencyKind::ChainMismatch);
    assert_eq!(recs[0].batch_seq, Some(1));
    assert_eq!(recs[0].entries.len(), 5);
}

#[test]
fn interleaved_devices_match_oracle_roots() {
    let p = TreeParams::small();
    let (n, clock) = setup(p);
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let mut devices: Vec<SimDevice> = (0..10).map(|i| SimDevice::new(&format!("dev-{i}"))).collect();
    let mut queue = Vec::new();
    for (i, dev) in devices.iter_mut().enumerate() {
        dev.begin_epoch(EpochId(0));
        for _ in 0..10 {
            let e: Vec<_> = (0..100)
                .map(|_| (TimestampOffset(rng.random_range(0..1024)), dev.next_digest()))
                .collect();
            queue.push((i, dev.batch(&e)));
        }
    }
    // Shuffle across devices while keeping each device's own order.
    let mut order: Vec<usize> = queue.iter().map(|(i, _)| *i).collect();
    order.shuffle(&mut rng);
    let mut per_dev: Vec<std::collections::VecDeque<_>> = vec![Default::default(); 10];
    for (i, b) in queue {
        per_dev[i].push_back(b);
    }
    for i in order {
        let b = per_dev[i].pop_front().unwrap();
        assert!(n.submit_batch(&b).unwrap().flagged.is_none());
    }
    clock.set(1000);
    for dev in &mut devices {
        dev.begin_epoch(EpochId(1));
        n.start_epoch(&dev.start_request()).unwrap();
    }
    for dev in &devices {
        let root = n
            .get_root(&EpochRef {
                device: dev.id.clone(),
                epoch: EpochId(0),
            })
            .unwrap()
            .root;
        assert_eq!(root, dense_root(p.size_ts, &dev.logs_of(EpochId(0))));
        assert!(inconsistencies(&n, dev).is_empty());
    }
}

#[test]
fn concurrent_submissions_match_oracle_roots() {
    let p = TreeParams::small();
    let (n, clock) = setup(p);
    let n = Arc::new(n);
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let n = n.clone();
            std::thread::spawn(move || {
                let mut dev = SimDevice::new(&format!("t-{i}"));
                dev.begin_epoch(EpochId(0));
                for b in 0..20u64 {
                    let e = entries(&mut dev, (0..50).map(|k| (b * 50 + k * 13 + i) % 1024));
                    n.submit_batch(&dev.batch(&e)).unwrap();
                }
                dev
            })
        })
        .collect();
    let mut devices: Vec<SimDevice> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    clock.set(1000);
    for dev in &mut devices {
        dev.begin_epoch(EpochId(1));
        n.start_epoch(&dev.start_request()).unwrap();
        let root = n
            .get_root(&EpochRef {
                device: dev.id.clone(),
                epoch: EpochId(0),
            })
            .unwrap()
            .root;
        assert_eq!(root, dense_root(p.size_ts, &dev.logs_of(EpochId(0))));
    }
}

#[test]
fn zero_log_epoch_has_empty_root() {
    let p = TreeParams::small();
    let (n, clock) = setup(p);
    let mut dev = SimDevice::new("quiet");
    dev.begin_epoch(EpochId(0));
    n.start_epoch(&dev.start_request()).unwrap();
    clock.set(1000);
    dev.begin_epoch(EpochId(1));
    n.start_epoch(&dev.start_request()).unwrap();
    let root = n
        .get_root(&EpochRef {
            device: dev.id.clone(),
            epoch: EpochId(0),
        })
        .unwrap()
        .root;
    assert_eq!(root, dense_root(p.size_ts, &[]));
    assert!(inconsistencies(&n, &dev).is_empty());
}

#[test]
fn persisted_record_has_header_plus_body() {
    let dir = tempfile::tempdir().unwrap();
    let p = TreeParams::default();
    let clock = ManualClock::new(0);
    let n = Notary::with_store(
        NotaryConfig::new(p),
        Arc::new(clock.clone()),
        RecordStore::open(dir.path()).unwrap(),
    )
    .unwrap();
    let mut dev = SimDevice::new("dev-x");
    dev.begin_epoch(EpochId(0));
    let e = entries(&mut dev, [5, 1000, 2_000_000]);
    n.submit_batch(&dev.batch(&e)).unwrap();
    clock.set(p.epoch_ticks());
    dev.begin_epoch(EpochId(1));
    n.start_epoch(&dev.start_request()).unwrap();

    let path = dir.path().join("dev-x").join("0.pits");
    let size = std::fs::metadata(&path).unwrap().len();
    let header = 4 + 1 + 1 + 1 + 1 + 1 + 2 + 1 + 8 + 2 + "dev-x".len() as u64;
    assert_eq!(size, header + 8240);
    assert_eq!(n.persisted_bytes(&dev.id, EpochId(0)).unwrap(), size);

    // Reload: root and parity survive, the tree does not.
    drop(n);
    let n = Notary::with_store(
        NotaryConfig::new(p),
        Arc::new(clock.clone()),
        RecordStore::open(dir.path()).unwrap(),
    )
    .unwrap();
    let r = EpochRef {
        device: dev.id.clone(),
        epoch: EpochId(0),
    };
    assert_eq!(
        n.get_root(&r).unwrap().root,
        dense_root(p.size_ts, &dev.logs_of(EpochId(0)))
    );
    assert_eq!(
        n.retention_stage(&dev.id, EpochId(0)).unwrap(),
        RetentionStage::ParityOnly
    );
    let level = PitsTree::from_logs(p, EpochId(0), dev.logs_of(EpochId(0)))
        .unwrap()
        .level_hashes(p.depth_p)
        .unwrap();
    let report = n
        .audit(&AuditRequest {
            device: dev.id.clone(),
            epoch: EpochId(0),
            level,
        })
        .unwrap();
    assert!(report.root_match);
    assert!(report.mismatched_subepochs.is_empty());
}

#[test]
fn silent_device_is_truncated_after_grace() {
    let (n, clock) = setup(TreeParams::small());
    let mut dev = SimDevice::new("d1");
    dev.begin_epoch(EpochId(0));
    let e = entries(&mut dev, 0..10);
    n.submit_batch(&dev.batch(&e)).unwrap();

    clock.set(2500);
    n.tick();
    assert!(matches!(
        n.get_root(&EpochRef {
            device: dev.id.clone(),
            epoch: EpochId(0)
        }),
        Err(NotaryError::NotFinalized(_))
    ));
    clock.set(3000);
    n.tick();
    assert_eq!(inconsistencies(&n, &dev), vec![InconsistencyKind::Truncation]);
    assert!(n
        .get_root(&EpochRef {
            device: dev.id.clone(),
            epoch: EpochId(0)
        })
        .is_ok());
}

#[test]
fn truncated_final_value_is_flagged_at_boundary() {
    let (n, clock) = setup(TreeParams::small());
    let mut dev = SimDevice::new("d1");
    dev.begin_epoch(EpochId(0));
    let e = entries(&mut dev, 0..10);
    n.submit_batch(&dev.batch(&e)).unwrap();
    // Logs chained but never sent, as when an intruder drops the tail.
    let hidden = entries(&mut dev, 20..25);
    dev.batch(&hidden);
    dev.seq -= 1;
    clock.set(1000);
    dev.begin_epoch(EpochId(1));
    let ack = n.start_epoch(&dev.start_request()).unwrap();
    assert_eq!(ack.flagged, Some(InconsistencyKind::Truncation));
    assert_eq!(inconsistencies(&n, &dev), vec![InconsistencyKind::Truncation]);
}

#[test]
fn receipts_partial_then_full() {
    let p = TreeParams::small();
    let (n, clock) = setup(p);
    let mut dev = SimDevice::new("d1");
    dev.begin_epoch(EpochId(0));
    // Slot 10 is in the first depth_u branch (slots 0..128, ticks 0..125).
    let e = entries(&mut dev, [10, 700]);
    n.submit_batch(&dev.batch(&e)).unwrap();
    let req = ReceiptRequest {
        device: dev.id.clone(),
        epoch: EpochId(0),
        digest: e[0].1,
        ts: e[0].0,
    };
    clock.set(100);
    assert!(matches!(n.get_receipt(&req), Err(NotaryError::BranchNotFinal(_))));
    clock.set(125);
    let partial = n.get_receipt(&req).unwrap();
    assert!(!partial.is_full());
    assert_eq!(partial.partial_depth, p.depth_u);

    clock.set(1000);
    dev.begin_epoch(EpochId(1));
    n.start_epoch(&dev.start_request()).unwrap();
    let r = EpochRef {
        device: dev.id.clone(),
        epoch: EpochId(0),
    };
    let root = n.get_root(&r).unwrap().root;
    let update = n.get_update(&r).unwrap();
    assert_eq!(update.to_bytes().len(), 32 << p.depth_u);
    let full = finalize_receipt(&partial, &update, &root, &p).unwrap();
    assert_eq!(full, n.get_receipt(&req).unwrap());
    assert!(verify_receipt(&full, &root, &p).unwrap());

    let unknown = ReceiptRequest {
        digest: hash(b"never logged"),
        ..req
    };
    assert!(matches!(n.get_receipt(&unknown), Err(NotaryError::UnknownLog(_))));
}

#[test]
fn retention_stages_progress_and_shrink_storage() {
    let p = TreeParams::small();
    let mut sizes = Vec::new();
    for n_logs in [5u64, 500] {
        let (n, clock) = setup(p);
        let mut dev = SimDevice::new("d1");
        honest_epoch(&n, &clock, &mut dev, n_logs);
        let logs = dev.logs_of(EpochId(0));
        let r = ReceiptRequest {
            device: dev.id.clone(),
            epoch: EpochId(0),
            digest: logs[0].1,
            ts: logs[0].0,
        };
        let full = n.get_receipt(&r).unwrap();
        let level = PitsTree::from_logs(p, EpochId(0), logs.clone())
            .unwrap()
            .level_hashes(p.depth_p)
            .unwrap();
        let audit = AuditRequest {
            device: dev.id.clone(),
            epoch: EpochId(0),
            level,
        };

        let leaves = n
            .advance_retention(&dev.id, EpochId(0), RetentionStage::LeavesOnly)
            .unwrap();
        assert_eq!(n.get_receipt(&r).unwrap(), full);
        let parity = n
            .advance_retention(&dev.id, EpochId(0), RetentionStage::ParityOnly)
            .unwrap();
        assert_eq!(leaves, parity);
        assert!(matches!(n.get_receipt(&r), Err(NotaryError::TreePruned(_))));
        assert!(n.audit(&audit).unwrap().mismatched_subepochs.is_empty());
        assert_eq!(n.tree_memory(&dev.id, EpochId(0)).unwrap(), None);

        assert!(matches!(
            n.advance_retention(&dev.id, EpochId(0), RetentionStage::LeavesOnly),
            Err(NotaryError::InvalidTransition { .. })
        ));
        let roots = n
            .advance_retention(&dev.id, EpochId(0), RetentionStage::RootsOnly)
            .unwrap();
        let header = 4 + 1 + 1 + 1 + 1 + 1 + 2 + 1 + 8 + 2 + 2;
        assert_eq!(roots, header + 32);
        assert!(matches!(n.audit(&audit), Err(NotaryError::ParityPruned(_))));
        assert!(n
            .get_root(&EpochRef {
                device: dev.id.clone(),
                epoch: EpochId(0)
            })
            .is_ok());
        sizes.push(parity);
    }
    assert_eq!(sizes[0], sizes[1]);
}

#[test]
fn scheduled_retention_runs_on_tick() {
    let p = TreeParams::small();
    let clock = ManualClock::new(0);
    let mut config = NotaryConfig::new(p);
    config.retention = "leaves-only=1s,parity-only=5s".parse().unwrap();
    let n = Notary::new(config, Arc::new(clock.clone()));
    let mut dev = SimDevice::new("d1");
    honest_epoch(&n, &clock, &mut dev, 10);
    clock.set(2000);
    n.tick();
    assert_eq!(
        n.retention_stage(&dev.id, EpochId(0)).unwrap(),
        RetentionStage::LeavesOnly
    );
    clock.set(7000);
    n.tick();
    assert_eq!(
        n.retention_stage(&dev.id, EpochId(0)).unwrap(),
        RetentionStage::ParityOnly
    );
}

#[test]
fn late_batches_are_rejected_and_recorded() {
    let (n, clock) = setup(TreeParams::small());
    let mut dev = SimDevice::new("d1");
    honest_epoch(&n, &clock, &mut dev, 10);
    let mut late = dev.batch(&[(TimestampOffset(3), hash(b"late"))]);
    late.epoch = EpochId(0);
    assert!(matches!(n.submit_batch(&late), Err(NotaryError::EpochFinalized(_))));
    assert_eq!(inconsistencies(&n, &dev), vec![InconsistencyKind::LateSubmission]);
    // Retrying the same message does not record it twice.
    assert!(n.submit_batch(&late).is_err());
    assert_eq!(inconsistencies(&n, &dev).len(), 1);
}

#[test]
fn sequence_numbers_order_and_deduplicate() {
    let (n, _clock) = setup(TreeParams::small());
    let mut dev = SimDevice::new("d1");
    dev.begin_epoch(EpochId(0));
    let e1 = entries(&mut dev, 0..3);
    let b1 = dev.batch(&e1);
    let e2 = entries(&mut dev, 3..6);
    let b2 = dev.batch(&e2);
    n.submit_batch(&b1).unwrap();
    let e3 = entries(&mut dev, 6..9);
    let b3 = dev.batch(&e3);
    assert_eq!(
        n.submit_batch(&b3),
        Err(NotaryError::OutOfOrder { expected: 1, got: 2 })
    );
    let ack = n.submit_batch(&b2).unwrap();
    assert!(!ack.replay);
    let again = n.submit_batch(&b2).unwrap();
    assert!(again.replay);
    assert_eq!(again.inserted, ack.inserted);
    n.submit_batch(&b3).unwrap();
    assert!(inconsistencies(&n, &dev).is_empty());
}

#[test]
fn unknown_devices_and_missing_seeds() {
    let p = TreeParams::small();
    let clock = ManualClock::new(0);
    let mut config = NotaryConfig::new(p);
    config.require_registration = true;
    let n = Notary::new(config, Arc::new(clock.clone()));
    let mut dev = SimDevice::new("d1");
    dev.begin_epoch(EpochId(0));
    let e = entries(&mut dev, 0..3);
    let b = dev.batch(&e);
    assert!(matches!(n.submit_batch(&b), Err(NotaryError::UnknownDevice(_))));

    n.register_device(dev.id.clone());
    let mut unseeded = b.clone();
    unseeded.boundary = None;
    let ack = n.submit_batch(&unseeded).unwrap();
    assert_eq!(ack.flagged, Some(InconsistencyKind::MissingBoundary));
    assert_eq!(inconsistencies(&n, &dev), vec![InconsistencyKind::MissingBoundary]);
}

#[test]
fn audit_localizes_a_rewritten_log() {
    let p = TreeParams::small();
    let (n, clock) = setup(p);
    let mut dev = SimDevice::new("d1");
    honest_epoch(&n, &clock, &mut dev, 200);
    let mut logs = dev.logs_of(EpochId(0));
    let victim = 37;
    let sub = logs[victim].0.ancestor(p.size_ts, p.depth_p).index as usize;
    logs[victim].1 = hash(b"rewritten");
    let level = PitsTree::from_logs(p, EpochId(0), logs)
        .unwrap()
        .level_hashes(p.depth_p)
        .unwrap();
    let report = n
        .audit(&AuditRequest {
            device: dev.id.clone(),
            epoch: EpochId(0),
            level: level.clone(),
        })
        .unwrap();
    assert!(!report.root_match);
    assert!(report.mismatched_subepochs.iter().all(|&i| i == sub));
    assert!(matches!(
        n.audit(&AuditRequest {
            device: dev.id.clone(),
            epoch: EpochId(0),
            level: level[..3].to_vec(),
        }),
        Err(NotaryError::WrongLength { .. })
    ));
}
