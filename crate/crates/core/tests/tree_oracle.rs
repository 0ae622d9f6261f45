mod common;

use common::DenseTree;
use pits_core::{
    finalize_receipt, hash, verify_receipt, verify_update, Digest, EpochId, HashId, NodeAddr, PitsTree, Receipt,
    TimestampOffset, TreeParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn params(size_ts: u8, depth_p: u8, depth_u: u8) -> TreeParams {
    TreeParams {
        size_ts,
        depth_p,
        size_p: 16,
        depth_u,
        epoch_duration: 1,
        ticks_per_second: 1,
        hash_id: HashId::Sha256,
    }
}

/// Five logs at timestamps 0, 1, 3, 5, 6 in a height-3 tree.
fn small_example() -> (PitsTree, Vec<(u64, Digest)>) {
    let logs: Vec<(u64, Digest)> = [0u64, 1, 3, 5, 6]
        .iter()
        .enumerate()
        .map(|(i, &ts)| (ts, hash(format!("l{i}").as_bytes())))
        .collect();
    let tree = PitsTree::from_logs(
        params(3, 2, 2),
        EpochId(0),
        logs.iter().map(|&(t, d)| (TimestampOffset(t), d)),
    )
    .unwrap();
    (tree, logs)
}

fn random_logs(rng: &mut ChaCha20Rng, size_ts: u8, n: usize) -> Vec<(u64, Digest)> {
    (0..n)
        .map(|i| {
            let ts = rng.random_range(0..1u64 << size_ts);
            (ts, hash(&(i as u64).to_le_bytes()))
        })
        .collect()
}

#[test]
fn small_example_matches_dense_oracle() {
    let (tree, logs) = small_example();
    let dense = DenseTree::build(3, &logs);
    assert_eq!(tree.root(), dense.root());
    for depth in 0..=3u8 {
        assert_eq!(tree.level_hashes(depth).unwrap(), dense.levels[depth as usize]);
    }
}

#[test]
fn small_example_quarters_are_all_populated() {
    let (tree, _) = small_example();
    let level = tree.level_hashes(2).unwrap();
    let e2 = *tree.empty_table().get(2);
    for (x, d) in level.iter().enumerate() {
        let occupied = tree.leaf_logs(TimestampOffset(2 * x as u64)).is_some()
            || tree.leaf_logs(TimestampOffset(2 * x as u64 + 1)).is_some();
        assert_eq!(*d != e2, occupied, "b_{x}^2");
    }
}

#[test]
fn receipt_for_third_log_omits_empty_neighbour() {
    let (tree, logs) = small_example();
    let (ts, l2) = logs[2];
    assert_eq!(ts, 3);
    let r = tree.calc_receipt(&l2, TimestampOffset(ts)).unwrap();
    // b_2^3 is empty → bit 0 clear; b_0^2 and b_1^1 included.
    assert_eq!(r.bitmap, 0b110);
    assert_eq!(
        r.poi,
        vec![
            tree.node(NodeAddr { depth: 2, index: 0 }).unwrap(),
            tree.node(NodeAddr { depth: 1, index: 1 }).unwrap(),
        ]
    );
    let dense = DenseTree::build(3, &logs);
    assert_eq!(verify_receipt(&r, &dense.root(), tree.params()), Ok(true));
}

#[test]
fn hundred_logs_level_five_matches_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(100);
    let logs = random_logs(&mut rng, 10, 100);
    let tree = PitsTree::from_logs(
        params(10, 5, 3),
        EpochId(0),
        logs.iter().map(|&(t, d)| (TimestampOffset(t), d)),
    )
    .unwrap();
    let dense = DenseTree::build(10, &logs);
    assert_eq!(tree.level_hashes(5).unwrap(), dense.levels[5]);
}

#[test]
fn thousand_log_receipts_verify_and_are_logarithmic() {
    let mut rng = ChaCha20Rng::seed_from_u64(1000);
    let p = params(22, 12, 10);
    let logs = random_logs(&mut rng, 22, 1000);
    let tree = PitsTree::from_logs(p, EpochId(0), logs.iter().map(|&(t, d)| (TimestampOffset(t), d))).unwrap();
    let root = tree.root();
    let mut total = 0usize;
    for &(ts, d) in &logs {
        let r = tree.calc_receipt(&d, TimestampOffset(ts)).unwrap();
        assert_eq!(verify_receipt(&r, &root, &p), Ok(true));
        total += r.poi.len();
    }
    let mean = total as f64 / logs.len() as f64;
    assert!((mean - 1000f64.log2()).abs() <= 2.0, "mean poi {mean}");
}

#[test]
fn receipts_match_dense_siblings() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let logs = random_logs(&mut rng, 9, 150);
    let tree = PitsTree::from_logs(
        params(9, 4, 3),
        EpochId(0),
        logs.iter().map(|&(t, d)| (TimestampOffset(t), d)),
    )
    .unwrap();
    let dense = DenseTree::build(9, &logs);
    for &(ts, d) in &logs {
        let r = tree.calc_receipt(&d, TimestampOffset(ts)).unwrap();
        let (poi, bitmap) = dense.path_siblings(9, ts, 0);
        assert_eq!(r.poi, poi);
        assert_eq!(r.bitmap, bitmap);
    }
}

#[test]
fn partial_then_finalize_equals_full_receipt() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let p = params(22, 12, 10);
    let logs = random_logs(&mut rng, 22, 1000);
    let mut tree = PitsTree::from_logs(p, EpochId(3), logs.iter().map(|&(t, d)| (TimestampOffset(t), d))).unwrap();
    tree.mark_finalized();
    let update = tree.receipt_update();
    let root = tree.root();
    assert_eq!(verify_update(&update, &root, &p), Ok(true));
    for &(ts, d) in &logs {
        let partial = tree.partial_receipt(&d, TimestampOffset(ts), u64::MAX).unwrap();
        assert_eq!(partial.partial_depth, p.depth_u);
        let full = finalize_receipt(&partial, &update, &root, &p).unwrap();
        assert_eq!(full, tree.calc_receipt(&d, TimestampOffset(ts)).unwrap());
    }
}

#[test]
fn miniature_update_finalizes_every_leaf() {
    let (mut tree, logs) = small_example();
    tree.mark_finalized();
    let p = *tree.params();
    let update = tree.receipt_update();
    assert_eq!(update.level, tree.level_hashes(2).unwrap());
    for &(ts, d) in &logs {
        let partial = tree.partial_receipt(&d, TimestampOffset(ts), 0).unwrap();
        let full = finalize_receipt(&partial, &update, &tree.root(), &p).unwrap();
        assert_eq!(verify_receipt(&full, &tree.root(), &p), Ok(true));
    }
}

#[test]
fn update_with_single_populated_branch() {
    let p = params(6, 3, 3);
    let d = hash(b"solo");
    let mut tree = PitsTree::new(p, EpochId(0));
    tree.add_log(TimestampOffset(42), d).unwrap();
    tree.mark_finalized();
    let update = tree.receipt_update();
    let e = *tree.empty_table().get(3);
    assert_eq!(update.level.iter().filter(|x| **x != e).count(), 1);
    let partial = tree.partial_receipt(&d, TimestampOffset(42), 0).unwrap();
    let full = finalize_receipt(&partial, &update, &tree.root(), &p).unwrap();
    assert!(full.poi.is_empty());
    assert_eq!(full.bitmap, 0);
    assert_eq!(verify_receipt(&full, &tree.root(), &p), Ok(true));
}

#[test]
fn finalize_rejects_foreign_update() {
    let (mut tree, logs) = small_example();
    tree.mark_finalized();
    let p = *tree.params();
    let mut update = tree.receipt_update();
    let partial = tree.partial_receipt(&logs[0].1, TimestampOffset(0), 0).unwrap();
    update.level[0] = hash(b"evil");
    assert!(finalize_receipt(&partial, &update, &tree.root(), &p).is_err());
    let mut update = tree.receipt_update();
    update.epoch = EpochId(1);
    assert!(finalize_receipt(&partial, &update, &tree.root(), &p).is_err());
}

#[test]
fn sparsity_bound_and_growth() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let size_ts = 22u8;
    let mut prev_ratio = f64::INFINITY;
    for n in [10usize, 100, 1000, 10_000] {
        let logs = random_logs(&mut rng, size_ts, n);
        let tree = PitsTree::from_logs(
            params(size_ts, 12, 10),
            EpochId(0),
            logs.iter().map(|&(t, d)| (TimestampOffset(t), d)),
        )
        .unwrap();
        assert!(tree.node_count() <= n * size_ts as usize + 1);
        // Paths share more ancestors as the tree fills up.
        let ratio = tree.branch_count() as f64 / tree.leaf_count() as f64;
        assert!(ratio < prev_ratio, "n={n} ratio={ratio}");
        prev_ratio = ratio;
    }
}

fn mutate_receipt(r: &Receipt, which: usize, rng: &mut ChaCha20Rng) -> Receipt {
    let mut m = r.clone();
    match which % 5 {
        0 => m.log_digest.flip_bit(rng.random_range(0..256)),
        1 => m.ts.0 ^= 1 << rng.random_range(0..22),
        2 if !m.poi.is_empty() => {
            let i = rng.random_range(0..m.poi.len());
            m.poi[i].flip_bit(rng.random_range(0..256));
        }
        3 => m.bitmap ^= 1 << rng.random_range(0..22),
        _ => m.co_leaf.push(hash(b"intruder")),
    }
    m
}

#[test]
fn mutated_receipts_are_rejected() {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let p = params(22, 12, 10);
    let logs = random_logs(&mut rng, 22, 300);
    let tree = PitsTree::from_logs(p, EpochId(0), logs.iter().map(|&(t, d)| (TimestampOffset(t), d))).unwrap();
    let root = tree.root();
    for (i, &(ts, d)) in logs.iter().enumerate() {
        let r = tree.calc_receipt(&d, TimestampOffset(ts)).unwrap();
        for which in 0..5 {
            let m = mutate_receipt(&r, which + i, &mut rng);
            if m == r {
                continue;
            }
            assert_ne!(verify_receipt(&m, &root, &p), Ok(true));
        }
    }
}

fn log_set(max_ts: u64) -> impl Strategy<Value = Vec<(u64, Digest)>> {
    prop::collection::vec((0..max_ts, any::<[u8; 8]>()), 0..60)
        .prop_map(|v| v.into_iter().map(|(t, b)| (t, hash(&b))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incremental_root_equals_dense((size_ts, logs) in (1u8..=12).prop_flat_map(|s| (Just(s), log_set(1 << s)))) {
        let p = params(size_ts, 1, 1);
        let tree = PitsTree::from_logs(p, EpochId(0), logs.iter().map(|&(t, d)| (TimestampOffset(t), d))).unwrap();
        prop_assert_eq!(tree.root(), DenseTree::build(size_ts, &logs).root());
    }

    #[test]
    fn insertion_order_is_irrelevant(logs in log_set(1 << 8), seed in any::<u64>()) {
        let p = params(8, 4, 4);
        let a = PitsTree::from_logs(p, EpochId(0), logs.iter().map(|&(t, d)| (TimestampOffset(t), d))).unwrap();
        let mut shuffled = logs.clone();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let b = PitsTree::from_logs(p, EpochId(0), shuffled.iter().map(|&(t, d)| (TimestampOffset(t), d))).unwrap();
        prop_assert_eq!(a.root(), b.root());
        prop_assert_eq!(a.node_count(), b.node_count());
        for depth in 0..=8 {
            prop_assert_eq!(a.level_hashes(depth).unwrap(), b.level_hashes(depth).unwrap());
        }
    }

    #[test]
    fn shared_timestamp_any_order(k in 2usize..8, ts in 0u64..64, seed in any::<u64>()) {
        let p = params(6, 3, 3);
        let ds: Vec<Digest> = (0..k).map(|i| hash(&[i as u8, seed as u8])).collect();
        let a = PitsTree::from_logs(p, EpochId(0), ds.iter().map(|d| (TimestampOffset(ts), *d))).unwrap();
        let b = PitsTree::from_logs(p, EpochId(0), ds.iter().rev().map(|d| (TimestampOffset(ts), *d))).unwrap();
        prop_assert_eq!(a.node(NodeAddr { depth: 6, index: ts }), b.node(NodeAddr { depth: 6, index: ts }));
        for d in &ds {
            let r = a.calc_receipt(d, TimestampOffset(ts)).unwrap();
            prop_assert_eq!(r.co_leaf.len(), k - 1);
            prop_assert_eq!(verify_receipt(&r, &a.root(), &p), Ok(true));
        }
    }

    #[test]
    fn leaves_only_receipts_identical(logs in log_set(1 << 10)) {
        let p = params(10, 5, 3);
        let mut tree = PitsTree::from_logs(p, EpochId(0), logs.iter().map(|&(t, d)| (TimestampOffset(t), d))).unwrap();
        let before: Vec<_> = logs.iter().map(|&(t, d)| tree.calc_receipt(&d, TimestampOffset(t)).unwrap()).collect();
        tree.drop_branches();
        let after: Vec<_> = logs.iter().map(|&(t, d)| tree.calc_receipt(&d, TimestampOffset(t)).unwrap()).collect();
        prop_assert_eq!(before, after);
    }
}
