//! Repeated single-log alterations against fresh parities, to measure how
//! often the per-sub-epoch check misses a change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use pits_core::{compare_parity, finalize_tree, Digest, EpochId, PitsTree, TimestampOffset, TreeParams, DIGEST_LEN};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    /// Trials where the altered sub-epoch's parity still matched.
    pub missed: u64,
    /// Untouched sub-epochs reported as mismatching, summed over all trials.
    pub false_windows: u64,
}

impl TrialStats {
    pub fn miss_rate(&self) -> f64 {
        self.missed as f64 / self.trials.max(1) as f64
    }
}

fn random_digest(rng: &mut impl Rng) -> Digest {
    let mut b = [0u8; DIGEST_LEN];
    rng.fill(&mut b);
    Digest::from_bytes(b)
}

/// Builds `trials` trees of `logs` random entries, each sealed with its own
/// secret, replaces one digest and compares the recomputed level.
pub fn alteration_trials(params: TreeParams, logs: usize, trials: u64, seed: u64) -> TrialStats {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut stats = TrialStats::default();
    for _ in 0..trials {
        let mut entries: Vec<(TimestampOffset, Digest)> = (0..logs.max(1))
            .map(|_| {
                (
                    TimestampOffset(rng.random_range(0..params.leaf_count())),
                    random_digest(&mut rng),
                )
            })
            .collect();
        let mut tree = PitsTree::from_logs(params, EpochId(0), entries.iter().copied()).expect("valid slots");
        let record = finalize_tree(&mut tree, false, &mut rng).expect("fresh tree");
        let victim = rng.random_range(0..entries.len());
        let window = entries[victim].0.ancestor(params.size_ts, params.depth_p).index as usize;
        entries[victim].1 = random_digest(&mut rng);
        let altered = PitsTree::from_logs(params, EpochId(0), entries).expect("valid slots");
        let level = altered.level_hashes(params.depth_p).expect("depth_p within tree");
        let flagged = compare_parity(&record, &level, &params).expect("level width");
        stats.trials += 1;
        if !flagged.contains(&window) {
            stats.missed += 1;
        }
        stats.false_windows += flagged.iter().filter(|&&w| w != window).count() as u64;
    }
    stats
}
