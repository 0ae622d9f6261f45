//! Insert, receipt and finalize throughput of the in-memory tree.

use std::fmt;
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use pits_core::{finalize_tree, Digest, EpochId, PitsTree, TimestampOffset, TreeParams, DIGEST_LEN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub params: TreeParams,
    pub logs: usize,
    pub threads: usize,
    /// Inserts per second summed over all threads; each thread fills its own tree.
    pub inserts_per_sec: f64,
    pub receipts_per_sec: f64,
    pub finalize_ms: f64,
    pub nodes: usize,
    pub leaves: usize,
    pub branches: usize,
    pub memory_full_bytes: usize,
    pub memory_leaves_only_bytes: usize,
    pub parity_body_bytes: usize,
}

fn workload(params: &TreeParams, n: usize, seed: u64) -> Vec<(TimestampOffset, Digest)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut b = [0u8; DIGEST_LEN];
            rng.fill(&mut b);
            (
                TimestampOffset(rng.random_range(0..params.leaf_count())),
                Digest::from_bytes(b),
            )
        })
        .collect()
}

fn fill(params: TreeParams, logs: &[(TimestampOffset, Digest)]) -> PitsTree {
    let mut tree = PitsTree::new(params, EpochId(0));
    for (ts, d) in logs {
        tree.add_log(*ts, *d).expect("random digests are distinct");
    }
    tree
}

pub fn bench(params: TreeParams, logs: usize, threads: usize, seed: u64) -> BenchReport {
    let threads = threads.max(1);
    let loads: Vec<Arc<Vec<_>>> = (0..threads)
        .map(|t| Arc::new(workload(&params, logs, seed.wrapping_add(t as u64))))
        .collect();

    let start = Instant::now();
    let mut trees: Vec<PitsTree> = thread::scope(|s| {
        let handles: Vec<_> = loads.iter().map(|l| s.spawn(move || fill(params, l))).collect();
        handles.into_iter().map(|h| h.join().expect("bench thread")).collect()
    });
    let inserts_per_sec = (logs * threads) as f64 / start.elapsed().as_secs_f64();

    let tree = &trees[0];
    let sample = &loads[0];
    let start = Instant::now();
    for (ts, d) in sample.iter() {
        std::hint::black_box(tree.calc_receipt(d, *ts).expect("log present"));
    }
    let receipts_per_sec = sample.len() as f64 / start.elapsed().as_secs_f64();

    let nodes = tree.node_count();
    let leaves = tree.leaf_count();
    let branches = tree.branch_count();
    let memory_full_bytes = tree.memory_bytes();

    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    let tree = &mut trees[0];
    let start = Instant::now();
    let record = finalize_tree(tree, false, &mut rng).expect("fresh tree");
    let finalize_ms = start.elapsed().as_secs_f64() * 1e3;
    tree.drop_branches();

    BenchReport {
        params,
        logs,
        threads,
        inserts_per_sec,
        receipts_per_sec,
        finalize_ms,
        nodes,
        leaves,
        branches,
        memory_full_bytes,
        memory_leaves_only_bytes: tree.memory_bytes(),
        parity_body_bytes: record.body_len(&params),
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        writeln!(
            f,
            "size_ts={} depth_p={} size_p={} depth_u={}  logs={} threads={}",
            p.size_ts, p.depth_p, p.size_p, p.depth_u, self.logs, self.threads
        )?;
        writeln!(f, "  inserts/s        {:>12.0}", self.inserts_per_sec)?;
        writeln!(f, "  receipts/s       {:>12.0}", self.receipts_per_sec)?;
        writeln!(f, "  finalize         {:>12.2} ms", self.finalize_ms)?;
        writeln!(
            f,
            "  nodes            {:>12}  ({} leaves, {} branches)",
            self.nodes, self.leaves, self.branches
        )?;
        writeln!(f, "  memory full      {:>12} B", self.memory_full_bytes)?;
        writeln!(f, "  memory leaves    {:>12} B", self.memory_leaves_only_bytes)?;
        write!(f, "  parity record    {:>12} B", self.parity_body_bytes)
    }
}
