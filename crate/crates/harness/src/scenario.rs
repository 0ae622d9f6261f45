//! End-to-end runs: devices log through a lossy link, an adversary acts on
//! one of them, and the validator audits every device's first epoch.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use pits_agent::{Interactor, LogEntry, MemoryInbox, Node, NodeConfig, ReceiptStatus, ReceiptStore};
use pits_auditor::{audit_device, cross_check_receipts, Verdict};
use pits_core::{EpochId, TreeParams};
use pits_notary::{InconsistencyKind, ManualClock, Notary, NotaryConfig};

use crate::transport::{SimTransport, TransportFaults, TransportStats};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Action {
    /// Nobody interferes.
    None,
    /// After submission, rewrite the content of `count` logs.
    Modify { count: usize },
    /// After submission, delete `count` logs.
    Delete { count: usize },
    /// After submission, add `count` fabricated logs.
    Insert { count: usize },
    /// Alter a log that is still queued, before it reaches the notary.
    PreSubmissionTamper,
    /// Suppress the last `count` logs of the epoch and everything after them.
    Truncate { count: usize },
    /// Rewrite one log in each of `subepochs` populated sub-epochs.
    MultiSubepochObfuscate { subepochs: usize },
    /// Delete every log of the epoch.
    Wipe,
    /// The device loses connectivity across the epoch boundary; not an attack.
    Offline,
}

impl Action {
    pub fn is_attack(&self) -> bool {
        !matches!(self, Action::None | Action::Offline)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub devices: usize,
    /// Mean logs per device and epoch; each device draws from ±50 % of it.
    pub logs_per_epoch: usize,
    /// Epochs simulated; the first is the one attacked and audited.
    pub epochs: u64,
    pub action: Action,
    pub params: TreeParams,
    pub seed: u64,
    #[serde(default)]
    pub faults: TransportFaults,
    /// Chance that a device flushes right after logging.
    pub flush_probability: f64,
    /// Every n-th victim log is shared with an interactor (0 = none).
    pub share_every: usize,
}

pub const SCENARIOS: &[&str] = &[
    "honest",
    "modify",
    "delete",
    "insert",
    "pre-submission-tamper",
    "truncate",
    "multi-subepoch-obfuscate",
    "wipe",
    "offline",
];

impl Scenario {
    /// A built-in scenario with small parameters.
    pub fn named(name: &str, seed: u64) -> Option<Scenario> {
        let action = match name {
            "honest" => Action::None,
            "modify" => Action::Modify { count: 1 },
            "delete" => Action::Delete { count: 1 },
            "insert" => Action::Insert { count: 1 },
            "pre-submission-tamper" => Action::PreSubmissionTamper,
            "truncate" => Action::Truncate { count: 3 },
            "multi-subepoch-obfuscate" => Action::MultiSubepochObfuscate { subepochs: 8 },
            "wipe" => Action::Wipe,
            "offline" => Action::Offline,
            _ => return None,
        };
        Some(Scenario {
            name: name.to_owned(),
            devices: 3,
            logs_per_epoch: 40,
            epochs: 2,
            action,
            params: TreeParams {
                size_p: 16,
                ..TreeParams::small()
            },
            seed,
            faults: TransportFaults {
                drop: 0.05,
                ack_loss: 0.05,
                delay: 0.05,
            },
            flush_probability: 0.2,
            share_every: 5,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub seed: u64,
    pub detected: bool,
    pub expected_detected: bool,
    pub root_match: bool,
    /// Sub-epochs the validator flagged on the victim.
    pub localized_windows: Vec<usize>,
    /// Absolute tick span `[start, end)` of each flagged window.
    pub localized_spans: Vec<(u64, u64)>,
    /// Sub-epochs the adversary actually touched after submission.
    pub expected_windows: Vec<usize>,
    /// Every flagged window was touched.
    pub localization_sound: bool,
    /// Every touched window was flagged.
    pub localization_complete: bool,
    pub inconsistency_kinds: Vec<InconsistencyKind>,
    pub receipts_corroborating: usize,
    pub receipts_contradicting: usize,
    /// Detections on devices nobody touched.
    pub false_alarms: usize,
    pub transport: TransportStats,
    pub passed: bool,
}

const TARGET: EpochId = EpochId(0);

struct Sim {
    params: TreeParams,
    clock: ManualClock,
    link: SimTransport,
    nodes: Vec<Node>,
    rng: ChaCha20Rng,
    /// Devices that stopped talking to the notary for good.
    silenced: BTreeSet<usize>,
}

impl Sim {
    fn flush(&mut self, i: usize) {
        if !self.silenced.contains(&i) {
            let _ = self.nodes[i].flush_batch(&self.link);
        }
    }

    /// Retries until the queue is empty or the device is cut off.
    fn flush_until_sent(&mut self, i: usize) {
        for _ in 0..500 {
            if self.nodes[i].queue().is_empty()
                || self.silenced.contains(&i)
                || self.link.is_partitioned(self.nodes[i].device())
            {
                return;
            }
            let _ = self.nodes[i].flush_batch(&self.link);
        }
    }

    fn close_epoch(&mut self, e: u64) {
        let t = self.params.epoch_start_ticks(EpochId(e + 1));
        self.clock.set(t);
        for i in 0..self.nodes.len() {
            self.nodes[i].roll_epoch(t).expect("clock moves forward");
            self.flush_until_sent(i);
        }
    }
}

fn subepoch_of(params: &TreeParams, e: &LogEntry) -> usize {
    e.locate(params).1.ancestor(params.size_ts, params.depth_p).index as usize
}

/// Indices of the victim's logs in the audited epoch.
fn target_indices(node: &Node, params: &TreeParams) -> Vec<usize> {
    node.store()
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.locate(params).0 == TARGET)
        .map(|(i, _)| i)
        .collect()
}

fn rewrite(node: &mut Node, idx: usize, tag: &str) -> LogEntry {
    let old = node.store().entries()[idx].clone();
    let mut content = old.content.clone();
    content.extend_from_slice(tag.as_bytes());
    node.store_mut().entries_mut()[idx] = LogEntry::new(content, old.ts);
    old
}

pub fn run_scenario(s: &Scenario) -> ScenarioOutcome {
    let params = s.params;
    let mut rng = ChaCha20Rng::seed_from_u64(s.seed);
    let clock = ManualClock::new(0);
    let mut config = NotaryConfig::new(params);
    config.grace_seconds = 2 * params.epoch_duration;
    config.secret_seed = Some(rng.random());
    let grace_ticks = config.grace_seconds * params.ticks_per_second;
    let notary = Arc::new(Notary::new(config, Arc::new(clock.clone())));
    let link = SimTransport::new(notary.clone(), s.faults, rng.random());
    let nodes = (0..s.devices.max(1))
        .map(|i| Node::in_memory(NodeConfig::new(format!("dev-{i}"), params)).with_rng_seed(rng.random()))
        .collect();
    let mut sim = Sim {
        params,
        clock,
        link,
        nodes,
        rng,
        silenced: BTreeSet::new(),
    };
    let victim = 0usize;
    let victim_id = sim.nodes[victim].device().clone();
    let inbox = MemoryInbox::default();
    let epoch_ticks = params.epoch_ticks();
    let epochs = s.epochs.max(1);
    let mut expected: BTreeSet<usize> = BTreeSet::new();
    let mut truncating = false;

    for e in 0..epochs {
        let start = params.epoch_start_ticks(EpochId(e));
        let mut events: Vec<(u64, usize)> = Vec::new();
        for d in 0..sim.nodes.len() {
            let lo = s.logs_per_epoch / 2;
            let n = sim.rng.random_range(lo..=s.logs_per_epoch + lo);
            for _ in 0..n {
                events.push((start + 1 + sim.rng.random_range(0..epoch_ticks - 1), d));
            }
        }
        events.sort_unstable();
        let victim_events = events.iter().filter(|(_, d)| *d == victim).count();
        let compromise_at = (victim_events * 3 / 5).max(1);
        let mut victim_seen = 0usize;
        let mut compromised = false;

        for (k, &(t, d)) in events.iter().enumerate() {
            sim.clock.set(t);
            if s.action == Action::Offline {
                let mid0 = params.epoch_start_ticks(TARGET) + epoch_ticks / 2;
                sim.link
                    .set_partitioned(&victim_id, (mid0..mid0 + epoch_ticks).contains(&t));
            }
            let entry = sim.nodes[d]
                .log_event(format!("dev{d} epoch{e} event{k}").as_bytes(), t)
                .expect("monotone clock");
            if d == victim && e == TARGET.0 {
                victim_seen += 1;
                if s.share_every > 0 && victim_seen.is_multiple_of(s.share_every) {
                    sim.nodes[d].share_event(&entry, &inbox).expect("memory inbox");
                }
                if !compromised && victim_seen >= compromise_at && s.action.is_attack() {
                    compromised = true;
                    match s.action {
                        Action::PreSubmissionTamper => pre_submission_tamper(&mut sim, victim, t),
                        Action::Truncate { count } => {
                            truncate(&mut sim, victim, t, count);
                            truncating = true;
                        }
                        _ => {}
                    }
                }
            }
            let held_back = truncating && d == victim && e == TARGET.0;
            if !held_back && sim.rng.random_bool(s.flush_probability) {
                sim.flush(d);
            }
        }
        if truncating && e == TARGET.0 {
            strip_unsent_target(&mut sim, victim);
            // Half the time the intruder keeps the device quiet from here on,
            // so the epoch is closed by the grace timeout instead of the boundary.
            if sim.rng.random_bool(0.5) {
                sim.silenced.insert(victim);
            }
        }
        sim.close_epoch(e);
    }
    sim.link.set_partitioned(&victim_id, false);
    for i in 0..sim.nodes.len() {
        sim.flush_until_sent(i);
    }
    sim.link.drain();
    // Let every open epoch run out its grace period.
    sim.clock
        .set(params.epoch_start_ticks(EpochId(epochs)) + grace_ticks + 1);
    notary.tick();

    // Receipts are collected from the notary before the adversary's post-hoc edits.
    let mut interactor = Interactor::new(params, ReceiptStore::in_memory());
    let mut receipts = Vec::new();
    for msg in inbox.take() {
        let (dev, entry) = interactor.receive(&msg).expect("valid shared log");
        if let Ok(ReceiptStatus::Verified(r)) = interactor.obtain_receipt(&sim.link, &dev, &entry) {
            receipts.push((dev, r));
        }
    }

    post_hoc(&mut sim, victim, &s.action, &mut expected);

    let mut false_alarms = 0;
    let mut victim_result = None;
    for (i, node) in sim.nodes.iter().enumerate() {
        let snapshot = node.store().entries().to_vec();
        let Ok(result) = audit_device(&snapshot, node.device(), TARGET, &sim.link) else {
            if i != victim {
                false_alarms += 1;
            }
            continue;
        };
        if i == victim {
            victim_result = Some(cross_check_receipts(result, &snapshot, &receipts));
        } else if result.detected() {
            false_alarms += 1;
        }
    }

    let transport = sim.link.stats();
    let expected_windows: Vec<usize> = expected.into_iter().collect();
    let attack = s.action.is_attack();
    let mut out = ScenarioOutcome {
        scenario: s.name.clone(),
        seed: s.seed,
        detected: false,
        expected_detected: attack,
        root_match: false,
        localized_windows: Vec::new(),
        localized_spans: Vec::new(),
        expected_windows,
        localization_sound: false,
        localization_complete: false,
        inconsistency_kinds: Vec::new(),
        receipts_corroborating: 0,
        receipts_contradicting: 0,
        false_alarms,
        transport,
        passed: false,
    };
    let Some(r) = victim_result else {
        return out;
    };
    out.localized_windows = r.tampered_windows.iter().map(|w| w.subepoch).collect();
    out.localized_spans = r.tampered_windows.iter().map(|w| (w.start, w.end)).collect();
    out.localization_sound = out.localized_windows.iter().all(|w| out.expected_windows.contains(w));
    out.localization_complete = out.expected_windows.iter().all(|w| out.localized_windows.contains(w));
    out.inconsistency_kinds = r.chain_inconsistencies.iter().map(|c| c.kind).collect();
    out.detected = r.detected();
    out.root_match = r.root_match;
    let count = |v: Verdict| r.receipt_evidence.iter().filter(|e| e.verdict == v).count();
    out.receipts_corroborating = count(Verdict::Corroborates);
    out.receipts_contradicting = count(Verdict::Contradicts);
    let kinds_ok = match s.action {
        Action::PreSubmissionTamper => out.inconsistency_kinds.contains(&InconsistencyKind::ChainMismatch),
        Action::Truncate { .. } => out.inconsistency_kinds.contains(&InconsistencyKind::Truncation),
        Action::None | Action::Offline => out.inconsistency_kinds.is_empty(),
        _ => true,
    };
    out.passed = out.detected == attack && out.localization_sound && kinds_ok && out.false_alarms == 0;
    out
}

/// The intruder logs the incriminating event, then swaps it in the unsent
/// queue and in the local store. The chain value it cannot recompute.
fn pre_submission_tamper(sim: &mut Sim, victim: usize, t: u64) {
    let node = &mut sim.nodes[victim];
    let incriminating = node.log_event(b"intruder login", t).expect("monotone clock");
    let forged = LogEntry::new(b"routine maintenance".to_vec(), incriminating.ts);
    for seg in node.queue_mut().iter_mut() {
        for be in seg.entries.iter_mut().filter(|be| be.digest == incriminating.digest) {
            be.digest = forged.digest;
        }
    }
    for e in node
        .store_mut()
        .entries_mut()
        .iter_mut()
        .filter(|e| e.digest == incriminating.digest)
    {
        *e = forged.clone();
    }
}

/// Flushes what was logged so far, then logs `count` incriminating events
/// that the intruder will suppress together with the rest of the epoch.
fn truncate(sim: &mut Sim, victim: usize, t: u64, count: usize) {
    sim.flush_until_sent(victim);
    for i in 0..count {
        sim.nodes[victim]
            .log_event(format!("intruder action {i}").as_bytes(), t)
            .expect("monotone clock");
    }
}

/// Drops every unsent log of the audited epoch from the queue and the store.
fn strip_unsent_target(sim: &mut Sim, victim: usize) {
    let node = &mut sim.nodes[victim];
    let mut hidden = BTreeSet::new();
    node.queue_mut().retain(|seg| {
        if seg.epoch == TARGET {
            hidden.extend(seg.entries.iter().map(|e| e.digest));
            false
        } else {
            true
        }
    });
    node.store_mut().entries_mut().retain(|e| !hidden.contains(&e.digest));
}

fn post_hoc(sim: &mut Sim, victim: usize, action: &Action, expected: &mut BTreeSet<usize>) {
    let params = sim.params;
    let idx = target_indices(&sim.nodes[victim], &params);
    match *action {
        Action::Modify { count } => {
            for &i in idx.choose_multiple(&mut sim.rng, count) {
                let old = rewrite(&mut sim.nodes[victim], i, " (edited)");
                expected.insert(subepoch_of(&params, &old));
            }
        }
        Action::Delete { count } => {
            let mut chosen: Vec<usize> = idx.choose_multiple(&mut sim.rng, count).copied().collect();
            chosen.sort_unstable_by(|a, b| b.cmp(a));
            for i in chosen {
                let old = sim.nodes[victim].store_mut().entries_mut().remove(i);
                expected.insert(subepoch_of(&params, &old));
            }
        }
        Action::Insert { count } => {
            let start = params.epoch_start_ticks(TARGET);
            for k in 0..count {
                let t = start + sim.rng.random_range(0..params.epoch_ticks());
                let fake = LogEntry::new(format!("fabricated alibi {k}"), t);
                expected.insert(subepoch_of(&params, &fake));
                sim.nodes[victim].store_mut().entries_mut().push(fake);
            }
        }
        Action::MultiSubepochObfuscate { subepochs } => {
            let mut by_sub: Vec<(usize, usize)> = idx
                .iter()
                .map(|&i| (subepoch_of(&params, &sim.nodes[victim].store().entries()[i]), i))
                .collect();
            by_sub.shuffle(&mut sim.rng);
            let mut touched = BTreeSet::new();
            for (sub, i) in by_sub {
                if touched.len() >= subepochs {
                    break;
                }
                if touched.insert(sub) {
                    rewrite(&mut sim.nodes[victim], i, " (obfuscated)");
                }
            }
            expected.extend(touched);
        }
        Action::Wipe => {
            for &i in &idx {
                expected.insert(subepoch_of(&params, &sim.nodes[victim].store().entries()[i]));
            }
            sim.nodes[victim]
                .store_mut()
                .entries_mut()
                .retain(|e| e.locate(&params).0 != TARGET);
        }
        _ => {}
    }
}
