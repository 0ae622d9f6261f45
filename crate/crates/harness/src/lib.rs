//! Simulation harness: seeded adversary scenarios over a lossy link,
//! Monte-Carlo parity trials and throughput measurements.

pub mod bench;
pub mod montecarlo;
pub mod scenario;
pub mod transport;

pub use bench::{bench, BenchReport};
pub use montecarlo::{alteration_trials, TrialStats};
pub use scenario::{run_scenario, Action, Scenario, ScenarioOutcome, SCENARIOS};
pub use transport::{SimTransport, TransportFaults, TransportStats};
