//! Wall-clock sources in native ticks since the Unix epoch.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

pub trait Clock: Send + Sync {
    fn now_ticks(&self) -> u64;
}

#[derive(Clone, Copy, Debug)]
pub struct SystemClock {
    pub ticks_per_second: u64,
}

impl Clock for SystemClock {
    fn now_ticks(&self) -> u64 {
        let d = SystemTime::now().duration_since(UNIX_EPOCH).expect("clock before 1970");
        (d.as_nanos() * self.ticks_per_second as u128 / 1_000_000_000) as u64
    }
}

/// Clock moved by hand; shared between simulated actors.
#[derive(Clone, Debug, Default)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn new(start: u64) -> Self {
        ManualClock(Arc::new(AtomicU64::new(start)))
    }

    pub fn set(&self, ticks: u64) {
        self.0.store(ticks, Ordering::SeqCst);
    }

    pub fn advance(&self, ticks: u64) -> u64 {
        self.0.fetch_add(ticks, Ordering::SeqCst) + ticks
    }
}

impl Clock for ManualClock {
    fn now_ticks(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}
