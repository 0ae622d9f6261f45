//! Tree parameters, epochs and the timestamp → leaf-slot mapping.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::HashId;

/// Integer count of `epoch_duration` intervals since the Unix epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpochId(pub u64);

impl fmt::Display for EpochId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Leaf address of a log inside its epoch's tree; `size_ts` bits wide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimestampOffset(pub u64);

impl TimestampOffset {
    /// Index of the ancestor at `depth`: the top `depth` bits of the offset.
    pub fn ancestor(self, size_ts: u8, depth: u8) -> NodeAddr {
        NodeAddr {
            depth,
            index: self.0 >> (size_ts - depth),
        }
    }
}

impl fmt::Display for TimestampOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Node `b_x^y`: depth 0 is the root, depth `size_ts` the leaves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeAddr {
    pub depth: u8,
    pub index: u64,
}

impl NodeAddr {
    pub fn sibling(self) -> NodeAddr {
        NodeAddr {
            depth: self.depth,
            index: self.index ^ 1,
        }
    }

    pub fn parent(self) -> NodeAddr {
        NodeAddr {
            depth: self.depth - 1,
            index: self.index >> 1,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamsError {
    #[error("size_ts must be in 1..=63, got {0}")]
    SizeTs(u8),
    #[error("depth_p must be in 1..=size_ts, got {0}")]
    DepthP(u8),
    #[error("depth_u must be in 1..=size_ts, got {0}")]
    DepthU(u8),
    #[error("size_p must be in 1..={max}, got {got}")]
    SizeP { got: u16, max: usize },
    #[error("epoch of {ticks} ticks does not fit in 2^{size_ts} leaves")]
    EpochTooLong { ticks: u64, size_ts: u8 },
    #[error("epoch_duration and ticks_per_second must be positive")]
    ZeroDuration,
}

/// Shape of every tree a deployment builds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeParams {
    /// Tree height; bit width of leaf addresses.
    pub size_ts: u8,
    /// Depth of the sub-epoch nodes the parity is taken from.
    pub depth_p: u8,
    /// Parity bits kept per sub-epoch.
    pub size_p: u16,
    /// Depth of the published receipt update.
    pub depth_u: u8,
    /// Epoch length in seconds.
    pub epoch_duration: u64,
    /// Native log resolution (1000 = milliseconds).
    pub ticks_per_second: u64,
    #[serde(default)]
    pub hash_id: HashId,
}

impl Default for TreeParams {
    /// Hourly epochs at millisecond resolution with SHA-256.
    fn default() -> Self {
        TreeParams {
            size_ts: 22,
            depth_p: 12,
            size_p: 16,
            depth_u: 10,
            epoch_duration: 3600,
            ticks_per_second: 1000,
            hash_id: HashId::Sha256,
        }
    }
}

impl TreeParams {
    /// Small parameters suitable for fast simulations: 1 s epochs at ms resolution.
    pub fn small() -> Self {
        TreeParams {
            size_ts: 10,
            depth_p: 5,
            size_p: 4,
            depth_u: 3,
            epoch_duration: 1,
            ticks_per_second: 1000,
            hash_id: HashId::Sha256,
        }
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.size_ts == 0 || self.size_ts > 63 {
            return Err(ParamsError::SizeTs(self.size_ts));
        }
        if self.depth_p == 0 || self.depth_p > self.size_ts {
            return Err(ParamsError::DepthP(self.depth_p));
        }
        if self.depth_u == 0 || self.depth_u > self.size_ts {
            return Err(ParamsError::DepthU(self.depth_u));
        }
        let max = self.hash_id.digest_bits();
        if self.size_p == 0 || self.size_p as usize > max {
            return Err(ParamsError::SizeP { got: self.size_p, max });
        }
        if self.epoch_duration == 0 || self.ticks_per_second == 0 {
            return Err(ParamsError::ZeroDuration);
        }
        let ticks = self
            .epoch_duration
            .checked_mul(self.ticks_per_second)
            .ok_or(ParamsError::ZeroDuration)?;
        if ticks > self.leaf_count() {
            return Err(ParamsError::EpochTooLong {
                ticks,
                size_ts: self.size_ts,
            });
        }
        Ok(())
    }

    pub fn leaf_count(&self) -> u64 {
        1u64 << self.size_ts
    }

    pub fn subepoch_count(&self) -> usize {
        1usize << self.depth_p
    }

    pub fn epoch_ticks(&self) -> u64 {
        self.epoch_duration * self.ticks_per_second
    }

    /// Epoch containing an absolute tick count (ticks since the Unix epoch).
    pub fn epoch_of(&self, abs_ticks: u64) -> EpochId {
        EpochId(abs_ticks / self.epoch_ticks())
    }

    pub fn epoch_start_ticks(&self, epoch: EpochId) -> u64 {
        epoch.0 * self.epoch_ticks()
    }

    /// Maps a tick offset within the epoch onto the `2^size_ts` leaf slots.
    ///
    /// The epoch is stretched over the whole address space, so the node at
    /// depth `y` covers exactly `epoch / 2^y` of wall-clock time. The map is
    /// injective because the epoch never has more ticks than there are slots.
    pub fn slot_of(&self, tick_offset: u64) -> TimestampOffset {
        debug_assert!(tick_offset < self.epoch_ticks());
        let slot = ((tick_offset as u128) << self.size_ts) / self.epoch_ticks() as u128;
        TimestampOffset(slot as u64)
    }

    /// Epoch and leaf slot of an absolute tick count.
    pub fn locate(&self, abs_ticks: u64) -> (EpochId, TimestampOffset) {
        let epoch = self.epoch_of(abs_ticks);
        let offset = abs_ticks - self.epoch_start_ticks(epoch);
        (epoch, self.slot_of(offset))
    }

    /// First tick offset whose slot is ≥ `node_index` at `depth`, i.e. the
    /// start of that node's time window. `node_index = 2^depth` gives the epoch length.
    pub fn node_start_tick(&self, depth: u8, node_index: u64) -> u64 {
        // smallest t with t * 2^depth >= node_index * E
        let num = node_index as u128 * self.epoch_ticks() as u128;
        num.div_ceil(1u128 << depth) as u64
    }

    /// Absolute tick window `[start, end)` of sub-epoch `index`.
    pub fn subepoch_window(&self, epoch: EpochId, index: usize) -> (u64, u64) {
        let base = self.epoch_start_ticks(epoch);
        (
            base + self.node_start_tick(self.depth_p, index as u64),
            base + self.node_start_tick(self.depth_p, index as u64 + 1),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_valid() {
        TreeParams::default().validate().unwrap();
        TreeParams::small().validate().unwrap();
    }

    #[test]
    fn rejects_bad_params() {
        let p = TreeParams {
            depth_p: 23,
            ..TreeParams::default()
        };
        assert_eq!(p.validate(), Err(ParamsError::DepthP(23)));
        let p = TreeParams {
            size_p: 257,
            ..TreeParams::default()
        };
        assert!(matches!(p.validate(), Err(ParamsError::SizeP { .. })));
        let p = TreeParams {
            size_ts: 21,
            depth_p: 12,
            ..TreeParams::default()
        };
        assert!(matches!(p.validate(), Err(ParamsError::EpochTooLong { .. })));
        let p = TreeParams {
            depth_u: 0,
            ..TreeParams::default()
        };
        assert_eq!(p.validate(), Err(ParamsError::DepthU(0)));
    }

    #[test]
    fn slot_map_is_monotone_and_injective() {
        let p = TreeParams::small();
        let slots: Vec<u64> = (0..p.epoch_ticks()).map(|t| p.slot_of(t).0).collect();
        assert!(slots.windows(2).all(|w| w[0] < w[1]));
        assert!(*slots.last().unwrap() < p.leaf_count());
    }

    #[test]
    fn subepoch_windows_partition_the_epoch() {
        let p = TreeParams::default();
        let e = EpochId(7);
        let mut prev_end = p.epoch_start_ticks(e);
        for i in 0..p.subepoch_count() {
            let (s, end) = p.subepoch_window(e, i);
            assert_eq!(s, prev_end);
            prev_end = end;
        }
        assert_eq!(prev_end, p.epoch_start_ticks(EpochId(8)));
        // 3600 s / 4096 ≈ 0.879 s
        let (s, end) = p.subepoch_window(e, 1);
        assert!((878..=880).contains(&(end - s)));
    }

    #[test]
    fn tick_lands_in_its_window() {
        let p = TreeParams::default();
        let e = EpochId(3);
        for t in [0u64, 1, 878, 879, 880, 1_799_999, 3_599_999] {
            let abs = p.epoch_start_ticks(e) + t;
            let (epoch, slot) = p.locate(abs);
            assert_eq!(epoch, e);
            let sub = slot.ancestor(p.size_ts, p.depth_p).index as usize;
            let (s, end) = p.subepoch_window(e, sub);
            assert!(s <= abs && abs < end, "tick {t} sub {sub}");
        }
    }

    #[test]
    fn update_branch_width_is_about_three_and_a_half_seconds() {
        let p = TreeParams::default();
        let w = p.node_start_tick(p.depth_u, 1);
        assert_eq!(w, 3516); // ceil(3_600_000 / 1024)
    }
}
