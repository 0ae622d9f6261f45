//! Storage lifecycle of a finalized epoch.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Stages only ever move forward: full tree → leaves → parity → root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetentionStage {
    FullTree,
    LeavesOnly,
    ParityOnly,
    RootsOnly,
}

impl RetentionStage {
    pub const fn code(self) -> u8 {
        match self {
            RetentionStage::FullTree => 0,
            RetentionStage::LeavesOnly => 1,
            RetentionStage::ParityOnly => 2,
            RetentionStage::RootsOnly => 3,
        }
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(RetentionStage::FullTree),
            1 => Some(RetentionStage::LeavesOnly),
            2 => Some(RetentionStage::ParityOnly),
            3 => Some(RetentionStage::RootsOnly),
            _ => None,
        }
    }

    /// Whether receipts can still be produced at this stage.
    pub fn serves_receipts(self) -> bool {
        self <= RetentionStage::LeavesOnly
    }
}

impl fmt::Display for RetentionStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetentionStage::FullTree => "full-tree",
            RetentionStage::LeavesOnly => "leaves-only",
            RetentionStage::ParityOnly => "parity-only",
            RetentionStage::RootsOnly => "roots-only",
        })
    }
}

impl FromStr for RetentionStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full-tree" => Ok(RetentionStage::FullTree),
            "leaves-only" => Ok(RetentionStage::LeavesOnly),
            "parity-only" => Ok(RetentionStage::ParityOnly),
            "roots-only" => Ok(RetentionStage::RootsOnly),
            other => Err(format!("unknown retention stage {other:?}")),
        }
    }
}

/// Age thresholds (seconds after finalization) at which an epoch moves on.
///
/// Parsed from `stage=age[,stage=age…]`, ages with an `s`, `m`, `h` or `d`
/// suffix, e.g. `leaves-only=1h,parity-only=7d,roots-only=365d`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RetentionSchedule {
    steps: Vec<(RetentionStage, u64)>,
}

impl RetentionSchedule {
    pub fn steps(&self) -> &[(RetentionStage, u64)] {
        &self.steps
    }

    /// Latest stage due for an epoch finalized `age_secs` ago.
    pub fn due(&self, age_secs: u64) -> Option<RetentionStage> {
        self.steps
            .iter()
            .filter(|(_, at)| *at <= age_secs)
            .map(|(s, _)| *s)
            .max()
    }
}

fn parse_age(s: &str) -> Result<u64, String> {
    let (num, unit) = s.split_at(s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len()));
    let n: u64 = num.parse().map_err(|_| format!("bad age {s:?}"))?;
    let mult = match unit {
        "" | "s" => 1,
        "m" => 60,
        "h" => 3600,
        "d" => 86_400,
        _ => return Err(format!("bad age unit in {s:?}")),
    };
    Ok(n * mult)
}

impl FromStr for RetentionSchedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut steps = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (stage, age) = part
                .split_once('=')
                .ok_or_else(|| format!("expected stage=age, got {part:?}"))?;
            let stage: RetentionStage = stage.trim().parse()?;
            if stage == RetentionStage::FullTree {
                return Err("full-tree is the initial stage".into());
            }
            steps.push((stage, parse_age(age.trim())?));
        }
        steps.sort();
        if steps.windows(2).any(|w| w[0].0 == w[1].0 || w[0].1 > w[1].1) {
            return Err("stages must be distinct with non-decreasing ages".into());
        }
        Ok(RetentionSchedule { steps })
    }
}
