use serde::{Deserialize, Serialize};

use crate::dynamics::SimStats;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    FreeFlowing,
    Intermediate,
    Jammed,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::FreeFlowing => "free-flowing",
            Phase::Intermediate => "intermediate",
            Phase::Jammed => "jammed",
        }
    }
}

/// Speed cut-offs in moves per car per sub-step (the ceiling is 1/2 in two
/// dimensions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseThresholds {
    pub low: f64,
    pub high: f64,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        PhaseThresholds { low: 0.01, high: 0.45 }
    }
}

/// Label a run by its speed over the last `window` sub-steps of `horizon`:
/// jammed if it froze or the speed is below `low`, free-flowing at or above
/// `high`, intermediate otherwise.
pub fn classify_phase(stats: &SimStats, horizon: u64, window: u64, thresholds: &PhaseThresholds) -> Result<(Phase, f64)> {
    if stats.frozen_at.is_some() {
        let v = stats.final_window_speed(horizon, window).unwrap_or(0.0);
        return Ok((Phase::Jammed, v));
    }
    let v = stats.final_window_speed(horizon, window)?;
    let phase = if v < thresholds.low {
        Phase::Jammed
    } else if v >= thresholds.high {
        Phase::FreeFlowing
    } else {
        Phase::Intermediate
    };
    Ok((phase, v))
}
