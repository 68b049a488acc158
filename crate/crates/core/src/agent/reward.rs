use serde::{Deserialize, Serialize};

use crate::array::PhaseVector;

/// Ternary reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Reward {
    Penalty,
    Neutral,
    Improvement,
}

impl Reward {
    pub fn value(self) -> i8 {
        match self {
            Reward::Penalty => -1,
            Reward::Neutral => 0,
            Reward::Improvement => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }
}

impl From<Reward> for i8 {
    fn from(r: Reward) -> i8 {
        r.value()
    }
}

impl TryFrom<i8> for Reward {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Reward::Penalty),
            0 => Ok(Reward::Neutral),
            1 => Ok(Reward::Improvement),
            other => Err(format!("reward must be -1, 0 or 1, got {other}")),
        }
    }
}

/// Adaptive threshold, previous gain and the best beam seen so far.
///
/// The threshold is the best gain observed; both start at zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardTracker {
    threshold: f64,
    previous_gain: f64,
    best_beam: Option<PhaseVector>,
}

impl RewardTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Restores a tracker from saved values.
    pub fn from_parts(threshold: f64, previous_gain: f64, best_beam: Option<PhaseVector>) -> Self {
        Self {
            threshold,
            previous_gain,
            best_beam,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn best_gain(&self) -> f64 {
        self.threshold
    }

    pub fn previous_gain(&self) -> f64 {
        self.previous_gain
    }

    pub fn best_beam(&self) -> Option<&PhaseVector> {
        self.best_beam.as_ref()
    }

    /// Scores gain `g` of `beam` and updates the tracked quantities.
    ///
    /// `+1` when `g` beats the threshold, `0` when it only beats the previous
    /// gain, `-1` otherwise. The previous gain always becomes `g`.
    pub fn compute_reward(&mut self, g: f64, beam: &PhaseVector) -> Reward {
        let reward = if g > self.threshold {
            self.threshold = g;
            self.best_beam = Some(beam.clone());
            Reward::Improvement
        } else if g > self.previous_gain {
            Reward::Neutral
        } else {
            Reward::Penalty
        };
        self.previous_gain = g;
        reward
    }
}
