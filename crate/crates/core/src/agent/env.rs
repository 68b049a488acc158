use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::array::{beam_from_phases, PhaseVector};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::metrics::average_gain;

/// Something that reports a scalar receive-power feedback for a beam.
pub trait Environment {
    fn num_antennas(&self) -> usize;

    fn measure(&mut self, beam: &PhaseVector) -> Result<f64>;
}

/// Average beamforming gain over a channel set, optionally with additive
/// Gaussian measurement noise (clamped at zero).
#[derive(Debug, Clone)]
pub struct GainFeedback {
    channels: ChannelSet,
    noise_std: f64,
    rng: ChaCha8Rng,
}

impl GainFeedback {
    pub fn new(channels: ChannelSet) -> Self {
        Self {
            channels,
            noise_std: 0.0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn with_measurement_noise(mut self, std: f64, seed: u64) -> Result<Self> {
        if !(std >= 0.0 && std.is_finite()) {
            return Err(Error::Config(format!("measurement noise must be non-negative, got {std}")));
        }
        self.noise_std = std;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self)
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }
}

impl Environment for GainFeedback {
    fn num_antennas(&self) -> usize {
        self.channels.dimension()
    }

    fn measure(&mut self, beam: &PhaseVector) -> Result<f64> {
        let g = average_gain(&beam_from_phases(beam), &self.channels)?;
        if self.noise_std == 0.0 {
            return Ok(g);
        }
        let z: f64 = self.rng.sample(StandardNormal);
        Ok((g + self.noise_std * z).max(0.0))
    }
}
