use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete-time Ornstein-Uhlenbeck process with unit step:
/// `X ← X + θ(μ − X) + σ·N(0, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    state: Vec<f64>,
    mu: f64,
    theta: f64,
    sigma: f64,
}

impl OuNoise {
    pub fn new(dim: usize, mu: f64, theta: f64, sigma: f64) -> Self {
        Self {
            state: vec![mu; dim],
            mu,
            theta,
            sigma,
        }
    }

    pub fn with_state(mut self, state: Vec<f64>) -> Self {
        self.state = state;
        self
    }

    pub fn reset(&mut self) {
        self.state.fill(self.mu);
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        self.sigma = sigma;
    }

    /// Advances one step and returns the new sample.
    pub fn ou_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        for x in &mut self.state {
            let z: f64 = rng.sample(StandardNormal);
            *x += self.theta * (self.mu - *x) + self.sigma * z;
        }
        &self.state
    }

    /// Stationary variance of the unit-step recursion, `σ²/(2θ − θ²)`.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta - self.theta * self.theta)
    }
}

/// Exploration strength: linear from `start` to `end` over the first
/// `decay_fraction` of the run, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl NoiseSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.start >= self.end && self.end >= 0.0 && self.start.is_finite()) {
            return Err(Error::Config(format!(
                "noise schedule must decrease from start to a non-negative end, got {} -> {}",
                self.start, self.end
            )));
        }
        if !(self.decay_fraction > 0.0 && self.decay_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "noise decay fraction must be in (0, 1], got {}",
                self.decay_fraction
            )));
        }
        Ok(())
    }

    /// `σ(t)` for 1-based iteration `t` of a run with `total` iterations.
    pub fn sigma_at(&self, t: u64, total: u64) -> f64 {
        let decay_steps = ((total as f64 * self.decay_fraction).round() as u64).max(1);
        if t <= 1 || decay_steps <= 1 {
            return if t <= 1 { self.start } else { self.end };
        }
        if t >= decay_steps {
            return self.end;
        }
        let frac = (t - 1) as f64 / (decay_steps - 1) as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Sets the noise strength for iteration `t`.
pub fn decay_noise(noise: &mut OuNoise, schedule: &NoiseSchedule, t: u64, total: u64) {
    noise.set_sigma(schedule.sigma_at(t, total));
}
