use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Setup};
use crate::array::{beam_from_phases, PhaseCodebook, PhaseVector};
use crate::channel::{ArrayGeometry, ChannelSet};
use crate::error::{Error, Result};
use crate::metrics::{
    average_gain, beamsteering_codebook, best_codebook_beam, egc_upper_bound, exhaustive_search, quantized_egc_beam,
    to_db, GainReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub gain: f64,
    pub gain_db: f64,
    /// Gain divided by the EGC upper bound.
    pub ratio: f64,
}

impl BaselineEntry {
    pub fn new(gain: f64, egc: f64) -> Self {
        Self {
            gain,
            gain_db: to_db(gain),
            ratio: gain / egc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub egc: BaselineEntry,
    /// Mean over users of each user's own quantized EGC beam.
    pub quantized_egc: BaselineEntry,
    /// Best beam of the steering codebook designed for the ideal array.
    pub steering: BaselineEntry,
    pub steering_index: usize,
    /// Present when the quantized beam space fits the search budget.
    pub exhaustive: Option<BaselineEntry>,
    pub exhaustive_beam: Option<Vec<f64>>,
}

/// Evaluates every classical baseline on `channels`.
pub fn baseline_table(
    channels: &ChannelSet,
    nominal: &ArrayGeometry,
    codebook: &PhaseCodebook,
    steering_beams: usize,
    search_budget: u128,
) -> Result<BaselineTable> {
    if nominal.num_antennas() != channels.dimension() {
        return Err(Error::Usage(format!(
            "geometry has {} antennas but channels have {}",
            nominal.num_antennas(),
            channels.dimension()
        )));
    }
    let egc = egc_upper_bound(channels)?;
    let quantized = channels
        .channels()
        .iter()
        .map(|h| quantized_egc_beam(h, codebook).map(|(_, g)| g))
        .sum::<Result<f64>>()?
        / channels.len() as f64;
    let beams = beamsteering_codebook(nominal, steering_beams, Some(codebook))?;
    let (steering_index, steering) = best_codebook_beam(&beams, channels)?;
    let (exhaustive, exhaustive_beam) = match exhaustive_search(channels, codebook, search_budget) {
        Ok(outcome) => (
            Some(BaselineEntry::new(outcome.gain, egc)),
            Some(outcome.beam.phases().to_vec()),
        ),
        Err(Error::SearchBudget { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(BaselineTable {
        egc: BaselineEntry::new(egc, egc),
        quantized_egc: BaselineEntry::new(quantized, egc),
        steering: BaselineEntry::new(steering, egc),
        steering_index,
        exhaustive,
        exhaustive_beam,
    })
}

pub fn run_baselines(config: &ExperimentConfig) -> Result<BaselineTable> {
    let setup = Setup::new(config.clone())?;
    baselines_for(&setup)
}

pub(crate) fn baselines_for(setup: &Setup) -> Result<BaselineTable> {
    baseline_table(
        &setup.channels,
        &setup.nominal_geometry()?,
        &setup.codebook,
        setup.config.baselines.steering_beams,
        u128::from(setup.config.baselines.search_budget),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamEvaluation {
    pub report: GainReport,
    pub egc: f64,
    /// Average gain over the EGC upper bound.
    pub ratio: f64,
    /// Each user's gain over that user's EGC gain.
    pub per_user_ratio: Vec<f64>,
}

/// Gain of `beam` on `channels` with ratios to the EGC bound. The average is
/// computed exactly as during training, so a logged gain is reproduced
/// bit-for-bit.
pub fn evaluate_beam(beam: &PhaseVector, channels: &ChannelSet, rho: Option<f64>) -> Result<BeamEvaluation> {
    let w = beam_from_phases(beam);
    let mut report = GainReport::evaluate(&w, channels, rho)?;
    report.average = average_gain(&w, channels)?;
    let egc = egc_upper_bound(channels)?;
    let per_user_ratio = channels
        .channels()
        .iter()
        .zip(&report.per_user)
        .map(|(h, g)| {
            let single = ChannelSet::single(h.clone())?;
            Ok(g / egc_upper_bound(&single)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BeamEvaluation {
        ratio: report.average / egc,
        report,
        egc,
        per_user_ratio,
    })
}
