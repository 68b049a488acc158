//! Beamforming gain objectives and analytic baselines.
//!
//! Gains use `w^H h = Σ conj(w_m) h_m`, so the phase-matched beam for a
//! channel entry `h_m` carries phase `+∠h_m`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{beam_from_phases, quantize_phases, wrap_phase, BeamVector, PhaseCodebook, PhaseVector};
use crate::channel::{ArrayGeometry, ChannelSet, WAVENUMBER_TIMES_LAMBDA};
use crate::error::{Error, Result};

pub const DEFAULT_SEARCH_BUDGET: u128 = 10_000_000;

fn inner(w: &BeamVector, h: &[Complex64]) -> Complex64 {
    w.coefficients().iter().zip(h).map(|(w, h)| w.conj() * h).sum()
}

/// `|w^H h|²`.
pub fn gain(w: &BeamVector, h: &[Complex64]) -> Result<f64> {
    if w.len() != h.len() {
        return Err(Error::Usage(format!(
            "beam has {} antennas but channel has {}",
            w.len(),
            h.len()
        )));
    }
    Ok(inner(w, h).norm_sqr())
}

/// Mean gain over the channel set; the objective the learner maximizes.
pub fn average_gain(w: &BeamVector, set: &ChannelSet) -> Result<f64> {
    let total = set
        .channels()
        .iter()
        .map(|h| gain(w, h))
        .sum::<Result<f64>>()?;
    Ok(total / set.len() as f64)
}

/// Post-combining SNR for a unit-norm beam, `|w^H h|² ρ`.
pub fn snr(w: &BeamVector, h: &[Complex64], rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Usage(format!("rho must be positive, got {rho}")));
    }
    Ok(gain(w, h)? * rho)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub per_user: Vec<f64>,
    pub average: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<Vec<f64>>,
}

impl GainReport {
    pub fn evaluate(w: &BeamVector, set: &ChannelSet, rho: Option<f64>) -> Result<Self> {
        let per_user = set
            .channels()
            .iter()
            .map(|h| gain(w, h))
            .collect::<Result<Vec<_>>>()?;
        let average = per_user.iter().sum::<f64>() / per_user.len() as f64;
        let snr = match rho {
            Some(rho) => Some(
                set.channels()
                    .iter()
                    .map(|h| snr(w, h, rho))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(Self { per_user, average, snr })
    }

    pub fn average_db(&self) -> f64 {
        to_db(self.average)
    }
}

/// Equal-gain-combining beam: unquantized phases matching each channel entry.
/// Its gain `(Σ|h_m|)²/M` bounds every constant-modulus beam.
pub fn egc_beam(h: &[Complex64]) -> Result<(PhaseVector, f64)> {
    if h.is_empty() || h.iter().all(|c| c.norm_sqr() == 0.0) {
        return Err(Error::Usage("EGC needs a non-zero channel".into()));
    }
    let phases = PhaseVector::new(h.iter().map(|c| wrap_phase(c.arg())).collect());
    let amplitude: f64 = h.iter().map(|c| c.norm()).sum();
    Ok((phases, amplitude * amplitude / h.len() as f64))
}

/// EGC upper bound for a set of channels: the best average gain any
/// constant-modulus beam could achieve if each user were served by its own
/// EGC beam. For a single channel this is exactly the EGC gain.
pub fn egc_upper_bound(set: &ChannelSet) -> Result<f64> {
    let total = set
        .channels()
        .iter()
        .map(|h| egc_beam(h).map(|(_, g)| g))
        .sum::<Result<f64>>()?;
    Ok(total / set.len() as f64)
}

/// EGC phases projected onto the codebook, with the gain they achieve.
pub fn quantized_egc_beam(h: &[Complex64], codebook: &PhaseCodebook) -> Result<(PhaseVector, f64)> {
    let (phases, _) = egc_beam(h)?;
    let q = quantize_phases(&phases, codebook);
    let g = gain(&beam_from_phases(&q), h)?;
    Ok((q, g))
}

/// Classical steering codebook built from the given (normally ideal) geometry.
///
/// Beam `i` points at `cos φ_i = -1 + 2i/num_beams`; its phases are
/// `2π d_m cos φ_i`, wrapped and optionally quantized.
pub fn beamsteering_codebook(
    geometry: &ArrayGeometry,
    num_beams: usize,
    codebook: Option<&PhaseCodebook>,
) -> Result<Vec<PhaseVector>> {
    if num_beams == 0 {
        return Err(Error::Usage("steering codebook needs at least one beam".into()));
    }
    Ok((0..num_beams)
        .map(|i| {
            let c = steering_grid_cos(i, num_beams);
            let phases = PhaseVector::new(
                geometry
                    .positions()
                    .iter()
                    .map(|&d| wrap_phase(WAVENUMBER_TIMES_LAMBDA * d * c))
                    .collect(),
            );
            match codebook {
                Some(cb) => quantize_phases(&phases, cb),
                None => phases,
            }
        })
        .collect())
}

/// `cos φ` of steering beam `index` on a grid of `num_beams` over `[-1, 1)`.
pub fn steering_grid_cos(index: usize, num_beams: usize) -> f64 {
    -1.0 + 2.0 * index as f64 / num_beams as f64
}

/// Best beam of a codebook on a channel set: `(index, average gain)`.
pub fn best_codebook_beam(beams: &[PhaseVector], set: &ChannelSet) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, beam) in beams.iter().enumerate() {
        let g = average_gain(&beam_from_phases(beam), set)?;
        if best.is_none_or(|(_, b)| g > b) {
            best = Some((i, g));
        }
    }
    best.ok_or_else(|| Error::Usage("empty codebook".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub beam: PhaseVector,
    pub gain: f64,
    pub evaluated: u128,
}

/// Globally optimal quantized beam by enumeration of all `(2^r)^M` phase
/// vectors. Ties keep the lexicographically smallest vector.
pub fn exhaustive_search(set: &ChannelSet, codebook: &PhaseCodebook, budget: u128) -> Result<SearchOutcome> {
    let m = set.dimension();
    let n = codebook.len();
    let required = (n as u128)
        .checked_pow(m as u32)
        .filter(|&r| r <= budget)
        .ok_or(Error::SearchBudget {
            required: (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX),
            budget,
        })?;

    let scale = 1.0 / (m as f64).sqrt();
    // conj(w_m) for every codebook value.
    let conj_coeffs: Vec<Complex64> = codebook
        .values()
        .iter()
        .map(|&v| Complex64::from_polar(scale, -v))
        .collect();

    let mut indices = vec![0usize; m];
    let mut best_indices = indices.clone();
    let mut best_gain = f64::NEG_INFINITY;
    let mut evaluated = 0u128;
    loop {
        let total: f64 = set
            .channels()
            .iter()
            .map(|h| {
                indices
                    .iter()
                    .zip(h)
                    .map(|(&k, hm)| conj_coeffs[k] * hm)
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum();
        let g = total / set.len() as f64;
        evaluated += 1;
        if g > best_gain {
            best_gain = g;
            best_indices.copy_from_slice(&indices);
        }

        // Odometer with the first antenna most significant.
        let mut pos = m;
        loop {
            if pos == 0 {
                debug_assert_eq!(evaluated, required);
                let beam = PhaseVector::from_indices(codebook, &best_indices)?;
                let gain = average_gain(&beam_from_phases(&beam), set)?;
                return Ok(SearchOutcome { beam, gain, evaluated });
            }
            pos -= 1;
            indices[pos] += 1;
            if indices[pos] < n {
                break;
            }
            indices[pos] = 0;
        }
    }
}

/// Writes beams as CSV rows of phases in radians.
pub fn save_phase_rows(beams: &[PhaseVector], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "# one beam per row, phases in radians");
    for beam in beams {
        let row: Vec<String> = beam.phases().iter().map(|p| p.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_phase_rows(path: impl AsRef<Path>) -> Result<Vec<PhaseVector>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut beams = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let phases = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::ingestion(path, idx + 1, format!("invalid phase {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        beams.push(PhaseVector::new(phases));
    }
    Ok(beams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::build_codebook;
    use crate::channel::{array_response, sample_impaired_geometry};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_channel(m: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..m)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn matched_beam_on_response_gives_m() {
        let g = ArrayGeometry::ideal(16, 0.5).unwrap();
        let h = array_response(&g, 1.2);
        let (phases, egc) = egc_beam(&h).unwrap();
        let w = beam_from_phases(&phases);
        assert!((gain(&w, &h).unwrap() - 16.0).abs() < 1e-9);
        assert!((egc - 16.0).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_beam_gives_zero() {
        let w = beam_from_phases(&PhaseVector::new(vec![0.0, 0.0]));
        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        assert!(gain(&w, &h).unwrap() < 1e-30);
    }

    #[test]
    fn two_antenna_hand_computation() {
        // w = (1/√2)[1, 1], h = [1, j]: w^H h = (1 + j)/√2, |.|² = 1.
        let w = beam_from_phases(&PhaseVector::new(vec![0.0, 0.0]));
        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        assert!((gain(&w, &h).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let w = beam_from_phases(&PhaseVector::new(vec![0.0; 3]));
        assert!(matches!(gain(&w, &[Complex64::new(1.0, 0.0)]), Err(Error::Usage(_))));
    }

    #[test]
    fn average_gain_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_channel(4, &mut rng);
        let w = beam_from_phases(&PhaseVector::new(vec![0.1, 0.4, -2.0, 3.0]));
        let g = gain(&w, &h).unwrap();
        let single = ChannelSet::single(h.clone()).unwrap();
        assert_eq!(average_gain(&w, &single).unwrap(), g);
        let twice = ChannelSet::new(vec![h.clone(), h.clone()]).unwrap();
        assert!((average_gain(&w, &twice).unwrap() - g).abs() < 1e-15);
        let neg: Vec<Complex64> = h.iter().map(|c| -c).collect();
        let signed = ChannelSet::new(vec![h, neg]).unwrap();
        assert!((average_gain(&w, &signed).unwrap() - g).abs() < 1e-12);
    }

    #[test]
    fn snr_examples() {
        let g = ArrayGeometry::ideal(8, 0.5).unwrap();
        let h = array_response(&g, 0.9);
        let (phases, _) = egc_beam(&h).unwrap();
        let w = beam_from_phases(&phases);
        let gain = gain(&w, &h).unwrap();
        assert_eq!(snr(&w, &h, 1.0).unwrap(), gain);
        assert!((snr(&w, &h, 10.0).unwrap() - 80.0).abs() < 1e-9);
        assert!((snr(&w, &h, 4.0).unwrap() - 2.0 * snr(&w, &h, 2.0).unwrap()).abs() < 1e-12);
        assert!(snr(&w, &h, 0.0).is_err());
        assert!(snr(&w, &h, -1.0).is_err());
    }

    #[test]
    fn egc_of_positive_real_channel() {
        let h: Vec<Complex64> = [1.0, 2.0, 0.5].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let (phases, g) = egc_beam(&h).unwrap();
        assert!(phases.phases().iter().all(|&p| p == 0.0));
        assert!((g - 3.5f64.powi(2) / 3.0).abs() < 1e-12);
        assert!(egc_beam(&[Complex64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn quantized_egc_on_codebook_phases_is_exact() {
        let cb = build_codebook(3).unwrap();
        let h: Vec<Complex64> = [0usize, 3, 5, 7]
            .iter()
            .zip([1.0, 0.5, 2.0, 1.5])
            .map(|(&k, a)| Complex64::from_polar(a, cb.values()[k]))
            .collect();
        let (_, egc) = egc_beam(&h).unwrap();
        let (_, q) = quantized_egc_beam(&h, &cb).unwrap();
        assert!((q - egc).abs() < 1e-12);
    }

    #[test]
    fn quantized_egc_ratio_approaches_one_with_resolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let channels: Vec<Vec<Complex64>> = (0..200)
            .map(|_| (0..32).map(|_| Complex64::cis(2.0 * PI * rng.random::<f64>())).collect())
            .collect();
        let mean_ratio = |r: u32| {
            let cb = build_codebook(r).unwrap();
            channels
                .iter()
                .map(|h| quantized_egc_beam(h, &cb).unwrap().1 / egc_beam(h).unwrap().1)
                .sum::<f64>()
                / channels.len() as f64
        };
        let r3 = mean_ratio(3);
        let r8 = mean_ratio(8);
        assert!(r8 > r3);
        assert!(r8 > 0.9999);
    }

    #[test]
    fn broadside_steering_beam_is_all_zero() {
        let g = ArrayGeometry::ideal(8, 0.5).unwrap();
        let beams = beamsteering_codebook(&g, 32, None).unwrap();
        assert_eq!(steering_grid_cos(16, 32), 0.0);
        assert!(beams[16].phases().iter().all(|&p| p == 0.0));
        assert!(beamsteering_codebook(&g, 0, None).is_err());
    }

    #[test]
    fn grid_aligned_los_channel_reaches_m_with_unquantized_steering() {
        let g = ArrayGeometry::ideal(32, 0.5).unwrap();
        let beams = beamsteering_codebook(&g, 32, None).unwrap();
        for i in [3, 10, 16, 27] {
            let phi = steering_grid_cos(i, 32).acos();
            let set = ChannelSet::single(array_response(&g, phi)).unwrap();
            let (best, gain) = best_codebook_beam(&beams, &set).unwrap();
            assert_eq!(best, i);
            assert!((gain - 32.0).abs() / 32.0 < 1e-9);
        }
    }

    #[test]
    fn quantized_steering_falls_short_of_egc_on_los() {
        let g = ArrayGeometry::ideal(32, 0.5).unwrap();
        let cb = build_codebook(3).unwrap();
        let beams = beamsteering_codebook(&g, 32, Some(&cb)).unwrap();
        let h = array_response(&g, 1.0);
        let set = ChannelSet::single(h.clone()).unwrap();
        let (_, best) = best_codebook_beam(&beams, &set).unwrap();
        assert!(best < egc_beam(&h).unwrap().1);
    }

    #[test]
    fn single_antenna_search() {
        let cb = build_codebook(2).unwrap();
        let h = vec![Complex64::new(0.3, -1.2)];
        let out = exhaustive_search(&ChannelSet::single(h.clone()).unwrap(), &cb, DEFAULT_SEARCH_BUDGET).unwrap();
        assert!((out.gain - h[0].norm_sqr()).abs() < 1e-12);
        assert_eq!(out.evaluated, 4);
    }

    #[test]
    fn exact_ties_keep_lexicographically_smallest() {
        // The second antenna sees no signal and both 1-bit values give
        // bit-identical gains on the first, so all four beams tie.
        let cb = build_codebook(1).unwrap();
        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let out = exhaustive_search(&ChannelSet::single(h).unwrap(), &cb, DEFAULT_SEARCH_BUDGET).unwrap();
        assert_eq!(out.beam.phases(), &[0.0, 0.0]);
    }

    #[test]
    fn two_antenna_one_bit_search_counts_four() {
        let cb = build_codebook(1).unwrap();
        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.1)];
        let out = exhaustive_search(&ChannelSet::single(h).unwrap(), &cb, DEFAULT_SEARCH_BUDGET).unwrap();
        assert_eq!(out.evaluated, 4);
    }

    #[test]
    fn search_matches_independent_enumeration() {
        let cb = build_codebook(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let h = random_channel(3, &mut rng);
            let set = ChannelSet::single(h.clone()).unwrap();
            // Oracle: nested loops over the 64 beams with an explicit sum.
            let mut oracle = f64::NEG_INFINITY;
            for &a in cb.values() {
                for &b in cb.values() {
                    for &c in cb.values() {
                        let s = (Complex64::cis(-a) * h[0] + Complex64::cis(-b) * h[1] + Complex64::cis(-c) * h[2])
                            / 3f64.sqrt();
                        oracle = oracle.max(s.norm_sqr());
                    }
                }
            }
            let out = exhaustive_search(&set, &cb, DEFAULT_SEARCH_BUDGET).unwrap();
            assert_eq!(out.evaluated, 64);
            assert!((out.gain - oracle).abs() < 1e-12);
            let (_, q) = quantized_egc_beam(&h, &cb).unwrap();
            assert!(out.gain >= q - 1e-12);
        }
    }

    #[test]
    fn search_refuses_over_budget() {
        let cb = build_codebook(3).unwrap();
        let set = ChannelSet::single(vec![Complex64::new(1.0, 0.0); 32]).unwrap();
        match exhaustive_search(&set, &cb, DEFAULT_SEARCH_BUDGET) {
            Err(Error::SearchBudget { required, budget }) => {
                assert_eq!(budget, DEFAULT_SEARCH_BUDGET);
                assert_eq!(required, 8u128.pow(32));
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn search_beats_steering_codebook() {
        let g = sample_impaired_geometry(4, 0.5, 0.1, 1.0, 3).unwrap();
        let ideal = ArrayGeometry::ideal(4, 0.5).unwrap();
        let cb = build_codebook(2).unwrap();
        let set = ChannelSet::single(array_response(&g, 1.3)).unwrap();
        let out = exhaustive_search(&set, &cb, DEFAULT_SEARCH_BUDGET).unwrap();
        for beam in beamsteering_codebook(&ideal, 8, Some(&cb)).unwrap() {
            assert!(out.gain >= average_gain(&beam_from_phases(&beam), &set).unwrap() - 1e-12);
        }
    }

    #[test]
    fn phase_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.csv");
        let g = ArrayGeometry::ideal(6, 0.5).unwrap();
        let cb = build_codebook(3).unwrap();
        let beams = beamsteering_codebook(&g, 8, Some(&cb)).unwrap();
        save_phase_rows(&beams, &path).unwrap();
        let back = load_phase_rows(&path).unwrap();
        assert_eq!(back.len(), 8);
        for (a, b) in beams.iter().zip(&back) {
            assert_eq!(a.phases(), b.phases());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn egc_dominates_quantized_beams(seed in 0u64..10_000, idx in prop::collection::vec(0usize..8, 8)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_channel(8, &mut rng);
            let cb = build_codebook(3).unwrap();
            let s = PhaseVector::from_indices(&cb, &idx).unwrap();
            let g = gain(&beam_from_phases(&s), &h).unwrap();
            let (_, egc) = egc_beam(&h).unwrap();
            prop_assert!(g <= egc * (1.0 + 1e-9));
        }

        #[test]
        fn global_rotation_preserves_gain(seed in 0u64..10_000, shift in 0usize..8, idx in prop::collection::vec(0usize..8, 6)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_channel(6, &mut rng);
            let cb = build_codebook(3).unwrap();
            let rotated: Vec<usize> = idx.iter().map(|&i| (i + shift) % 8).collect();
            let a = gain(&beam_from_phases(&PhaseVector::from_indices(&cb, &idx).unwrap()), &h).unwrap();
            let b = gain(&beam_from_phases(&PhaseVector::from_indices(&cb, &rotated).unwrap()), &h).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn average_lies_between_user_extremes(seed in 0u64..10_000, users in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = ChannelSet::new((0..users).map(|_| random_channel(5, &mut rng)).collect()).unwrap();
            let w = beam_from_phases(&PhaseVector::new((0..5).map(|_| rng.random::<f64>() * 6.0).collect()));
            let report = GainReport::evaluate(&w, &set, None).unwrap();
            let lo = report.per_user.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = report.per_user.iter().cloned().fold(0.0, f64::max);
            prop_assert!(report.average >= lo - 1e-12 && report.average <= hi + 1e-12);
            prop_assert!((report.average - average_gain(&w, &set).unwrap()).abs() < 1e-12);
        }
    }
}
