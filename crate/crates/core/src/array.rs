//! Phase-shifter codebooks, phase vectors and the analog beamforming vectors they induce.
//!
//! Every angle is in radians. Codebook values are anchored at `-π + 2πk/2^r`
//! for `k = 1..=2^r`, so `π` is a member and `-π` is not.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_RESOLUTION_BITS: u32 = 16;

const TWO_PI: f64 = 2.0 * PI;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let mut y = (theta + PI).rem_euclid(TWO_PI) - PI;
    if y <= -PI {
        y += TWO_PI;
    }
    if y > PI {
        y -= TWO_PI;
    }
    y
}

/// Wrap-around angular distance, always in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// The finite set of phases a `resolution_bits`-bit phase shifter can realize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCodebook {
    resolution_bits: u32,
    values: Vec<f64>,
}

impl PhaseCodebook {
    pub fn new(resolution_bits: u32) -> Result<Self> {
        build_codebook(resolution_bits)
    }

    pub fn resolution_bits(&self) -> u32 {
        self.resolution_bits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spacing between consecutive values, `2π / 2^r`.
    pub fn step(&self) -> f64 {
        TWO_PI / self.values.len() as f64
    }

    /// Stable identifier used in exported beam files.
    pub fn id(&self) -> String {
        format!("uniform-{}bit", self.resolution_bits)
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.values.iter().any(|&v| v == theta)
    }

    /// Index of `theta` if it is exactly a codebook value.
    pub fn index_of(&self, theta: f64) -> Option<usize> {
        self.values.iter().position(|&v| v == theta)
    }

    /// Index of the codebook value closest to `theta` in circular distance.
    /// Exact ties go to the larger value.
    pub fn nearest_index(&self, theta: f64) -> usize {
        let n = self.values.len();
        let x = wrap_phase(theta);
        // values[i] = -π + step·(i+1); candidates bracket the continuous position.
        let pos = (x + PI) / self.step();
        let lo = pos.floor() as i64;
        let to_index = |k: i64| ((k - 1).rem_euclid(n as i64)) as usize;
        let a = to_index(lo);
        let b = to_index(lo + 1);
        let da = circular_distance(self.values[a], x);
        let db = circular_distance(self.values[b], x);
        if da < db {
            a
        } else if db < da {
            b
        } else if self.values[a] >= self.values[b] {
            a
        } else {
            b
        }
    }

    pub fn nearest(&self, theta: f64) -> f64 {
        self.values[self.nearest_index(theta)]
    }
}

/// Builds the uniform codebook `{-π + 2πk/2^r : k = 1..=2^r}`.
pub fn build_codebook(resolution_bits: u32) -> Result<PhaseCodebook> {
    if !(1..=MAX_RESOLUTION_BITS).contains(&resolution_bits) {
        return Err(Error::Config(format!(
            "phase resolution must be between 1 and {MAX_RESOLUTION_BITS} bits, got {resolution_bits}"
        )));
    }
    let n = 1usize << resolution_bits;
    let step = TWO_PI / n as f64;
    let mut values: Vec<f64> = (1..=n).map(|k| -PI + step * k as f64).collect();
    // Pin the top value so `π` is represented exactly.
    values[n - 1] = PI;
    Ok(PhaseCodebook {
        resolution_bits,
        values,
    })
}

/// Per-antenna phases. `codebook_bits` is set when every entry is a member of
/// the uniform codebook with that resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    phases: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    codebook_bits: Option<u32>,
}

impl PhaseVector {
    pub fn new(phases: Vec<f64>) -> Self {
        Self {
            phases,
            codebook_bits: None,
        }
    }

    /// Builds a quantized vector from codebook indices.
    pub fn from_indices(codebook: &PhaseCodebook, indices: &[usize]) -> Result<Self> {
        let phases = indices
            .iter()
            .map(|&i| {
                codebook.values().get(i).copied().ok_or_else(|| {
                    Error::Usage(format!("codebook index {i} out of range for {} values", codebook.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            phases,
            codebook_bits: Some(codebook.resolution_bits()),
        })
    }

    /// Marks the vector as quantized after checking membership.
    pub fn into_quantized(self, codebook: &PhaseCodebook) -> Result<Self> {
        if let Some(bad) = self.phases.iter().find(|&&p| !codebook.contains(p)) {
            return Err(Error::Usage(format!(
                "phase {bad} is not a member of the {} codebook",
                codebook.id()
            )));
        }
        Ok(Self {
            phases: self.phases,
            codebook_bits: Some(codebook.resolution_bits()),
        })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn is_quantized(&self) -> bool {
        self.codebook_bits.is_some()
    }

    pub fn codebook_bits(&self) -> Option<u32> {
        self.codebook_bits
    }

    /// Codebook indices of each entry, if every phase is a member.
    pub fn indices(&self, codebook: &PhaseCodebook) -> Option<Vec<usize>> {
        self.phases.iter().map(|&p| codebook.index_of(p)).collect()
    }
}

/// Unit-norm constant-modulus analog beamforming vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector {
    coefficients: Vec<Complex64>,
}

impl BeamVector {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Recovers the phase vector. Inverse of [`beam_from_phases`] on `(-π, π]`.
    pub fn phases(&self) -> PhaseVector {
        PhaseVector::new(self.coefficients.iter().map(|c| wrap_phase(c.arg())).collect())
    }
}

/// `w_m = e^{jθ_m} / √M`.
pub fn beam_from_phases(s: &PhaseVector) -> BeamVector {
    let scale = 1.0 / (s.len() as f64).sqrt();
    BeamVector {
        coefficients: s
            .phases()
            .iter()
            .map(|&theta| Complex64::from_polar(scale, theta))
            .collect(),
    }
}

/// Projects each phase onto its nearest codebook value (circular distance,
/// ties to the larger value). Inputs outside `(-π, π]` are wrapped first.
pub fn quantize_phases(s_hat: &PhaseVector, codebook: &PhaseCodebook) -> PhaseVector {
    PhaseVector {
        phases: s_hat.phases().iter().map(|&p| codebook.nearest(p)).collect(),
        codebook_bits: Some(codebook.resolution_bits()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_nearest(codebook: &PhaseCodebook, x: f64) -> f64 {
        let w = wrap_phase(x);
        let mut best = codebook.values()[0];
        let mut best_d = f64::INFINITY;
        for &v in codebook.values() {
            let d = (v - w).abs().min(TWO_PI - (v - w).abs());
            if d < best_d || (d == best_d && v > best) {
                best = v;
                best_d = d;
            }
        }
        best
    }

    #[test]
    fn one_bit_codebook() {
        let cb = build_codebook(1).unwrap();
        assert_eq!(cb.values(), &[0.0, PI]);
    }

    #[test]
    fn two_bit_codebook() {
        let cb = build_codebook(2).unwrap();
        let expected = [-PI / 2.0, 0.0, PI / 2.0, PI];
        for (v, e) in cb.values().iter().zip(expected) {
            assert!((v - e).abs() < 1e-15, "{v} vs {e}");
        }
    }

    #[test]
    fn three_bit_codebook_has_eight_values_quarter_pi_apart() {
        let cb = build_codebook(3).unwrap();
        assert_eq!(cb.len(), 8);
        for pair in cb.values().windows(2) {
            assert!((pair[1] - pair[0] - PI / 4.0).abs() < 1e-12);
        }
        assert!(cb.values().iter().all(|&v| v > -PI && v <= PI));
        assert!(cb.contains(0.0));
    }

    #[test]
    fn resolution_out_of_range() {
        assert!(matches!(build_codebook(0), Err(Error::Config(_))));
        assert!(matches!(build_codebook(17), Err(Error::Config(_))));
        assert!(build_codebook(16).is_ok());
    }

    #[test]
    fn min_pairwise_circular_distance_is_step() {
        for r in 1..=8 {
            let cb = build_codebook(r).unwrap();
            let mut min = f64::INFINITY;
            for (i, &a) in cb.values().iter().enumerate() {
                for &b in &cb.values()[i + 1..] {
                    min = min.min(circular_distance(a, b));
                }
            }
            assert!((min - cb.step()).abs() < 1e-12, "r={r}: {min}");
        }
    }

    #[test]
    fn beam_examples() {
        let w = beam_from_phases(&PhaseVector::new(vec![0.0]));
        assert_eq!(w.coefficients(), &[Complex64::new(1.0, 0.0)]);
        let w = beam_from_phases(&PhaseVector::new(vec![0.0; 4]));
        for c in w.coefficients() {
            assert!((c - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn quantize_examples() {
        let cb = build_codebook(2).unwrap();
        let q = quantize_phases(&PhaseVector::new(vec![0.1]), &cb);
        assert_eq!(q.phases(), &[0.0]);
        assert!(q.is_quantized());

        // Brute force: distances to {-π/2, 0, π/2, π} from -π+0.01 are
        // {π/2-0.01, π-0.01, π/2+0.01 (wrapped), 0.01}, so π wins.
        let x = -PI + 0.01;
        assert_eq!(brute_force_nearest(&cb, x), PI);
        let q = quantize_phases(&PhaseVector::new(vec![x]), &cb);
        assert_eq!(q.phases(), &[PI]);

        for &v in cb.values() {
            assert_eq!(quantize_phases(&PhaseVector::new(vec![v]), &cb).phases(), &[v]);
        }
    }

    #[test]
    fn exact_tie_goes_to_larger_value() {
        let cb = build_codebook(1).unwrap();
        // π/2 is equidistant from 0 and π.
        assert_eq!(cb.nearest(PI / 2.0), PI);
        assert_eq!(cb.nearest(-PI / 2.0), PI);
    }

    #[test]
    fn from_indices_and_membership() {
        let cb = build_codebook(3).unwrap();
        let s = PhaseVector::from_indices(&cb, &[0, 3, 7]).unwrap();
        assert!(s.is_quantized());
        assert_eq!(s.indices(&cb).unwrap(), vec![0, 3, 7]);
        assert!(PhaseVector::from_indices(&cb, &[8]).is_err());
        assert!(PhaseVector::new(vec![0.3]).into_quantized(&cb).is_err());
    }

    proptest! {
        #[test]
        fn quantizer_matches_brute_force(x in -20.0f64..20.0, r in 1u32..=6) {
            let cb = build_codebook(r).unwrap();
            let q = cb.nearest(x);
            let b = brute_force_nearest(&cb, x);
            // Floating rounding may flip an exact tie; the distance must agree.
            prop_assert!((circular_distance(q, x) - circular_distance(b, x)).abs() < 1e-12);
        }

        #[test]
        fn quantizer_is_idempotent(xs in prop::collection::vec(-10.0f64..10.0, 1..16), r in 1u32..=5) {
            let cb = build_codebook(r).unwrap();
            let once = quantize_phases(&PhaseVector::new(xs), &cb);
            let twice = quantize_phases(&once, &cb);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn beam_has_unit_norm_and_constant_modulus(xs in prop::collection::vec(-10.0f64..10.0, 1..64)) {
            let m = xs.len() as f64;
            let w = beam_from_phases(&PhaseVector::new(xs));
            prop_assert!((w.norm() - 1.0).abs() < 1e-12);
            for c in w.coefficients() {
                prop_assert!((c.norm() - 1.0 / m.sqrt()).abs() < 1e-12);
            }
        }

        #[test]
        fn beam_mapping_is_invertible_on_codebook(idx in prop::collection::vec(0usize..8, 1..16)) {
            let cb = build_codebook(3).unwrap();
            let s = PhaseVector::from_indices(&cb, &idx).unwrap();
            let back = quantize_phases(&beam_from_phases(&s).phases(), &cb);
            prop_assert_eq!(back.phases(), s.phases());
        }

        #[test]
        fn wrap_lands_in_half_open_interval(x in -1e3f64..1e3) {
            let w = wrap_phase(x);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!(circular_distance(w, x) < 1e-9);
        }
    }
}
