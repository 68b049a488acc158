//! Geometric multipath channels over ideal or impaired linear arrays.
//!
//! Antenna positions are in wavelengths, so the wavenumber times the position
//! is `2π·d_m`. Angles of arrival are measured from the array axis.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `k·λ`, the wavenumber in units of inverse wavelengths.
pub const WAVENUMBER_TIMES_LAMBDA: f64 = 2.0 * PI;

pub const DEFAULT_SPACING: f64 = 0.5;

const MAX_REJECTION_ATTEMPTS: usize = 100_000;

/// Antenna positions and per-antenna phase mismatches of a linear array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    #[serde(rename = "positions_wavelengths")]
    positions: Vec<f64>,
    #[serde(rename = "phase_offsets_rad")]
    phase_offsets: Vec<f64>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<f64>, phase_offsets: Vec<f64>) -> Result<Self> {
        let geometry = Self {
            positions,
            phase_offsets,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Uniform linear array with `spacing` wavelengths between elements.
    pub fn ideal(num_antennas: usize, spacing: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::Config("array must have at least one antenna".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Config(format!("antenna spacing must be positive, got {spacing}")));
        }
        Ok(Self {
            positions: (0..num_antennas).map(|m| m as f64 * spacing).collect(),
            phase_offsets: vec![0.0; num_antennas],
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::Config("array must have at least one antenna".into()));
        }
        if self.positions.len() != self.phase_offsets.len() {
            return Err(Error::Config(format!(
                "{} positions but {} phase offsets",
                self.positions.len(),
                self.phase_offsets.len()
            )));
        }
        if self
            .positions
            .iter()
            .chain(&self.phase_offsets)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Config("geometry contains non-finite values".into()));
        }
        if !positions_ordered(&self.positions) {
            return Err(Error::Config("antenna positions must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn num_antennas(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn phase_offsets(&self) -> &[f64] {
        &self.phase_offsets
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let geometry: Self = serde_json::from_str(text)?;
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn positions_ordered(positions: &[f64]) -> bool {
    positions.windows(2).all(|p| p[0] < p[1])
}

/// Draws a fixed impaired geometry: `d_m ~ N((m-1)d, σ_d²)`, `Δθ_m ~ N(0, σ_p²)`.
///
/// The whole position vector is redrawn until it is strictly increasing.
pub fn sample_impaired_geometry(
    num_antennas: usize,
    spacing: f64,
    sigma_d: f64,
    sigma_p: f64,
    seed: u64,
) -> Result<ArrayGeometry> {
    let ideal = ArrayGeometry::ideal(num_antennas, spacing)?;
    if !(sigma_d >= 0.0 && sigma_p >= 0.0 && sigma_d.is_finite() && sigma_p.is_finite()) {
        return Err(Error::Config(format!(
            "impairment deviations must be non-negative, got sigma_d={sigma_d}, sigma_p={sigma_p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturb = |mean: f64, sigma: f64, rng: &mut ChaCha8Rng| {
        if sigma == 0.0 {
            mean
        } else {
            mean + sigma * rng.sample::<f64, _>(StandardNormal)
        }
    };

    let phase_offsets: Vec<f64> = (0..num_antennas).map(|_| perturb(0.0, sigma_p, &mut rng)).collect();
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let positions: Vec<f64> = ideal
            .positions()
            .iter()
            .map(|&mean| perturb(mean, sigma_d, &mut rng))
            .collect();
        if positions_ordered(&positions) {
            return ArrayGeometry::new(positions, phase_offsets);
        }
    }
    Err(Error::Generation(format!(
        "no ordered antenna positions after {MAX_REJECTION_ATTEMPTS} draws (sigma_d={sigma_d} vs spacing {spacing})"
    )))
}

/// `a(φ)_m = e^{j(2π d_m cos φ + Δθ_m)}`.
pub fn array_response(geometry: &ArrayGeometry, phi: f64) -> Vec<Complex64> {
    let c = phi.cos();
    geometry
        .positions()
        .iter()
        .zip(geometry.phase_offsets())
        .map(|(&d, &offset)| Complex64::cis(WAVENUMBER_TIMES_LAMBDA * d * c + offset))
        .collect()
}

/// One propagation path: complex gain and angle of arrival in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    pub gain: Complex64,
    pub aoa: f64,
}

/// `h = Σ_ℓ α_ℓ a(φ_ℓ)`.
pub fn synthesize_channel(geometry: &ArrayGeometry, paths: &[PropagationPath]) -> Result<Vec<Complex64>> {
    if paths.is_empty() {
        return Err(Error::Usage("channel needs at least one path".into()));
    }
    let mut h = vec![Complex64::new(0.0, 0.0); geometry.num_antennas()];
    for path in paths {
        if !(path.gain.re.is_finite() && path.gain.im.is_finite() && path.aoa.is_finite()) {
            return Err(Error::Usage("path gain and angle must be finite".into()));
        }
        for (hm, a) in h.iter_mut().zip(array_response(geometry, path.aoa)) {
            *hm += path.gain * a;
        }
    }
    Ok(h)
}

/// Non-empty set of equal-dimension channel vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    channels: Vec<Vec<Complex64>>,
}

impl ChannelSet {
    pub fn new(channels: Vec<Vec<Complex64>>) -> Result<Self> {
        let Some(first) = channels.first() else {
            return Err(Error::Usage("channel set must not be empty".into()));
        };
        let m = first.len();
        if m == 0 {
            return Err(Error::Usage("channels must have at least one entry".into()));
        }
        if let Some(bad) = channels.iter().position(|h| h.len() != m) {
            return Err(Error::Usage(format!(
                "channel {bad} has dimension {} but expected {m}",
                channels[bad].len()
            )));
        }
        Ok(Self { channels })
    }

    pub fn single(h: Vec<Complex64>) -> Result<Self> {
        Self::new(vec![h])
    }

    pub fn channels(&self) -> &[Vec<Complex64>] {
        &self.channels
    }

    pub fn dimension(&self) -> usize {
        self.channels[0].len()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_channels(self, path)
    }
}

/// How path angles of arrival are drawn, in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AoaModel {
    /// Every path of every user uniform in `[min_deg, max_deg]`.
    Sector { min_deg: f64, max_deg: f64 },
    /// All paths of all users within `center ± spread/2`.
    Similar { center_deg: f64, spread_deg: f64 },
    /// Every path at the same angle.
    Fixed { aoa_deg: f64 },
}

impl Default for AoaModel {
    fn default() -> Self {
        AoaModel::Sector {
            min_deg: 30.0,
            max_deg: 150.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GainModel {
    /// i.i.d. `CN(0, 1/L)` gain per path.
    Rayleigh,
    /// Path 1 carries exactly `los_power_fraction` of the total unit power; the
    /// remaining paths share the rest with random complex gains.
    DominantLos { los_power_fraction: f64 },
}

impl Default for GainModel {
    fn default() -> Self {
        GainModel::DominantLos {
            los_power_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub num_users: usize,
    pub num_paths: usize,
    pub aoa: AoaModel,
    pub gains: GainModel,
    /// Rescale each channel to `‖h‖² = M`.
    pub normalize: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            num_users: 1,
            num_paths: 5,
            aoa: AoaModel::default(),
            gains: GainModel::default(),
            normalize: false,
        }
    }
}

pub const MAX_PATHS: usize = 64;

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 {
            return Err(Error::Config("number of users must be at least 1".into()));
        }
        if !(1..=MAX_PATHS).contains(&self.num_paths) {
            return Err(Error::Config(format!(
                "number of paths must be between 1 and {MAX_PATHS}, got {}",
                self.num_paths
            )));
        }
        let angle_ok = |deg: f64| deg > 0.0 && deg < 180.0;
        match self.aoa {
            AoaModel::Sector { min_deg, max_deg } => {
                if !(angle_ok(min_deg) && angle_ok(max_deg) && min_deg <= max_deg) {
                    return Err(Error::Config(format!(
                        "AoA sector [{min_deg}, {max_deg}] must lie inside (0, 180) degrees"
                    )));
                }
            }
            AoaModel::Similar { center_deg, spread_deg } => {
                let half = spread_deg / 2.0;
                if !(spread_deg >= 0.0 && angle_ok(center_deg - half) && angle_ok(center_deg + half)) {
                    return Err(Error::Config(format!(
                        "AoA spread {spread_deg} around {center_deg} must lie inside (0, 180) degrees"
                    )));
                }
            }
            AoaModel::Fixed { aoa_deg } => {
                if !angle_ok(aoa_deg) {
                    return Err(Error::Config(format!("AoA {aoa_deg} must lie inside (0, 180) degrees")));
                }
            }
        }
        if let GainModel::DominantLos { los_power_fraction } = self.gains {
            if !(0.0..=1.0).contains(&los_power_fraction) {
                return Err(Error::Config(format!(
                    "LOS power fraction must be in [0, 1], got {los_power_fraction}"
                )));
            }
        }
        Ok(())
    }
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn draw_paths(config: &ChannelConfig, rng: &mut ChaCha8Rng) -> Vec<PropagationPath> {
    let l = config.num_paths;
    let aoas: Vec<f64> = (0..l)
        .map(|_| {
            let deg = match config.aoa {
                AoaModel::Sector { min_deg, max_deg } => min_deg + (max_deg - min_deg) * rng.random::<f64>(),
                AoaModel::Similar { center_deg, spread_deg } => {
                    center_deg + spread_deg * (rng.random::<f64>() - 0.5)
                }
                AoaModel::Fixed { aoa_deg } => aoa_deg,
            };
            deg.to_radians()
        })
        .collect();

    let gains: Vec<Complex64> = match config.gains {
        GainModel::Rayleigh => {
            let scale = 1.0 / (l as f64).sqrt();
            (0..l).map(|_| complex_normal(rng) * scale).collect()
        }
        GainModel::DominantLos { los_power_fraction } => {
            let los = Complex64::from_polar(los_power_fraction.sqrt(), 2.0 * PI * rng.random::<f64>());
            let mut gains = vec![los];
            if l > 1 {
                let scattered: Vec<Complex64> = (1..l).map(|_| complex_normal(rng)).collect();
                let power: f64 = scattered.iter().map(|g| g.norm_sqr()).sum();
                let scale = ((1.0 - los_power_fraction) / power).sqrt();
                gains.extend(scattered.into_iter().map(|g| g * scale));
            }
            gains
        }
    };

    gains
        .into_iter()
        .zip(aoas)
        .map(|(gain, aoa)| PropagationPath { gain, aoa })
        .collect()
}

/// Draws a deterministic set of user channels from the geometric model.
pub fn sample_user_channels(geometry: &ArrayGeometry, config: &ChannelConfig, seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = geometry.num_antennas() as f64;
    let channels = (0..config.num_users)
        .map(|_| {
            let paths = draw_paths(config, &mut rng);
            let mut h = synthesize_channel(geometry, &paths)?;
            if config.normalize {
                let norm = h.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if norm > 0.0 {
                    let scale = m.sqrt() / norm;
                    h.iter_mut().for_each(|c| *c *= scale);
                }
            }
            Ok(h)
        })
        .collect::<Result<Vec<_>>>()?;
    ChannelSet::new(channels)
}

/// Writes one channel per row as `re_1,im_1,…,re_M,im_M`.
pub fn save_channels(set: &ChannelSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "# {} channels, {} antennas, interleaved re/im", set.len(), set.dimension());
    for h in set.channels() {
        let row: Vec<String> = h.iter().flat_map(|c| [c.re.to_string(), c.im.to_string()]).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a channel CSV. Blank lines and lines starting with `#` are skipped.
pub fn load_channels(path: impl AsRef<Path>) -> Result<ChannelSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channels(&text, path)
}

fn parse_channels(text: &str, path: &Path) -> Result<ChannelSet> {
    let mut channels: Vec<Vec<Complex64>> = Vec::new();
    let mut last_line = 0;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values = trimmed
            .split(',')
            .map(|field| {
                let field = field.trim();
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::ingestion(path, line_no, format!("invalid number {field:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() % 2 != 0 {
            return Err(Error::ingestion(
                path,
                line_no,
                format!("odd number of values ({}); expected interleaved re/im pairs", values.len()),
            ));
        }
        let h: Vec<Complex64> = values.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        if let Some(first) = channels.first() {
            if first.len() != h.len() {
                return Err(Error::ingestion(
                    path,
                    line_no,
                    format!("row has {} antennas but earlier rows have {}", h.len(), first.len()),
                ));
            }
        }
        channels.push(h);
    }
    if channels.is_empty() {
        return Err(Error::ingestion(path, last_line, "file contains no channels"));
    }
    ChannelSet::new(channels)
}

/// `|h_i^H h_j| / (‖h_i‖‖h_j‖)`.
pub fn normalized_correlation(a: &[Complex64], b: &[Complex64]) -> f64 {
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    inner.norm() / (na * nb)
}
