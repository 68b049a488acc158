use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::AgentConfig;
use crate::array::{build_codebook, PhaseCodebook, MAX_RESOLUTION_BITS};
use crate::channel::{
    load_channels, sample_impaired_geometry, sample_user_channels, ArrayGeometry, ChannelConfig, ChannelSet,
    DEFAULT_SPACING,
};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_SEARCH_BUDGET;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryMode {
    Ideal,
    Impaired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub antennas: usize,
    pub resolution_bits: u32,
    pub mode: GeometryMode,
    /// Nominal spacing in wavelengths.
    pub spacing: f64,
    /// Position jitter std in wavelengths (impaired mode).
    pub position_std: f64,
    /// Phase mismatch std in radians (impaired mode).
    pub phase_std: f64,
    /// Load the geometry from a JSON file instead of generating it.
    pub file: Option<PathBuf>,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            antennas: 32,
            resolution_bits: 3,
            mode: GeometryMode::Ideal,
            spacing: DEFAULT_SPACING,
            position_std: 0.1,
            phase_std: 0.32 * PI,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// Channel CSV to train on; when absent channels are synthesized.
    pub file: Option<PathBuf>,
    pub synthetic: ChannelConfig,
}

/// Independent seeds so impairments can be held fixed while the agent varies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub geometry: u64,
    pub channel: u64,
    pub agent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub steering_beams: usize,
    /// Largest beam space the exhaustive search may enumerate.
    pub search_budget: u64,
    /// Transmit SNR used to report post-combining SNR, if set.
    pub snr_rho: Option<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            steering_beams: 32,
            search_budget: DEFAULT_SEARCH_BUDGET as u64,
            snr_rho: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub array: ArrayConfig,
    pub channel: ChannelSection,
    pub agent: AgentConfig,
    pub iterations: u64,
    pub seeds: Seeds,
    pub baselines: BaselineConfig,
    /// Std of additive Gaussian noise on the measured gain; 0 disables it.
    pub measurement_noise: f64,
    /// Save an agent checkpoint every this many iterations.
    pub checkpoint_interval: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            array: ArrayConfig::default(),
            channel: ChannelSection::default(),
            agent: AgentConfig::default(),
            iterations: 40_000,
            seeds: Seeds::default(),
            baselines: BaselineConfig::default(),
            measurement_noise: 0.0,
            checkpoint_interval: 1_000,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Sets the field at a dotted path such as `agent.gamma` or
    /// `seeds.agent`. The value is parsed as JSON, falling back to a plain
    /// string, so `array.mode=impaired` and `channel.file=data.csv` work.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut root = serde_json::to_value(&*self)?;
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|obj| obj.get_mut(part))
                .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
        }
        *slot = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        *self = serde_json::from_value(root)
            .map_err(|e| Error::Config(format!("invalid value {value:?} for {key}: {e}")))?;
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for item in overrides {
            let item = item.as_ref();
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
            self.apply_override(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn codebook(&self) -> Result<PhaseCodebook> {
        build_codebook(self.array.resolution_bits)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.array;
        if a.antennas == 0 {
            return Err(Error::Config("array needs at least one antenna".into()));
        }
        if !(1..=MAX_RESOLUTION_BITS).contains(&a.resolution_bits) {
            return Err(Error::Config(format!(
                "resolution must be between 1 and {MAX_RESOLUTION_BITS} bits, got {}",
                a.resolution_bits
            )));
        }
        if !(a.spacing > 0.0 && a.spacing.is_finite()) {
            return Err(Error::Config(format!("spacing must be positive, got {}", a.spacing)));
        }
        if !(a.position_std >= 0.0 && a.phase_std >= 0.0 && a.position_std.is_finite() && a.phase_std.is_finite()) {
            return Err(Error::Config("impairment deviations must be non-negative".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.checkpoint_interval == 0 {
            return Err(Error::Config("checkpoint interval must be positive".into()));
        }
        if !(self.measurement_noise >= 0.0 && self.measurement_noise.is_finite()) {
            return Err(Error::Config(format!(
                "measurement noise must be non-negative, got {}",
                self.measurement_noise
            )));
        }
        if self.baselines.steering_beams == 0 {
            return Err(Error::Config("steering codebook needs at least one beam".into()));
        }
        if let Some(rho) = self.baselines.snr_rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::Config(format!("SNR scale must be positive, got {rho}")));
            }
        }
        for file in [&a.file, &self.channel.file].into_iter().flatten() {
            if !file.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", file.display())));
            }
        }
        if self.channel.file.is_none() {
            self.channel.synthetic.validate()?;
        }
        self.agent.validate(&self.codebook()?)
    }
}

/// Everything a run needs, resolved from a validated config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub codebook: PhaseCodebook,
    pub geometry: ArrayGeometry,
    pub channels: ChannelSet,
}

pub fn build_geometry(config: &ExperimentConfig) -> Result<ArrayGeometry> {
    let a = &config.array;
    let geometry = match (&a.file, a.mode) {
        (Some(path), _) => ArrayGeometry::load(path)?,
        (None, GeometryMode::Ideal) => ArrayGeometry::ideal(a.antennas, a.spacing)?,
        (None, GeometryMode::Impaired) => {
            sample_impaired_geometry(a.antennas, a.spacing, a.position_std, a.phase_std, config.seeds.geometry)?
        }
    };
    if geometry.num_antennas() != a.antennas {
        return Err(Error::Config(format!(
            "geometry has {} antennas but the config asks for {}",
            geometry.num_antennas(),
            a.antennas
        )));
    }
    Ok(geometry)
}

pub fn build_channels(config: &ExperimentConfig, geometry: &ArrayGeometry) -> Result<ChannelSet> {
    let set = match &config.channel.file {
        Some(path) => load_channels(path)?,
        None => sample_user_channels(geometry, &config.channel.synthetic, config.seeds.channel)?,
    };
    if set.dimension() != config.array.antennas {
        return Err(Error::Config(format!(
            "channels have {} antennas but the array has {}",
            set.dimension(),
            config.array.antennas
        )));
    }
    Ok(set)
}

impl Setup {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let codebook = config.codebook()?;
        let geometry = build_geometry(&config)?;
        let channels = build_channels(&config, &geometry)?;
        Ok(Self {
            config,
            codebook,
            geometry,
            channels,
        })
    }

    /// The ideal array with the configured spacing; classical codebooks are
    /// designed for it regardless of the true geometry.
    pub fn nominal_geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::ideal(self.config.array.antennas, self.config.array.spacing)
    }
}
