//! Python bindings. Structured results (logs, reports, run results) cross the
//! boundary as plain dicts decoded from their JSON form.

use beamlearn_core::agent::{Agent as CoreAgent, AgentConfig, GainFeedback};
use beamlearn_core::array::{self, PhaseCodebook as CoreCodebook, PhaseVector};
use beamlearn_core::channel::{self, ArrayGeometry as CoreGeometry, ChannelConfig, ChannelSet as CoreChannelSet};
use beamlearn_core::harness::{self, ExperimentConfig};
use beamlearn_core::metrics;
use beamlearn_core::Error;
use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::SearchBudget { .. } => PyValueError::new_err(e.to_string()),
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for beamlearn_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_json<T: for<'de> serde::Deserialize<'de>>(text: Option<&str>, what: &str) -> PyResult<T>
where
    T: Default,
{
    match text {
        None => Ok(T::default()),
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("invalid {what}: {e}"))),
    }
}

/// Uniform `r`-bit phase codebook.
#[pyclass(module = "beamlearn", frozen, from_py_object)]
#[derive(Clone)]
struct PhaseCodebook {
    inner: CoreCodebook,
}

#[pymethods]
impl PhaseCodebook {
    #[new]
    fn new(bits: u32) -> PyResult<Self> {
        Ok(Self {
            inner: array::build_codebook(bits).py_err()?,
        })
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn step(&self) -> f64 {
        self.inner.step()
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id()
    }

    #[getter]
    fn bits(&self) -> u32 {
        self.inner.resolution_bits()
    }

    fn nearest(&self, theta: f64) -> f64 {
        self.inner.nearest(theta)
    }

    fn quantize(&self, phases: Vec<f64>) -> Vec<f64> {
        array::quantize_phases(&PhaseVector::new(phases), &self.inner)
            .phases()
            .to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PhaseCodebook({})", self.inner.resolution_bits())
    }
}

/// Antenna positions (wavelengths) and fixed per-antenna phase offsets.
#[pyclass(module = "beamlearn", frozen, from_py_object)]
#[derive(Clone)]
struct ArrayGeometry {
    inner: CoreGeometry,
}

#[pymethods]
impl ArrayGeometry {
    #[new]
    fn new(positions: Vec<f64>, phase_offsets: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreGeometry::new(positions, phase_offsets).py_err()?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (antennas, spacing = channel::DEFAULT_SPACING))]
    fn ideal(antennas: usize, spacing: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreGeometry::ideal(antennas, spacing).py_err()?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (antennas, position_std, phase_std, seed, spacing = channel::DEFAULT_SPACING))]
    fn impaired(antennas: usize, position_std: f64, phase_std: f64, seed: u64, spacing: f64) -> PyResult<Self> {
        Ok(Self {
            inner: channel::sample_impaired_geometry(antennas, spacing, position_std, phase_std, seed).py_err()?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreGeometry::from_json(text).py_err()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py_err()
    }

    #[getter]
    fn positions(&self) -> Vec<f64> {
        self.inner.positions().to_vec()
    }

    #[getter]
    fn phase_offsets(&self) -> Vec<f64> {
        self.inner.phase_offsets().to_vec()
    }

    /// Array response for an arrival angle in radians.
    fn response(&self, phi: f64) -> Vec<Complex64> {
        channel::array_response(&self.inner, phi)
    }

    fn __len__(&self) -> usize {
        self.inner.num_antennas()
    }
}

/// One or more user channels of equal dimension.
#[pyclass(module = "beamlearn", frozen, from_py_object)]
#[derive(Clone)]
struct ChannelSet {
    inner: CoreChannelSet,
}

#[pymethods]
impl ChannelSet {
    #[new]
    fn new(channels: Vec<Vec<Complex64>>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreChannelSet::new(channels).py_err()?,
        })
    }

    /// Draws channels from the geometric model; `config` is the JSON form of
    /// the channel settings (defaults when omitted).
    #[staticmethod]
    #[pyo3(signature = (geometry, seed, config = None))]
    fn synthesize(geometry: &ArrayGeometry, seed: u64, config: Option<&str>) -> PyResult<Self> {
        let config: ChannelConfig = parse_json(config, "channel config")?;
        Ok(Self {
            inner: channel::sample_user_channels(&geometry.inner, &config, seed).py_err()?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: channel::load_channels(path).py_err()?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).py_err()
    }

    fn channels(&self) -> Vec<Vec<Complex64>> {
        self.inner.channels().to_vec()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn phases(values: Vec<f64>) -> PhaseVector {
    PhaseVector::new(values)
}

/// `|w^H h|²` for the unit-norm beam with the given phases.
#[pyfunction]
fn gain(phases_rad: Vec<f64>, h: Vec<Complex64>) -> PyResult<f64> {
    metrics::gain(&array::beam_from_phases(&phases(phases_rad)), &h).py_err()
}

#[pyfunction]
fn average_gain(phases_rad: Vec<f64>, channels: &ChannelSet) -> PyResult<f64> {
    metrics::average_gain(&array::beam_from_phases(&phases(phases_rad)), &channels.inner).py_err()
}

/// `(phases, gain)` of the equal-gain-combining beam.
#[pyfunction]
fn egc_beam(h: Vec<Complex64>) -> PyResult<(Vec<f64>, f64)> {
    let (p, g) = metrics::egc_beam(&h).py_err()?;
    Ok((p.phases().to_vec(), g))
}

#[pyfunction]
fn egc_upper_bound(channels: &ChannelSet) -> PyResult<f64> {
    metrics::egc_upper_bound(&channels.inner).py_err()
}

#[pyfunction]
fn quantized_egc_beam(h: Vec<Complex64>, codebook: &PhaseCodebook) -> PyResult<(Vec<f64>, f64)> {
    let (p, g) = metrics::quantized_egc_beam(&h, &codebook.inner).py_err()?;
    Ok((p.phases().to_vec(), g))
}

/// Steering beams designed for `geometry`, quantized when a codebook is given.
#[pyfunction]
#[pyo3(signature = (geometry, beams = 32, codebook = None))]
fn steering_codebook(
    geometry: &ArrayGeometry,
    beams: usize,
    codebook: Option<&PhaseCodebook>,
) -> PyResult<Vec<Vec<f64>>> {
    let out = metrics::beamsteering_codebook(&geometry.inner, beams, codebook.map(|c| &c.inner)).py_err()?;
    Ok(out.into_iter().map(|b| b.phases().to_vec()).collect())
}

/// `(phases, gain, evaluated)` of the best quantized beam.
#[pyfunction]
#[pyo3(signature = (channels, codebook, budget = 10_000_000))]
fn exhaustive_search(channels: &ChannelSet, codebook: &PhaseCodebook, budget: u64) -> PyResult<(Vec<f64>, f64, u64)> {
    let out = metrics::exhaustive_search(&channels.inner, &codebook.inner, u128::from(budget)).py_err()?;
    Ok((out.beam.phases().to_vec(), out.gain, out.evaluated as u64))
}

/// Rows of `(phi_deg, gain, gain_db)` over the given angles (default 1°..179°).
#[pyfunction]
#[pyo3(signature = (phases_rad, geometry, angles_deg = None))]
fn beam_pattern(
    phases_rad: Vec<f64>,
    geometry: &ArrayGeometry,
    angles_deg: Option<Vec<f64>>,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let grid = angles_deg.unwrap_or_else(harness::default_angle_grid);
    let rows = harness::sample_beam_pattern(&phases(phases_rad), &geometry.inner, &grid, false).py_err()?;
    Ok(rows.into_iter().map(|r| (r.phi_deg, r.gain, r.gain_db)).collect())
}

#[pyfunction]
#[pyo3(signature = (phases_rad, channels, rho = None))]
fn evaluate_beam<'py>(
    py: Python<'py>,
    phases_rad: Vec<f64>,
    channels: &ChannelSet,
    rho: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let eval = harness::evaluate_beam(&phases(phases_rad), &channels.inner, rho).py_err()?;
    to_dict(py, &eval)
}

/// DDPG agent that learns one quantized beam from gain feedback.
#[pyclass(module = "beamlearn", unsendable)]
struct Agent {
    inner: CoreAgent,
    env: GainFeedback,
}

#[pymethods]
impl Agent {
    /// `config` is the JSON form of the agent hyperparameters.
    #[new]
    #[pyo3(signature = (channels, bits, total_steps, seed = 0, config = None, measurement_noise = 0.0))]
    fn new(
        channels: &ChannelSet,
        bits: u32,
        total_steps: u64,
        seed: u64,
        config: Option<&str>,
        measurement_noise: f64,
    ) -> PyResult<Self> {
        let config: AgentConfig = parse_json(config, "agent config")?;
        let codebook = array::build_codebook(bits).py_err()?;
        let inner = CoreAgent::new(config, codebook, channels.inner.dimension(), total_steps, seed).py_err()?;
        let env = GainFeedback::new(channels.inner.clone())
            .with_measurement_noise(measurement_noise, seed)
            .py_err()?;
        Ok(Self { inner, env })
    }

    /// Runs one iteration and returns its log record.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let log = self.inner.agent_step(&mut self.env).py_err()?;
        to_dict(py, &log)
    }

    /// Runs `n` iterations; returns the best gain after each.
    fn run(&mut self, n: u64) -> PyResult<Vec<f64>> {
        (0..n)
            .map(|_| self.inner.agent_step(&mut self.env).map(|l| l.best_gain).py_err())
            .collect()
    }

    #[getter]
    fn best_gain(&self) -> f64 {
        self.inner.tracker().best_gain()
    }

    #[getter]
    fn best_beam(&self) -> Option<Vec<f64>> {
        self.inner.tracker().best_beam().map(|b| b.phases().to_vec())
    }

    #[getter]
    fn state(&self) -> Vec<f64> {
        self.inner.state().phases().to_vec()
    }

    #[getter]
    fn steps_taken(&self) -> u64 {
        self.inner.steps_taken()
    }

    /// Actor output for a state, before noise and quantization.
    fn predict(&self, state: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict(&phases(state)).py_err()
    }

    fn checkpoint_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.checkpoint()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

fn experiment_config(config: Option<&str>, overrides: Vec<String>) -> PyResult<ExperimentConfig> {
    let mut config = match config {
        Some(text) => ExperimentConfig::from_json(text).py_err()?,
        None => ExperimentConfig::default(),
    };
    config.apply_overrides(&overrides).py_err()?;
    Ok(config)
}

/// JSON text of the default experiment config.
#[pyfunction]
fn default_config() -> PyResult<String> {
    ExperimentConfig::default().to_json().py_err()
}

/// Full training run; returns the result dict with a `curve` list of
/// `(t, gain, best_gain, reward, beta)` tuples added.
#[pyfunction]
#[pyo3(signature = (config = None, overrides = Vec::new()))]
fn run_training<'py>(py: Python<'py>, config: Option<&str>, overrides: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let config = experiment_config(config, overrides)?;
    let result = py.detach(|| harness::run_training(&config)).py_err()?;
    let dict = to_dict(py, &result)?;
    let curve: Vec<(u64, f64, f64, i8, f64)> = result
        .curve
        .iter()
        .map(|r| (r.t, r.gain, r.best_gain, r.reward, r.beta))
        .collect();
    dict.set_item("curve", curve)?;
    Ok(dict)
}

#[pyfunction]
#[pyo3(signature = (config = None, overrides = Vec::new()))]
fn run_baselines<'py>(py: Python<'py>, config: Option<&str>, overrides: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let config = experiment_config(config, overrides)?;
    let table = harness::run_baselines(&config).py_err()?;
    to_dict(py, &table)
}

#[pymodule]
pub fn beamlearn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PhaseCodebook>()?;
    m.add_class::<ArrayGeometry>()?;
    m.add_class::<ChannelSet>()?;
    m.add_class::<Agent>()?;
    m.add_function(wrap_pyfunction!(gain, m)?)?;
    m.add_function(wrap_pyfunction!(average_gain, m)?)?;
    m.add_function(wrap_pyfunction!(egc_beam, m)?)?;
    m.add_function(wrap_pyfunction!(egc_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(quantized_egc_beam, m)?)?;
    m.add_function(wrap_pyfunction!(steering_codebook, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_search, m)?)?;
    m.add_function(wrap_pyfunction!(beam_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_beam, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_training, m)?)?;
    m.add_function(wrap_pyfunction!(run_baselines, m)?)?;
    Ok(())
}
