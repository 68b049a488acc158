use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::baselines::{baselines_for, evaluate_beam, BaselineTable};
use super::config::{ExperimentConfig, Seeds, Setup};
use super::output::{
    write_json, BeamRecord, CurveRow, RunWriter, BEAM_FILE, CHANNELS_FILE, CHECKPOINT_FILE, CONFIG_FILE,
    GEOMETRY_FILE, RESULT_FILE,
};
use crate::agent::{Agent, AgentCheckpoint, GainFeedback};
use crate::error::{Error, Result};
use crate::metrics::to_db;

/// Offset that keeps the measurement-noise stream apart from the agent's.
const MEASUREMENT_SEED_OFFSET: u64 = 0x6d65_6173_7572_6521;

/// First iterations at which the best gain reached 90% and 95% of EGC.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestones {
    pub egc_90: Option<u64>,
    pub egc_95: Option<u64>,
}

impl Milestones {
    pub fn from_curve(curve: &[CurveRow], egc: f64) -> Self {
        let first = |fraction: f64| curve.iter().find(|r| r.best_gain >= fraction * egc).map(|r| r.t);
        Self {
            egc_90: first(0.9),
            egc_95: first(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub iterations: u64,
    pub seeds: Seeds,
    /// Best measured gain (the final adaptive threshold).
    pub best_gain: f64,
    pub best_gain_db: f64,
    pub best_ratio: f64,
    pub best_beam: BeamRecord,
    /// Noiseless gain of the best beam; equals `best_gain` without measurement noise.
    pub best_beam_gain: f64,
    /// Best beam over the best steering beam, in dB.
    pub gain_over_steering_db: f64,
    pub final_gain: f64,
    pub baselines: BaselineTable,
    pub milestones: Milestones,
    pub duration_secs: f64,
    /// One row per iteration; not part of `result.json` (see `curve.csv`).
    #[serde(skip)]
    pub curve: Vec<CurveRow>,
}

impl RunResult {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        super::output::read_json(path)
    }

    /// Equality on everything except wall-clock time.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        let mut a = self.clone();
        a.duration_secs = other.duration_secs;
        a == *other
    }
}

fn save_atomically(checkpoint: &AgentCheckpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    checkpoint.save(&tmp)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Trains one agent for the configured number of iterations.
///
/// With an output directory the resolved config, geometry, channels, step
/// log, curve, periodic agent checkpoints, best beam and result are written
/// there. On a training failure the last checkpoint and the best beam so far
/// are kept and the error is returned.
pub fn run_training(config: &ExperimentConfig) -> Result<RunResult> {
    let start = Instant::now();
    let setup = Setup::new(config.clone())?;
    let config = &setup.config;
    let baselines = baselines_for(&setup)?;
    let egc = baselines.egc.gain;

    let mut writer = match &config.output_dir {
        Some(dir) => {
            let writer = RunWriter::create(dir)?;
            config.save(dir.join(CONFIG_FILE))?;
            setup.geometry.save(dir.join(GEOMETRY_FILE))?;
            setup.channels.save(dir.join(CHANNELS_FILE))?;
            Some(writer)
        }
        None => None,
    };

    let mut env = GainFeedback::new(setup.channels.clone());
    if config.measurement_noise > 0.0 {
        env = env.with_measurement_noise(
            config.measurement_noise,
            config.seeds.agent ^ MEASUREMENT_SEED_OFFSET,
        )?;
    }
    let mut agent = Agent::new(
        config.agent.clone(),
        setup.codebook.clone(),
        config.array.antennas,
        config.iterations,
        config.seeds.agent,
    )?;

    let mut curve = Vec::with_capacity(config.iterations as usize);
    for t in 1..=config.iterations {
        let log = match agent.agent_step(&mut env) {
            Ok(log) => log,
            Err(e) => {
                if let Some(w) = writer.take() {
                    let dir = w.dir().to_path_buf();
                    w.finish()?;
                    if let Some(best) = agent.tracker().best_beam() {
                        BeamRecord::new(best, &setup.codebook, agent.tracker().best_gain())?
                            .save(dir.join(BEAM_FILE))?;
                    }
                }
                return Err(e);
            }
        };
        if let Some(w) = writer.as_mut() {
            w.record(&log, t == config.iterations)?;
            if t % config.checkpoint_interval == 0 || t == config.iterations {
                save_atomically(&agent.checkpoint(), &w.dir().join(CHECKPOINT_FILE))?;
            }
        }
        curve.push(CurveRow::from(&log));
    }

    let tracker = agent.tracker();
    let best_beam = tracker
        .best_beam()
        .cloned()
        .unwrap_or_else(|| agent.state().clone());
    let best_gain = tracker.best_gain();
    let evaluation = evaluate_beam(&best_beam, &setup.channels, None)?;
    let record = BeamRecord::new(&best_beam, &setup.codebook, best_gain)?;
    let result = RunResult {
        iterations: config.iterations,
        seeds: config.seeds,
        best_gain,
        best_gain_db: to_db(best_gain),
        best_ratio: best_gain / egc,
        best_beam: record,
        best_beam_gain: evaluation.report.average,
        gain_over_steering_db: to_db(evaluation.report.average) - baselines.steering.gain_db,
        final_gain: curve.last().map_or(0.0, |r| r.gain),
        milestones: Milestones::from_curve(&curve, egc),
        baselines,
        duration_secs: start.elapsed().as_secs_f64(),
        curve,
    };
    if let Some(w) = writer {
        let dir = w.dir().to_path_buf();
        w.finish()?;
        result.best_beam.save(dir.join(BEAM_FILE))?;
        write_json(&result, dir.join(RESULT_FILE))?;
    }
    Ok(result)
}

/// One row of a seed sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub best_gain: f64,
    pub best_ratio: f64,
    pub steering_ratio: f64,
    pub gain_over_steering_db: f64,
    pub egc_90: Option<u64>,
    pub egc_95: Option<u64>,
    pub duration_secs: f64,
}

impl From<&RunResult> for SweepRow {
    fn from(r: &RunResult) -> Self {
        Self {
            seed: r.seeds.agent,
            best_gain: r.best_gain,
            best_ratio: r.best_ratio,
            steering_ratio: r.baselines.steering.ratio,
            gain_over_steering_db: r.gain_over_steering_db,
            egc_90: r.milestones.egc_90,
            egc_95: r.milestones.egc_95,
            duration_secs: r.duration_secs,
        }
    }
}

/// Runs one training per agent seed, `jobs` at a time. Each run writes to
/// `<output_dir>/seed-<s>` and the summary goes to `<output_dir>/sweep.csv`.
pub fn sweep(config: &ExperimentConfig, agent_seeds: &[u64], jobs: usize) -> Result<Vec<RunResult>> {
    if agent_seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    config.validate()?;
    let configs: Vec<ExperimentConfig> = agent_seeds
        .iter()
        .map(|&seed| {
            let mut c = config.clone();
            c.seeds.agent = seed;
            c.output_dir = config.output_dir.as_ref().map(|d| d.join(format!("seed-{seed}")));
            c
        })
        .collect();

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunResult>>>> = Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, configs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(c) = configs.get(i) else { break };
                let outcome = run_training(c);
                slots.lock().expect("sweep worker panicked")[i] = Some(outcome);
            });
        }
    });
    let results = slots
        .into_inner()
        .expect("sweep worker panicked")
        .into_iter()
        .map(|slot| slot.expect("every seed was run"))
        .collect::<Result<Vec<_>>>()?;

    if let Some(dir) = &config.output_dir {
        let path = dir.join("sweep.csv");
        let mut writer = csv::Writer::from_path(&path)?;
        for r in &results {
            writer.serialize(SweepRow::from(r))?;
        }
        writer.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(results)
}
