use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::StepLog;
use crate::array::{build_codebook, PhaseCodebook, PhaseVector};
use crate::error::{Error, Result};

pub const CURVE_FILE: &str = "curve.csv";
pub const STEP_LOG_FILE: &str = "steps.jsonl";
pub const RESULT_FILE: &str = "result.json";
pub const BEAM_FILE: &str = "beam.json";
pub const GEOMETRY_FILE: &str = "geometry.json";
pub const CONFIG_FILE: &str = "config.json";
pub const CHANNELS_FILE: &str = "channels.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
/// Every this many iterations a row goes into the curve CSV.
pub const CURVE_STRIDE: u64 = 100;

/// A quantized beam with the codebook it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamRecord {
    pub codebook_id: String,
    pub resolution_bits: u32,
    pub phases: Vec<f64>,
    pub indices: Vec<usize>,
    /// Gain measured when the beam was found.
    pub gain: f64,
}

impl BeamRecord {
    pub fn new(beam: &PhaseVector, codebook: &PhaseCodebook, gain: f64) -> Result<Self> {
        let indices = beam
            .indices(codebook)
            .ok_or_else(|| Error::Usage(format!("beam is not on the {} codebook", codebook.id())))?;
        Ok(Self {
            codebook_id: codebook.id(),
            resolution_bits: codebook.resolution_bits(),
            phases: beam.phases().to_vec(),
            indices,
            gain,
        })
    }

    /// Rebuilds the phase vector from the indices, checking both agree.
    pub fn to_phase_vector(&self) -> Result<PhaseVector> {
        let codebook = build_codebook(self.resolution_bits)?;
        if codebook.id() != self.codebook_id {
            return Err(Error::Usage(format!(
                "codebook id {} does not match {} bits",
                self.codebook_id, self.resolution_bits
            )));
        }
        let beam = PhaseVector::from_indices(&codebook, &self.indices)?;
        if beam.phases() != self.phases.as_slice() {
            return Err(Error::Usage("beam phases disagree with their codebook indices".into()));
        }
        Ok(beam)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }
}

/// Loads a beam from either a `beam.json` record or a bare JSON array of phases.
pub fn load_beam(path: impl AsRef<Path>) -> Result<PhaseVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(phases) = serde_json::from_str::<Vec<f64>>(&text) {
        return Ok(PhaseVector::new(phases));
    }
    serde_json::from_str::<BeamRecord>(&text)?.to_phase_vector()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub t: u64,
    pub gain: f64,
    pub best_gain: f64,
    pub reward: i8,
    pub beta: f64,
}

impl From<&StepLog> for CurveRow {
    fn from(log: &StepLog) -> Self {
        Self {
            t: log.t,
            gain: log.gain,
            best_gain: log.best_gain,
            reward: log.reward.value(),
            beta: log.beta,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Streams the full step log and the decimated curve while training runs.
pub struct RunWriter {
    dir: PathBuf,
    steps: BufWriter<File>,
    curve: csv::Writer<File>,
}

impl RunWriter {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let steps_path = dir.join(STEP_LOG_FILE);
        let steps = File::create(&steps_path).map_err(|e| Error::io(&steps_path, e))?;
        let curve = csv::Writer::from_path(dir.join(CURVE_FILE))?;
        Ok(Self {
            dir,
            steps: BufWriter::new(steps),
            curve,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends a step; the curve keeps every `CURVE_STRIDE`-th row and the last one.
    pub fn record(&mut self, log: &StepLog, last: bool) -> Result<()> {
        serde_json::to_writer(&mut self.steps, log)?;
        self.steps
            .write_all(b"\n")
            .map_err(|e| Error::io(self.dir.join(STEP_LOG_FILE), e))?;
        if log.t % CURVE_STRIDE == 0 || last {
            self.curve.serialize(CurveRow::from(log))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.steps
            .flush()
            .map_err(|e| Error::io(self.dir.join(STEP_LOG_FILE), e))?;
        self.curve.flush().map_err(|e| Error::io(self.dir.join(CURVE_FILE), e))
    }
}

pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<Vec<CurveRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize::<CurveRow>()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::ingestion(path, i + 2, e.to_string())))
        .collect()
}

pub fn read_step_log(path: impl AsRef<Path>) -> Result<Vec<StepLog>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::ingestion(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Reward;

    #[test]
    fn beam_record_round_trip_and_checks() {
        let cb = build_codebook(2).unwrap();
        let beam = PhaseVector::from_indices(&cb, &[0, 3, 1]).unwrap();
        let record = BeamRecord::new(&beam, &cb, 1.5).unwrap();
        assert_eq!(record.codebook_id, "uniform-2bit");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("beam.json");
        record.save(&path).unwrap();
        assert_eq!(BeamRecord::load(&path).unwrap(), record);
        assert_eq!(load_beam(&path).unwrap(), beam);

        let mut tampered = record.clone();
        tampered.indices[0] = 2;
        assert!(tampered.to_phase_vector().is_err());
        assert!(BeamRecord::new(&PhaseVector::new(vec![0.1]), &cb, 0.0).is_err());

        let bare = dir.path().join("bare.json");
        fs::write(&bare, "[0.5, -0.5]").unwrap();
        assert_eq!(load_beam(&bare).unwrap().phases(), &[0.5, -0.5]);
    }

    #[test]
    fn writer_decimates_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut writer = RunWriter::create(dir.path().join("run")).unwrap();
        let logs: Vec<StepLog> = (1..=250)
            .map(|t| StepLog {
                t,
                reward: Reward::Neutral,
                gain: t as f64 * 0.1,
                best_gain: t as f64 * 0.1,
                beta: t as f64 * 0.1,
                critic_loss: (t > 10).then_some(0.5),
                actor_objective: None,
                sigma: 1.0,
                action: vec![1, 2],
            })
            .collect();
        for log in &logs {
            writer.record(log, log.t == 250).unwrap();
        }
        writer.finish().unwrap();
        let run = dir.path().join("run");
        assert_eq!(read_step_log(run.join(STEP_LOG_FILE)).unwrap(), logs);
        let curve = read_curve_csv(run.join(CURVE_FILE)).unwrap();
        let ts: Vec<u64> = curve.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![100, 200, 250]);
        assert_eq!(curve[0], CurveRow::from(&logs[99]));
    }

    #[test]
    fn malformed_step_log_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("steps.jsonl");
        fs::write(&path, "{\"t\": 1}\n").unwrap();
        assert!(matches!(read_step_log(&path), Err(Error::Ingestion { line: 1, .. })));
    }
}
