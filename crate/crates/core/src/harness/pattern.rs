use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::{beam_from_phases, PhaseVector};
use crate::channel::{array_response, ArrayGeometry};
use crate::error::{Error, Result};
use crate::metrics::{gain, to_db};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub phi_deg: f64,
    pub gain: f64,
    pub gain_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_fourth_root: Option<f64>,
}

/// 1° steps over the open interval (0°, 180°).
pub fn default_angle_grid() -> Vec<f64> {
    (1..180).map(f64::from).collect()
}

/// `g(φ) = |w^H a(φ)|²` on the given geometry for each angle in degrees.
pub fn sample_beam_pattern(
    beam: &PhaseVector,
    geometry: &ArrayGeometry,
    grid_deg: &[f64],
    fourth_root: bool,
) -> Result<Vec<PatternRow>> {
    if grid_deg.is_empty() {
        return Err(Error::Usage("beam pattern grid is empty".into()));
    }
    if let Some(bad) = grid_deg.iter().find(|&&d| !(d > 0.0 && d < 180.0)) {
        return Err(Error::Usage(format!("pattern angle {bad} is outside (0, 180) degrees")));
    }
    let w = beam_from_phases(beam);
    grid_deg
        .iter()
        .map(|&deg| {
            let g = gain(&w, &array_response(geometry, deg.to_radians()))?;
            Ok(PatternRow {
                phi_deg: deg,
                gain: g,
                gain_db: to_db(g),
                gain_fourth_root: fourth_root.then(|| g.powf(0.25)),
            })
        })
        .collect()
}

pub fn write_pattern_csv(rows: &[PatternRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    let with_root = rows.iter().any(|r| r.gain_fourth_root.is_some());
    if with_root {
        writer.write_record(["phi_deg", "gain", "gain_db", "gain_fourth_root"])?;
    } else {
        writer.write_record(["phi_deg", "gain", "gain_db"])?;
    }
    for r in rows {
        let mut record = vec![r.phi_deg.to_string(), r.gain.to_string(), r.gain_db.to_string()];
        if with_root {
            record.push(r.gain_fourth_root.map(|v| v.to_string()).unwrap_or_default());
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pattern_csv(path: impl AsRef<Path>) -> Result<Vec<PatternRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize::<PatternRow>()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::ingestion(path, i + 2, e.to_string())))
        .collect()
}
