//! Experiment orchestration: configuration, training runs, baselines,
//! beam patterns and result files.

mod baselines;
mod config;
mod output;
mod pattern;
mod training;

pub use baselines::{baseline_table, evaluate_beam, run_baselines, BaselineEntry, BaselineTable, BeamEvaluation};
pub use config::{
    build_channels, build_geometry, ArrayConfig, BaselineConfig, ChannelSection, ExperimentConfig, GeometryMode,
    Seeds, Setup,
};
pub use output::{
    load_beam, read_curve_csv, read_json, read_step_log, write_json, BeamRecord, CurveRow, RunWriter, BEAM_FILE,
    CHANNELS_FILE, CHECKPOINT_FILE, CONFIG_FILE, CURVE_FILE, CURVE_STRIDE, GEOMETRY_FILE, RESULT_FILE, STEP_LOG_FILE,
};
pub use pattern::{default_angle_grid, read_pattern_csv, sample_beam_pattern, write_pattern_csv, PatternRow};
pub use training::{run_training, sweep, Milestones, RunResult, SweepRow};
