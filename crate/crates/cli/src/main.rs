use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beamlearn::channel::save_channels;
use beamlearn::harness::{
    build_channels, build_geometry, default_angle_grid, evaluate_beam, load_beam, run_baselines, run_training,
    sample_beam_pattern, sweep, write_json, write_pattern_csv, ExperimentConfig, Setup, SweepRow,
};
use beamlearn::metrics::{beamsteering_codebook, save_phase_rows};
use beamlearn::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "beamlearn", version, about = "Learn quantized analog beam patterns from gain feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config sources shared by every subcommand; later sources win.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON experiment config; missing fields take their defaults.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a field by dotted path, e.g. `--set agent.gamma=0.95`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    iterations: Option<u64>,
    /// `ideal` or `impaired`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    geometry: Option<PathBuf>,
    #[arg(long)]
    channels: Option<PathBuf>,
    #[arg(long)]
    seed_geometry: Option<u64>,
    #[arg(long)]
    seed_channel: Option<u64>,
    #[arg(long)]
    seed_agent: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        config.apply_overrides(&self.overrides)?;
        if let Some(v) = self.antennas {
            config.array.antennas = v;
        }
        if let Some(v) = self.bits {
            config.array.resolution_bits = v;
        }
        if let Some(v) = self.iterations {
            config.iterations = v;
        }
        if let Some(v) = &self.mode {
            config.apply_override("array.mode", v)?;
        }
        if let Some(v) = &self.geometry {
            config.array.file = Some(v.clone());
        }
        if let Some(v) = &self.channels {
            config.channel.file = Some(v.clone());
        }
        if let Some(v) = self.seed_geometry {
            config.seeds.geometry = v;
        }
        if let Some(v) = self.seed_channel {
            config.seeds.channel = v;
        }
        if let Some(v) = self.seed_agent {
            config.seeds.agent = v;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize user channels and save them as CSV.
    GenChannels {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long, default_value = "channels.csv")]
        out: PathBuf,
    },
    /// Generate (or copy) the array geometry as JSON.
    GenGeometry {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long, default_value = "geometry.json")]
        out: PathBuf,
    },
    /// Train an agent and write curve, step log, beam and result files.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print the baseline gain table as JSON.
    Baselines {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also save the quantized steering codebook as CSV phase rows.
        #[arg(long)]
        export_codebook: Option<PathBuf>,
    },
    /// Evaluate a saved beam on the configured channels.
    EvalBeam {
        #[command(flatten)]
        config: ConfigArgs,
        /// `beam.json` or a JSON array of phases.
        #[arg(short, long)]
        beam: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Sample a beam's gain pattern over angle on the configured geometry.
    BeamPattern {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        beam: PathBuf,
        #[arg(short, long, default_value = "pattern.csv")]
        out: PathBuf,
        /// Grid step in degrees over (0, 180).
        #[arg(long)]
        step: Option<f64>,
        /// Add a fourth-root gain column for plotting.
        #[arg(long)]
        fourth_root: bool,
    },
    /// Train once per agent seed and summarize.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
        /// Agent seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0u64, 1, 2, 3, 4])]
        seeds: Vec<u64>,
        /// Runs to execute concurrently.
        #[arg(short, long, default_value_t = 1)]
        jobs: usize,
    },
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json(value, path),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn angle_grid(step: Option<f64>) -> Result<Vec<f64>> {
    let Some(step) = step else {
        return Ok(default_angle_grid());
    };
    if !(step > 0.0 && step < 180.0) {
        return Err(Error::Usage(format!("grid step must be in (0, 180) degrees, got {step}")));
    }
    let n = (180.0 / step).ceil() as usize;
    Ok((1..n).map(|i| i as f64 * step).filter(|&d| d < 180.0).collect())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenChannels { config, out } => {
            let config = config.resolve()?;
            config.validate()?;
            let geometry = build_geometry(&config)?;
            let set = build_channels(&config, &geometry)?;
            save_channels(&set, &out)?;
            eprintln!("wrote {} channel(s) to {}", set.len(), out.display());
        }
        Command::GenGeometry { config, out } => {
            let config = config.resolve()?;
            config.validate()?;
            build_geometry(&config)?.save(&out)?;
            eprintln!("wrote geometry to {}", out.display());
        }
        Command::Train { config, out } => {
            let mut config = config.resolve()?;
            if out.is_some() {
                config.output_dir = out;
            }
            let result = run_training(&config)?;
            println!(
                "best gain {:.4} ({:.2} dB, {:.3} of EGC), steering {:.3} of EGC, 90% at {:?}, 95% at {:?}, {:.1}s",
                result.best_gain,
                result.best_gain_db,
                result.best_ratio,
                result.baselines.steering.ratio,
                result.milestones.egc_90,
                result.milestones.egc_95,
                result.duration_secs
            );
        }
        Command::Baselines {
            config,
            out,
            export_codebook,
        } => {
            let config = config.resolve()?;
            let table = run_baselines(&config)?;
            if let Some(path) = export_codebook {
                let setup = Setup::new(config)?;
                let beams = beamsteering_codebook(
                    &setup.nominal_geometry()?,
                    setup.config.baselines.steering_beams,
                    Some(&setup.codebook),
                )?;
                save_phase_rows(&beams, path)?;
            }
            emit(&table, out.as_deref())?;
        }
        Command::EvalBeam { config, beam, out } => {
            let setup = Setup::new(config.resolve()?)?;
            let beam = load_beam(&beam)?;
            let eval = evaluate_beam(&beam, &setup.channels, setup.config.baselines.snr_rho)?;
            emit(&eval, out.as_deref())?;
        }
        Command::BeamPattern {
            config,
            beam,
            out,
            step,
            fourth_root,
        } => {
            let config = config.resolve()?;
            config.validate()?;
            let geometry = build_geometry(&config)?;
            let rows = sample_beam_pattern(&load_beam(&beam)?, &geometry, &angle_grid(step)?, fourth_root)?;
            write_pattern_csv(&rows, &out)?;
            eprintln!("wrote {} pattern rows to {}", rows.len(), out.display());
        }
        Command::Sweep {
            config,
            out,
            seeds,
            jobs,
        } => {
            let mut config = config.resolve()?;
            config.output_dir = Some(out);
            for r in sweep(&config, &seeds, jobs)? {
                let row = SweepRow::from(&r);
                println!(
                    "seed {}: best {:.3} of EGC, steering {:.3}, +{:.2} dB, 90% at {:?}",
                    row.seed, row.best_ratio, row.steering_ratio, row.gain_over_steering_db, row.egc_90
                );
            }
        }
    }
    Ok(())
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::Usage(_) => 2,
        Error::Ingestion { .. } | Error::Json(_) | Error::Csv(_) => 3,
        Error::Io { .. } => 4,
        Error::NonFinite(_) => 5,
        Error::SearchBudget { .. } | Error::Generation(_) => 6,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
