//! Command-line front end: subcommands, parallel job control and exit codes.

pub mod config;
pub mod output;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use config::ScenarioConfig;
pub use output::{write_outputs, Report};
pub use scenario::{run_beam_wave, run_crack_scenarios, run_dt_study, run_rod_wave, ScenarioOutput};

use crate::elements::Structure;
use crate::signal::locate_crack;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "bswi-wave", version, about = "1D guided-wave simulation with BSWI elements and precise integration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for sweep entries (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Accepted for interface compatibility; every run is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rod wave propagation (and optional diameter sweep).
    RodWave(RunArgs),
    /// Timoshenko beam wave propagation.
    BeamWave(RunArgs),
    /// PIM step-size study against the finest step.
    DtStudy(RunArgs),
    /// One simulation per crack position with crack localization.
    CrackSweep(RunArgs),
    /// Locate a crack from an existing sensor CSV.
    CrackLocate(LocateArgs),
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    /// Scenario config supplying length, burst and detection settings.
    #[arg(long)]
    pub config: PathBuf,
    /// Sensor CSV with a `time_s` column.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Column label to analyze (defaults to the first data column).
    #[arg(long)]
    pub channel: Option<String>,
    /// Wave velocity in m/s (defaults to the bar velocity for rods).
    #[arg(long)]
    pub velocity: Option<f64>,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Parameter(_) | Error::Mesh(_) | Error::Domain { .. } | Error::NoCrack => 2,
        Error::Divergence { .. } | Error::Numerical(_) | Error::Resonance { .. } => 3,
        Error::Construction(_) | Error::NoReflection(_) | Error::Io { .. } => 1,
    }
}

fn out_dir(cfg: &ScenarioConfig, out: &Option<PathBuf>) -> PathBuf {
    out.clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Writes a scenario's record and report to `dir`, and each auxiliary
/// record to its own subdirectory.
pub fn write_scenario(result: &ScenarioOutput, dir: &Path) -> Result<()> {
    match &result.record {
        Some(rec) => {
            write_outputs(rec, Some(&result.report), dir)?;
        }
        None => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("report.txt");
            fs::write(&path, result.report.render()).map_err(|e| Error::io(&path, e))?;
        }
    }
    for (name, rec) in &result.children {
        write_outputs(rec, None, &dir.join(name))?;
    }
    Ok(())
}

fn locate(args: &LocateArgs) -> Result<ScenarioOutput> {
    let cfg = ScenarioConfig::load(&args.config)?;
    let rec = output::read_sensor_csv(&args.input)?;
    let channel = match &args.channel {
        Some(label) => rec
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::config("channel", format!("no column `{label}` in the input")))?,
        None => 0,
    };
    let velocity = match (args.velocity, cfg.structure) {
        (Some(v), _) if v > 0.0 => v,
        (Some(v), _) => return Err(Error::config("velocity", format!("must be positive, got {v}"))),
        (None, Structure::Rod) => cfg.material()?.bar_velocity(),
        (None, Structure::Beam) => {
            return Err(Error::config("velocity", "beams need an explicit --velocity"))
        }
    };
    let est = locate_crack(&rec, channel, cfg.geometry.length, velocity, &cfg.detect_options())?;
    let mut report = Report::new();
    report.text("scenario", "crack-locate");
    report.text("channel", rec.labels[channel].clone());
    report.num("dt_s", rec.dt);
    report.num("velocity_mps", velocity);
    report.num("t_direct_s", est.t_direct);
    report.num("t_crack_s", est.t_crack);
    report.num("crack_estimate_m", est.position);
    Ok(ScenarioOutput {
        record: None,
        report,
        children: Vec::new(),
    })
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    if cli.seed.is_some() {
        log::info!("--seed has no effect: all runs are deterministic");
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::config("--jobs", "must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Construction(format!("thread pool: {e}")))?;

    pool.install(|| {
        let start = Instant::now();
        let (result, dir) = match &cli.command {
            Command::Validate { config } => {
                ScenarioConfig::load(config)?;
                println!("{}: ok", config.display());
                return Ok(());
            }
            Command::CrackLocate(args) => {
                let result = locate(args)?;
                let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
                (result, dir)
            }
            Command::RodWave(a) | Command::BeamWave(a) | Command::DtStudy(a) | Command::CrackSweep(a) => {
                let cfg = ScenarioConfig::load(&a.config)?;
                let result = match &cli.command {
                    Command::RodWave(_) => run_rod_wave(&cfg)?,
                    Command::BeamWave(_) => run_beam_wave(&cfg)?,
                    Command::DtStudy(_) => run_dt_study(&cfg)?,
                    _ => run_crack_scenarios(&cfg)?,
                };
                (result, out_dir(&cfg, &a.out))
            }
        };
        write_scenario(&result, &dir)?;
        let timing = dir.join("timing.txt");
        fs::write(&timing, format!("wall_time_s={:.3}\n", start.elapsed().as_secs_f64()))
            .map_err(|e| Error::io(&timing, e))?;
        print!("{}", result.report.render());
        Ok(())
    })
}
