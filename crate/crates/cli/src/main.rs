use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bbci::config::{load_config, parse_observation, StudyConfig};
use bbci::experiments::{run_coverage_study, Scenario};
use bbci::geometry::functional_extremes;
use bbci::intervals::{intervals_for_observation, sample_design};
use bbci::model::simulate_seeded;
use bbci::samplers::range_occupancy;
use bbci::stats::derive_seed;
use bbci::{BergerBoosSet, Error};
use clap::{Parser, Subcommand};
use log::info;
use nalgebra::DVector;
use serde_json::json;

const OCCUPANCY_BINS: usize = 20;

#[derive(Parser)]
#[command(name = "bbci", version, about = "Coverage studies and confidence intervals for constrained linear inverse problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for output files (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Paper-scale sizes for scenarios that have them.
    #[arg(long, global = true)]
    full: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a coverage study and writes the rows CSV and summary JSON.
    RunStudy { config: PathBuf },
    /// Computes the configured intervals for one observation.
    Interval {
        config: PathBuf,
        /// Observation: a file path, or whitespace/comma separated numbers.
        #[arg(long, allow_hyphen_values = true)]
        y: String,
    },
    /// Samples the Berger–Boos set of one simulated observation and reports
    /// how well the functional range is covered.
    SamplerDiag { config: PathBuf },
}

/// A failure with the process exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn new(code: u8, err: impl Into<anyhow::Error>) -> Self {
        Failure { code, err: err.into() }
    }
}

fn code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Dimension(_) => 2,
        Error::StudyAborted { .. } => 3,
        e if e.is_unbounded() => 4,
        _ => 1,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(code_for(&e), e)
    }
}

fn io_failure(e: impl Into<anyhow::Error>) -> Failure {
    Failure::new(1, e)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let result = match &cli.command {
        Command::RunStudy { config } => run_study(&cli, config, &out),
        Command::Interval { config, y } => interval(&cli, config, y),
        Command::SamplerDiag { config } => sampler_diag(&cli, config, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if f.code == 4 {
                eprintln!("interval unbounded: {:#}", f.err);
            } else {
                eprintln!("error: {:#}", f.err);
            }
            ExitCode::from(f.code)
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<(StudyConfig, Scenario), Failure> {
    let cfg = load_config(path)?;
    let mut s = cfg.scenario(cli.full)?;
    if let Some(seed) = cli.seed {
        s.master_seed = seed;
    }
    Ok((cfg, s))
}

fn output_path(out: &Path, configured: Option<&PathBuf>, default: String) -> Result<PathBuf, Failure> {
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(io_failure)?;
    Ok(out.join(configured.cloned().unwrap_or_else(|| PathBuf::from(default))))
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>, Failure> {
    fs::File::create(path)
        .map(io::BufWriter::new)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(io_failure)
}

fn run_study(cli: &Cli, config: &Path, out: &Path) -> Result<(), Failure> {
    let (cfg, s) = load(cli, config)?;
    info!("study={} replications={} seed={}", s.name, s.replications, s.master_seed);
    let report = run_coverage_study(&s)?;

    let rows_path = output_path(out, cfg.study.rows_csv.as_ref(), format!("{}_rows.csv", s.name))?;
    report.write_rows_csv(create(&rows_path)?)?;
    let summary_path = output_path(out, cfg.study.summary_json.as_ref(), format!("{}_summary.json", s.name))?;
    report.write_summary_json(create(&summary_path)?)?;

    let mut stdout = io::stdout().lock();
    for m in &report.summary.methods {
        writeln!(
            stdout,
            "{:<18} coverage {:.3} [{:.3}, {:.3}]  mean length {:.4}  failed {}",
            m.method.name(),
            m.coverage,
            m.cp_lower,
            m.cp_upper,
            m.mean_length,
            m.failed
        )
        .map_err(io_failure)?;
    }
    info!("wrote {} and {}", rows_path.display(), summary_path.display());
    Ok(())
}

fn read_observation(src: &str) -> Result<DVector<f64>, Failure> {
    let path = Path::new(src);
    let text = if path.is_file() {
        fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))
            .map_err(|e| Failure::new(2, e))?
    } else {
        src.to_string()
    };
    Ok(parse_observation(&text)?)
}

fn interval(cli: &Cli, config: &Path, y_src: &str) -> Result<(), Failure> {
    let (_, s) = load(cli, config)?;
    let raw = read_observation(y_src)?;
    let y = s.problem.whiten_observation(&raw)?;
    let (results, _) = intervals_for_observation(
        &s.problem,
        &y,
        s.alpha,
        s.eta,
        &s.methods,
        &s.calibration,
        derive_seed(s.master_seed, 1),
    )?;
    let mut stdout = io::stdout().lock();
    let mut unbounded = None;
    for (m, r) in s.methods.iter().zip(results) {
        let record = match r {
            Ok(iv) => serde_json::to_value(&iv).map_err(io_failure)?,
            Err(e) => {
                if e.is_unbounded() {
                    unbounded.get_or_insert_with(|| e.clone());
                }
                json!({ "method": m.name(), "error": e.to_string() })
            }
        };
        writeln!(stdout, "{record}").map_err(io_failure)?;
    }
    match unbounded {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn sampler_diag(cli: &Cli, config: &Path, out: &Path) -> Result<(), Failure> {
    let (cfg, s) = load(cli, config)?;
    let seed = derive_seed(s.master_seed, 0);
    let obs = simulate_seeded(&s.problem, &s.x_true, derive_seed(seed, 0));
    let set = BergerBoosSet::new(&s.problem, &obs.y, s.eta)?;
    let extremes = functional_extremes(&set)?;
    let (batch, kind) = sample_design(&set, &s.calibration, s.calibration.m, derive_seed(seed, 1))?;
    let occupancy = range_occupancy(&batch.functional_values, extremes.mu_lower, extremes.mu_upper, OCCUPANCY_BINS);

    let path = output_path(out, cfg.study.samples_csv.as_ref(), format!("{}_samples.csv", s.name))?;
    batch.write_csv(create(&path)?)?;
    let record = json!({
        "scenario": s.name,
        "sampler": format!("{kind:?}"),
        "samples": batch.len(),
        "attempts": batch.attempts,
        "acceptance_rate": batch.acceptance_rate(),
        "mu_lower": extremes.mu_lower,
        "mu_upper": extremes.mu_upper,
        "bins": OCCUPANCY_BINS,
        "occupancy": occupancy,
        "samples_csv": path.display().to_string(),
    });
    writeln!(io::stdout().lock(), "{record}").map_err(io_failure)?;
    Ok(())
}
