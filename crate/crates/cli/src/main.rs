//! `jm`: batch front end for the jump Malliavin toolkit.

mod commands;
mod config;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

use jm_core::estimators::with_workers;
use jm_core::Error;

use config::{Common, ExperimentConfig};

#[derive(Parser)]
#[command(name = "jm", version, about = "Malliavin weights and density diagnostics for truncated jump SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and write one CSV row per path.
    Simulate(Common),
    /// Two-sided check of E⟨DF, U⟩ = E[F δ(U)].
    DualityCheck(Common),
    /// Two-sided check of E[∂_β φ(F)] = E[φ(F) H_β] with φ = cos.
    IbpCheck {
        #[command(flatten)]
        common: Common,
        /// One-based multi-index such as `1` or `1,1`.
        #[arg(long)]
        beta: Option<String>,
    },
    /// Modulus of the empirical characteristic function on a geometric grid.
    FourierScan {
        #[command(flatten)]
        common: Common,
        #[arg(long = "xi-min")]
        xi_min: Option<f64>,
        #[arg(long = "xi-max")]
        xi_max: Option<f64>,
        #[arg(long = "xi-steps")]
        xi_steps: Option<usize>,
    },
    /// One-dimensional density through integration by parts, with a kernel
    /// estimate for comparison.
    #[command(name = "density-1d")]
    Density1d {
        #[command(flatten)]
        common: Common,
        #[arg(long = "y-min")]
        y_min: Option<f64>,
        #[arg(long = "y-max")]
        y_max: Option<f64>,
        #[arg(long = "y-steps")]
        y_steps: Option<usize>,
    },
    /// Laplace transform and inverse moments of a Poisson functional.
    LaplaceCheck(Common),
    /// Predicted density regularity of a preset (JSON).
    RegularityReport(Common),
    /// Broadness exponent estimate of a preset (JSON).
    ThetaEstimate(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::DualityCheck(_) => "duality-check",
            Command::IbpCheck { .. } => "ibp-check",
            Command::FourierScan { .. } => "fourier-scan",
            Command::Density1d { .. } => "density-1d",
            Command::LaplaceCheck(_) => "laplace-check",
            Command::RegularityReport(_) => "regularity-report",
            Command::ThetaEstimate(_) => "theta-estimate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::DualityCheck(c)
            | Command::LaplaceCheck(c)
            | Command::RegularityReport(c)
            | Command::ThetaEstimate(c) => c,
            Command::IbpCheck { common, .. } | Command::FourierScan { common, .. } | Command::Density1d { common, .. } => {
                common
            }
        }
    }
}

fn run(cmd: &Command) -> anyhow::Result<bool> {
    let common = cmd.common();
    let mut cfg = ExperimentConfig::load(cmd.name(), common)?;
    let mut beta = None;
    match cmd {
        Command::IbpCheck { beta: b, .. } => beta = b.clone(),
        Command::FourierScan { xi_min, xi_max, xi_steps, .. } => {
            cfg.xi_min = xi_min.or(cfg.xi_min);
            cfg.xi_max = xi_max.or(cfg.xi_max);
            cfg.xi_steps = xi_steps.or(cfg.xi_steps);
        }
        Command::Density1d { y_min, y_max, y_steps, .. } => {
            cfg.y_min = y_min.or(cfg.y_min);
            cfg.y_max = y_max.or(cfg.y_max);
            cfg.y_steps = y_steps.or(cfg.y_steps);
        }
        _ => {}
    }
    let start = Instant::now();
    let artifact = with_workers(cfg.workers, || match cmd {
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::DualityCheck(_) => commands::duality(&cfg),
        Command::IbpCheck { .. } => commands::ibp(&cfg, beta.as_deref()),
        Command::FourierScan { .. } => commands::fourier(&cfg),
        Command::Density1d { .. } => commands::density(&cfg),
        Command::LaplaceCheck(_) => commands::laplace(&cfg),
        Command::RegularityReport(_) => commands::regularity(&cfg),
        Command::ThetaEstimate(_) => commands::theta(&cfg),
    })??;
    let elapsed = start.elapsed().as_secs_f64();
    match &common.out {
        Some(path) => {
            std::fs::write(path, &artifact.body)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            write_metadata(path, &cfg, elapsed, artifact.pass)?;
        }
        None => std::io::stdout().write_all(&artifact.body)?,
    }
    eprintln!("{}: {} ({elapsed:.2} s)", cmd.name(), if artifact.pass { "PASS" } else { "FAIL" });
    Ok(artifact.pass)
}

/// Run metadata next to the data file, so the data itself stays
/// byte-identical across re-runs.
fn write_metadata(path: &Path, cfg: &ExperimentConfig, elapsed: f64, pass: bool) -> anyhow::Result<()> {
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let meta = json!({
        "schema": 1,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "workers": workers,
        "pass": pass,
        "created_unix": created,
        "elapsed_seconds": elapsed,
    });
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    std::fs::write(&name, serde_json::to_string_pretty(&meta)? + "\n")
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", Path::new(&name).display())))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Config(_)) | Some(Error::Domain(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
