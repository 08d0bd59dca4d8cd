//! Command-line front end: computes the connection, torsion, curvature,
//! and deflection structures of a scene file, verifies their defining
//! identities by seeded sampling, and transports them across coordinate
//! changes. All substance lives in [`jetgeo::driver`]; this file only
//! parses arguments, resolves the sampling controls, and handles I/O.
//!
//! Exit codes: 0 on success (all checks passed, where applicable), 1 when
//! a verification check fails, 2 on input errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use jetgeo::config::{load_change, load_config, SceneConfig};
use jetgeo::driver::{
    compute_report, transform_report, validation_tester, verify_report, ComputeKind,
    ConnectionChoice, Controls, TransformKind, VerifyKind,
};
use jetgeo::report::{Report, ReportMode};

#[derive(Parser)]
#[command(
    name = "jetgeo",
    about = "Connections, torsion, curvature, and deflection on the 1-jet space of curves",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a structure from a scene file and print its components.
    Compute {
        #[command(flatten)]
        common: Common,
        /// Structure to compute.
        #[arg(long, value_enum)]
        what: ComputeWhat,
        /// Linear connection to use where one is needed.
        #[arg(long, value_enum)]
        connection: Option<ConnSource>,
        /// Write the report to a file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit flat machine-readable `key = value` lines.
        #[arg(long)]
        machine: bool,
    },
    /// Verify identities of the scene's connection by seeded sampling.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Identity family to verify.
        #[arg(long, value_enum)]
        what: VerifyWhat,
        /// Sample points per check.
        #[arg(long)]
        samples: Option<usize>,
        /// Seed for all sampling.
        #[arg(long)]
        seed: Option<u64>,
        /// Largest residual accepted as zero.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Transport structures across a coordinate change.
    Transform {
        #[command(flatten)]
        common: Common,
        /// Change file (`t_new`/`t_old`/`x_new[i]`/`x_old[i]` lines).
        /// Defaults to the change embedded in the scene file.
        #[arg(long)]
        change: Option<PathBuf>,
        /// What to transport, or `check` to verify transport rules.
        #[arg(long, value_enum)]
        what: TransformWhat,
    },
}

#[derive(Args)]
struct Common {
    /// Scene file.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ComputeWhat {
    Christoffel,
    Nlc,
    Connection,
    Torsion,
    Curvature,
    Deflection,
    Em,
}

impl From<ComputeWhat> for ComputeKind {
    fn from(what: ComputeWhat) -> ComputeKind {
        match what {
            ComputeWhat::Christoffel => ComputeKind::Christoffel,
            ComputeWhat::Nlc => ComputeKind::Nlc,
            ComputeWhat::Connection => ComputeKind::Connection,
            ComputeWhat::Torsion => ComputeKind::Torsion,
            ComputeWhat::Curvature => ComputeKind::Curvature,
            ComputeWhat::Deflection => ComputeKind::Deflection,
            ComputeWhat::Em => ComputeKind::Em,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum VerifyWhat {
    Ricci,
    Deflection,
    Brackets,
    Covariance,
    All,
}

impl From<VerifyWhat> for VerifyKind {
    fn from(what: VerifyWhat) -> VerifyKind {
        match what {
            VerifyWhat::Ricci => VerifyKind::Ricci,
            VerifyWhat::Deflection => VerifyKind::Deflection,
            VerifyWhat::Brackets => VerifyKind::Brackets,
            VerifyWhat::Covariance => VerifyKind::Covariance,
            VerifyWhat::All => VerifyKind::All,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TransformWhat {
    Nlc,
    Connection,
    Check,
}

impl From<TransformWhat> for TransformKind {
    fn from(what: TransformWhat) -> TransformKind {
        match what {
            TransformWhat::Nlc => TransformKind::Nlc,
            TransformWhat::Connection => TransformKind::Connection,
            TransformWhat::Check => TransformKind::Check,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ConnSource {
    /// Derive the metric-pair connection from `h11` and `phi`.
    Berwald,
    /// Use the connection coefficients given in the scene file.
    File,
}

fn choice_for(source: Option<ConnSource>) -> ConnectionChoice {
    match source {
        None => ConnectionChoice::Auto,
        Some(ConnSource::Berwald) => ConnectionChoice::Berwald,
        Some(ConnSource::File) => ConnectionChoice::Explicit,
    }
}

type CliError = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Cmd) -> Result<ExitCode, CliError> {
    match cmd {
        Cmd::Compute {
            common,
            what,
            connection,
            out,
            machine,
        } => {
            let config = load_config(&common.config)?;
            let controls = resolve_controls(&config, None, None, None)?;
            let report = compute_report(&config, what.into(), choice_for(connection), controls)?;
            let mode = if machine {
                ReportMode::Machine
            } else {
                ReportMode::Text
            };
            let rendered = report.render(mode);
            match out {
                Some(path) => std::fs::write(&path, rendered)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
                None => write_stdout(&rendered)?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify {
            common,
            what,
            samples,
            seed,
            tol,
        } => {
            let config = load_config(&common.config)?;
            let controls = resolve_controls(&config, samples, seed, tol)?;
            let report = verify_report(&config, what.into(), controls)?;
            write_stdout(&report.render(ReportMode::Text))?;
            Ok(exit_for(&report))
        }
        Cmd::Transform {
            common,
            change,
            what,
        } => {
            let config = load_config(&common.config)?;
            let controls = resolve_controls(&config, None, None, None)?;
            let spec = match change {
                Some(path) => load_change(&path, &config)?,
                None => config
                    .change
                    .clone()
                    .ok_or("no change given: pass --change FILE or embed one in the scene file")?,
            };
            let tester = validation_tester(&config, controls);
            let ch = spec.realize(&config.space, &tester)?;
            let report = transform_report(&config, &ch, what.into(), controls)?;
            write_stdout(&report.render(ReportMode::Text))?;
            Ok(exit_for(&report))
        }
    }
}

/// Resolves the sampling controls with the command line's precedence:
/// flag, then scene-file value, then the `JETGEO_SEED` environment
/// variable (seed only), then the defaults.
fn resolve_controls(
    config: &SceneConfig,
    samples: Option<usize>,
    seed: Option<u64>,
    tol: Option<f64>,
) -> Result<Controls, CliError> {
    let env_seed = match std::env::var("JETGEO_SEED") {
        Ok(raw) => Some(
            raw.parse::<u64>()
                .map_err(|_| format!("JETGEO_SEED is not an unsigned integer: `{raw}`"))?,
        ),
        Err(_) => None,
    };
    Ok(Controls::resolve(config, samples, seed, tol, env_seed))
}

fn exit_for(report: &Report) -> ExitCode {
    if report.has_failures() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

/// Writes a report to stdout. A broken pipe (the reader stopped
/// listening, e.g. `jetgeo ... | head`) ends the process quietly instead
/// of panicking.
fn write_stdout(text: &str) -> Result<(), CliError> {
    use std::io::Write;

    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(err) if err.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(err) => Err(format!("cannot write to stdout: {err}").into()),
    }
}
