//! The `burden` command-line front end.
//!
//! Each subcommand is also callable as a library function taking a resolved
//! configuration and an output directory, which is how the integration tests
//! drive the experiments.

mod audit;
pub mod config;
mod output;
pub mod svg;
mod sweep;
mod synth;
mod train;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub use audit::{run_audit, AuditEntry, AuditReport};
pub use config::{AuditConfig, PsiChoice, SweepConfig, SynthConfig, TrainExperimentConfig};
pub use output::{config_hash, Provenance, TOOL_NAME, TOOL_VERSION};
pub use sweep::{run_sweep, CostSweep, SweepReport};
pub use synth::{run_synth, SynthReport, SynthRow};
pub use train::{run_train, ModelSummary, SplitResult, TrainReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "burden",
    version,
    about = "Audit and train classifiers under strategic manipulation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Sub-population condition(s) to evaluate.
    #[arg(long, global = true, value_enum)]
    pub psi: Option<PsiChoice>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-Gaussian simulation over a grid of group-0 spreads.
    Synth {
        /// Repetitions per group-0 spread.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Threshold sweep over a one-feature dataset.
    Sweep {
        /// Score table CSV to sample from (defaults to the built-in surrogate table).
        #[arg(long, conflicts_with = "data")]
        tables: Option<PathBuf>,
        /// One-feature dataset CSV.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Constrained linear training over repeated train/test splits.
    Train {
        /// Dataset CSV (defaults to the generated survey-like data).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Number of random train/test splits.
        #[arg(long)]
        splits: Option<usize>,
    },
    /// Metrics and bounds for a supplied dataset and classifier.
    Audit {
        /// Dataset CSV with feature columns followed by `y` and `z`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Classifier JSON, bare or as written by `train`.
        #[arg(long)]
        classifier: Option<PathBuf>,
    },
}

/// Exit status for a library error: 1 when the computation itself has no valid
/// answer, 2 for bad input, configuration or I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible(_)
        | Error::UndefinedMetric(_)
        | Error::InfeasibleManipulation(_)
        | Error::Numerical(_)
        | Error::MonotonicityViolation(_) => EXIT_INFEASIBLE,
        Error::Schema(_)
        | Error::Invalid(_)
        | Error::Parse { .. }
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> crate::Result<i32> {
    let common = cli.common;
    let out_default = |name: &str| PathBuf::from("burden-out").join(name);
    match cli.command {
        Command::Synth { repetitions } => {
            let mut cfg: SynthConfig = config::load(common.config.as_deref())?;
            config::override_common(&mut cfg.seed, &mut cfg.psi, &mut cfg.out, &common);
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            let out = cfg.out.clone().unwrap_or_else(|| out_default("synth"));
            let report = run_synth(&cfg, &out)?;
            eprintln!(
                "wrote {} sigma0 rows to {}",
                report.rows.len(),
                out.display()
            );
            Ok(EXIT_OK)
        }
        Command::Sweep { tables, data } => {
            let mut cfg: SweepConfig = config::load(common.config.as_deref())?;
            config::override_common(&mut cfg.seed, &mut cfg.psi, &mut cfg.out, &common);
            if let Some(path) = tables {
                cfg.source = config::SweepSource::Tables {
                    path,
                    counts: cfg.source.counts(),
                };
            } else if let Some(path) = data {
                cfg.source = config::SweepSource::Csv { path };
            }
            let out = cfg.out.clone().unwrap_or_else(|| out_default("sweep"));
            let report = run_sweep(&cfg, &out)?;
            let mut code = EXIT_OK;
            for cs in &report.costs {
                for (psi, opt) in &cs.constrained {
                    match opt {
                        Some(r) => eprintln!(
                            "{} cost, psi={}: feasible optimum (tau0, tau1) = ({}, {}), accuracy {}",
                            cs.name,
                            psi.short_name(),
                            r.tau0,
                            r.tau1,
                            r.accuracy
                        ),
                        None => {
                            eprintln!("{} cost, psi={}: no threshold pair satisfies the constraint", cs.name, psi.short_name());
                            code = EXIT_INFEASIBLE;
                        }
                    }
                }
            }
            Ok(code)
        }
        Command::Train { data, splits } => {
            let mut cfg: TrainExperimentConfig = config::load(common.config.as_deref())?;
            config::override_common(&mut cfg.seed, &mut cfg.psi, &mut cfg.out, &common);
            if let Some(path) = data {
                cfg.data = config::TrainData::Csv { path };
            }
            if let Some(s) = splits {
                cfg.splits = s;
            }
            let out = cfg.out.clone().unwrap_or_else(|| out_default("train"));
            let report = run_train(&cfg, &out)?;
            let mut code = EXIT_OK;
            for m in &report.summary {
                if m.n_infeasible > 0 || m.n_undefined > 0 {
                    eprintln!(
                        "{} ({}): {} infeasible and {} undefined splits excluded",
                        m.model, m.psi, m.n_infeasible, m.n_undefined
                    );
                }
                if m.n_used == 0 {
                    code = EXIT_INFEASIBLE;
                }
            }
            Ok(code)
        }
        Command::Audit { data, classifier } => {
            let mut cfg: AuditConfig = config::load(common.config.as_deref())?;
            config::override_common(&mut cfg.seed, &mut cfg.psi, &mut cfg.out, &common);
            if data.is_some() {
                cfg.data = data;
            }
            if classifier.is_some() {
                cfg.classifier = classifier;
            }
            let out = cfg.out.clone().unwrap_or_else(|| out_default("audit"));
            let report = run_audit(&cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(EXIT_OK)
        }
    }
}
