//! Command-line entry point. Exit codes: 0 success, 2 configuration error,
//! 3 missing prerequisite (datasets or models not yet produced), 4 numerical
//! failure during solving or training.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wavezoom::config::RunConfig;
use wavezoom::models::ModelVariant;
use wavezoom::pipeline::{default_eval_variants, run_evaluate, run_generate, run_train, run_uq};
use wavezoom::{Error, Result};

#[derive(Parser)]
#[command(
    name = "wavezoom",
    about = "Stochastic submodels for uncertainty quantification on the 2D wave equation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the worker-thread count from the config.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the base seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full model over Latin-hypercube parameter draws and write
    /// the train / test / Monte-Carlo datasets.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train one model variant (default: every base variant).
    Train {
        #[command(flatten)]
        common: Common,
        /// Variant name, e.g. NN, NN_BC_t, WGAN, POD_RF. Zoom couplings
        /// train their base variant.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Score deterministic variants on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Variant name; default scores every deterministic variant and its
        /// zoom coupling.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Monte-Carlo uncertainty report for the generative variants.
    Uq {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(jobs) = common.jobs {
        cfg.jobs = jobs;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_variant(s: &str) -> Result<ModelVariant> {
    s.parse()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common } => run_generate(&load_config(&common)?),
        Command::Train { common, variant } => {
            let cfg = load_config(&common)?;
            match variant {
                Some(name) => run_train(&cfg, parse_variant(&name)?),
                None => {
                    for kind in wavezoom::models::VariantKind::ALL {
                        run_train(&cfg, ModelVariant::new(kind, false))?;
                    }
                    Ok(())
                }
            }
        }
        Command::Evaluate { common, variant } => {
            let cfg = load_config(&common)?;
            let variants = match variant {
                Some(name) => vec![parse_variant(&name)?],
                None => default_eval_variants(),
            };
            run_evaluate(&cfg, &variants)
        }
        Command::Uq { common } => run_uq(&load_config(&common)?),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Shape(_) | Error::Serde(_) => 2,
        Error::MissingPrerequisite(_) | Error::Io(_) => 3,
        Error::Numerical(_) => 4,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
