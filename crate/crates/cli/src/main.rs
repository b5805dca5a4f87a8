//! `couette`: simulations, linear and bilinear estimate checks, threshold
//! bisection and record post-processing.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::Format;

#[derive(Parser, Debug)]
#[command(name = "couette", version, about = "Stability laboratory for perturbations of 3D plane Couette flow")]
pub struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub output: Format,
    /// Overrides the seed of the initial condition or sampled ensemble.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores, or RAYON_NUM_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct RunOut {
    /// Record CSV path; the manifest goes to `<path>.manifest.json`.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Writes the final state as a checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Full nonlinear DNS from a TOML config.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        out: RunOut,
    },
    /// x-independent streak run from a TOML config.
    Streak {
        config: PathBuf,
        #[command(flatten)]
        out: RunOut,
    },
    /// Closed-form identities, linear estimates and linear scalings.
    VerifyLinear {
        /// kL2, mixing, inviscid, lem3b, decay-L0, decay-L0-2, enhanced, liftup.
        #[arg(long, default_value = "kL2")]
        lemma: String,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        k: i64,
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        l: i64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eta: f64,
        /// Sample count of the sampled estimates.
        #[arg(long)]
        samples: Option<usize>,
        /// Viscosities of the scaling fits.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-2, 1e-3, 1e-4])]
        nu: Vec<f64>,
    },
    /// Empirical constants of the anisotropic bilinear estimates.
    VerifyBilinear {
        /// 4.1 to 4.6, or `all`.
        #[arg(long, default_value = "all")]
        lemma: String,
        /// Total samples; half calibrate, half are held out.
        #[arg(long, default_value_t = 400)]
        samples: usize,
    },
    /// Threshold bisection from a TOML query.
    Threshold {
        query: PathBuf,
        /// Writes the full result as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Energy functionals of a saved record.
    Norms {
        record: PathBuf,
        /// E1 to E6; all when absent.
        #[arg(long)]
        functional: Option<String>,
        /// Viscosity, when the record has no manifest.
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        eps0: f64,
    },
    /// Checkpoint inspection and restart.
    #[command(subcommand)]
    Checkpoint(CheckpointCmd),
}

#[derive(Subcommand, Debug)]
pub enum CheckpointCmd {
    /// Prints the header of a checkpoint.
    Info { file: PathBuf },
    /// Continues a run from a checkpoint with the settings of a config.
    Resume {
        file: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's end time.
        #[arg(long)]
        t_end: Option<f64>,
        #[command(flatten)]
        out: RunOut,
    },
}

/// Input problems found by the CLI itself.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(e: &anyhow::Error) -> u8 {
    use couette_core::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::Numerical(_) | E::Quadrature { .. } | E::SlopeCondition { .. } | E::Cfl { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
