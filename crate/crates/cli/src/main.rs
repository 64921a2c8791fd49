use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mskinetic_cli::commands::{execute, Command, Options};
use mskinetic_cli::config::parse_override;

/// Multi-species Boltzmann/Landau kinetic toolkit.
#[derive(Debug, Parser)]
#[command(name = "mskinetic", version, about)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "mskinetic.toml")]
    config: PathBuf,
    /// Output directory for CSV files, snapshots and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker thread cap for operator evaluations.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random test functions and sphere sampling (overrides `checks.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override a named tolerance, e.g. `--tol-override oracle=1e-8`. Repeatable.
    #[arg(long = "tol-override", global = true, value_name = "NAME=VALUE", value_parser = parse_override)]
    tol_override: Vec<(String, f64)>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Integrate the homogeneous equation and audit entropy, Fisher information and conservation.
    Simulate,
    /// Check the GENERIC degeneracy, antisymmetry and positivity conditions for all operator flavors.
    VerifyGeneric {
        /// Negate the mobility (fault injection for testing the checker).
        #[arg(long, hide = true)]
        flip_mobility: bool,
    },
    /// Grazing-limit sweep plus the small-angle lemma and perpendicular-projection checks.
    Grazing {
        /// Comma-separated grazing parameters in (0, 1).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Compare the optimized operators with direct-sum oracles on small grids.
    Oracle,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("warning: could not configure {t} threads: {e}");
        }
    }
    let mut opts = Options {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        tol_overrides: cli.tol_override,
        threads: cli.threads,
        ..Default::default()
    };
    let cmd = match cli.command {
        Sub::Simulate => Command::Simulate,
        Sub::VerifyGeneric { flip_mobility } => {
            opts.flip_mobility = flip_mobility;
            Command::VerifyGeneric
        }
        Sub::Grazing { eps } => {
            opts.eps = eps;
            Command::Grazing
        }
        Sub::Oracle => Command::Oracle,
    };
    let code = execute(cmd, &opts);
    ExitCode::from(code as u8)
}
