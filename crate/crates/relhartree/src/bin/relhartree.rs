//! Thin command-line front end. The library's `examples/` directory is the
//! richer interface; this binary exists for scripted runs: each subcommand
//! reads a JSON config, leaves artifacts under --out, and exits 0 on pass,
//! 1 on a failed assertion or failed run, 2 on a config problem.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relhartree::cli::{self, Command, RunConfig};
use relhartree::Error;

#[derive(Parser)]
#[command(
    name = "relhartree",
    version,
    about = "Two-component pseudo-relativistic Hartree ground states: solve, \
             sweep to the critical coupling, certify collapse"
)]
struct Cli {
    /// JSON run configuration (required for everything except `report`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory; created if missing.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Overrides the minimizer seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the compute thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the scalar ground state and cache the certified field.
    SolveQ,
    /// Minimize the two-component energy at fixed couplings.
    Minimize,
    /// Walk beta toward beta* and fit the collapse laws.
    Sweep,
    /// Certify that supercritical couplings have no minimizer.
    ProbeNonexistence,
    /// Fold the artifacts in --out into a pass/fail summary.
    Report,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("warning: could not set thread pool size: {e}");
        }
    }
    let cmd = match cli.cmd {
        Sub::SolveQ => Command::SolveQ,
        Sub::Minimize => Command::Minimize,
        Sub::Sweep => Command::Sweep,
        Sub::ProbeNonexistence => Command::ProbeNonexistence,
        Sub::Report => Command::Report,
    };

    // Config phase: anything wrong here is exit code 2.
    let cfg = match &cli.config {
        Some(path) => match RunConfig::load(path).and_then(|c| {
            c.validate()?;
            Ok(c)
        }) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        },
        None => {
            if !matches!(cmd, Command::Report) {
                eprintln!("config error: this subcommand needs --config <path>");
                return ExitCode::from(2);
            }
            RunConfig::default()
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("config error: cannot create --out {}: {e}", cli.out.display());
        return ExitCode::from(2);
    }

    // Run phase: config-shaped errors still exit 2, everything else 1.
    match cli::run(cmd, &cfg, &cli.out, cli.seed) {
        Ok(outcome) => {
            println!("{}", outcome.message);
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
