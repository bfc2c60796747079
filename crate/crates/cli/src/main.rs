use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kinetic_core::cli_io::{init_threads_from_env, orchestrate, parse_config, Config, RunManifest};
use kinetic_core::{KineticError, Result};

/// Kinetic Cucker–Smale laboratory.
#[derive(Debug, Parser)]
#[command(name = "kinetic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Splitting solver: observables, h-profiles, snapshots.
    Run(Common),
    /// Picard fixed point of the characteristics map.
    Picard(Common),
    /// Particle ensembles against the kinetic solution.
    Particles(Common),
    /// Mono-kinetic markers up to blow-up.
    Monokinetic(Common),
    /// Pullback residuals and Duhamel tail of a finished run.
    Scatter {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// L1 distances between matching snapshots of two runs.
    Compare {
        #[arg(long = "run-dir", num_args = 1, required = true)]
        run_dirs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Closed-form homogeneous observables.
    Homogeneous(Common),
    /// Print every configuration key with its default.
    Keys,
}

fn load(c: &Common) -> Result<Config> {
    match &c.config {
        Some(p) => parse_config(p),
        None => Ok(Config::default()),
    }
}

fn with_config(c: &Common, f: impl FnOnce(&Config, &Path) -> Result<RunManifest>) -> Result<RunManifest> {
    f(&load(c)?, &c.out)
}

fn dispatch(cmd: Command) -> Result<Option<RunManifest>> {
    let m = match cmd {
        Command::Run(c) => with_config(&c, orchestrate::run)?,
        Command::Picard(c) => with_config(&c, orchestrate::picard)?,
        Command::Particles(c) => with_config(&c, orchestrate::particles)?,
        Command::Monokinetic(c) => with_config(&c, orchestrate::monokinetic)?,
        Command::Homogeneous(c) => with_config(&c, orchestrate::homogeneous)?,
        Command::Scatter { run_dir, out } => {
            let m = orchestrate::scatter(&run_dir, &out)?;
            if m.summary.get("theory_applies") == Some(&serde_json::Value::Bool(false)) {
                eprintln!("warning: scattering theory requires d >= 2; residuals are reported for inspection only");
            }
            m
        }
        Command::Compare { run_dirs, out } => {
            if run_dirs.len() != 2 {
                return Err(KineticError::Validation(format!(
                    "compare needs exactly two --run-dir arguments, got {}",
                    run_dirs.len()
                )));
            }
            orchestrate::compare(&run_dirs[0], &run_dirs[1], &out)?
        }
        Command::Keys => {
            for (k, v, doc) in kinetic_core::cli_io::KEYS {
                println!("{k} = {v:<20} # {doc}");
            }
            return Ok(None);
        }
    };
    Ok(Some(m))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = init_threads_from_env().and_then(|_| dispatch(cli.command));
    match result {
        Ok(Some(m)) => {
            for (k, v) in &m.summary {
                println!("{k}: {v}");
            }
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
