//! The `kuramoto` command line: configuration schema, commands and output.
//!
//! Exit codes: 0 on success, 2 if any enabled bound monitor was violated,
//! 1 on any error (including argument and configuration errors).

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{check, run, run_single, sweep, w2, EXIT_ERROR, EXIT_OK, EXIT_VIOLATION, OUT_DIR_ENV};
pub use config::{parse_config, ExperimentConfig, Overrides, Resolved};
pub use output::{BoundViolation, RunReport};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "kuramoto", version, about = "Kuramoto oscillators with inertia: simulation and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory (default: config `output.dir`, then $KURAMOTO_OUT_DIR, then ./kuramoto-out).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for every random draw; overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long, global = true, value_name = "INT")]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_name = "REAL")]
    pub dt: Option<f64>,
    #[arg(long = "t-final", global = true, value_name = "REAL")]
    pub t_final: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Run a parameter sweep and write an aggregate CSV.
    Sweep { config: PathBuf },
    /// Print the sufficient-condition verdicts for the initial data.
    Check { config: PathBuf },
    /// Wasserstein-2 distance between two state CSV files.
    W2 { a: PathBuf, b: PathBuf },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            dt: self.dt,
            t_final: self.t_final,
        }
    }

    fn load(&self, path: &PathBuf) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        // Overrides are applied before validation so `--seed` can satisfy a missing seed.
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }

    fn execute(&self) -> Result<i32> {
        match &self.command {
            Command::Run { config } => {
                let cfg = self.load(config)?;
                run(&cfg, &commands::output_dir(self.out.as_deref(), Some(&cfg)))
            }
            Command::Sweep { config } => {
                let cfg = self.load(config)?;
                sweep(&cfg, &commands::output_dir(self.out.as_deref(), Some(&cfg)))
            }
            Command::Check { config } => {
                println!("{}", check(&self.load(config)?)?);
                Ok(EXIT_OK)
            }
            Command::W2 { a, b } => {
                println!("{}", w2(a, b, self.seed)?);
                Ok(EXIT_OK)
            }
        }
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            Ok(pool) => pool.install(|| cli.execute()),
            Err(e) => Err(Error::Config(format!("--workers: {e}"))),
        },
        None => cli.execute(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
