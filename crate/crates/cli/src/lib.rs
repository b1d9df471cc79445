//! Command-line front end: config ingestion, weight caching, experiments and
//! CSV/JSON output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Environment variable naming the config file; takes precedence over
/// `--config`.
pub const CONFIG_ENV: &str = "FGBOLTZ_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "fgboltz", version, about = "Fourier-Galerkin Boltzmann solver with gPC uncertainty quantification")]
pub struct Cli {
    /// JSON run configuration; defaults apply to every missing field.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replace a weight cache built for a different configuration.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads; all cores when unset.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Precompute the collision weights and write the cache.
    Weights,
    /// Integrate the configured problem and write diagnostics.
    Run,
    /// Error against a reference over `convergence.N_list`.
    Convergence,
    /// Compare Galerkin and collocation solutions of the uncertain problem.
    Uq,
    /// Kernel assumptions, initial-data conditions, BKW residual and bilinear bound.
    Verify,
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I, env_config: Option<PathBuf>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli, env_config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, env_config: Option<PathBuf>) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // A pool may already exist when called in-process more than once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let path = commands::config_path(cli.config, env_config);
    let config = commands::load_config(path.as_deref())?;
    let ctx = commands::Context::new(config, cli.out, cli.force)?;
    match cli.command {
        Command::Weights => commands::cmd_weights(&ctx),
        Command::Run => commands::cmd_run(&ctx),
        Command::Convergence => commands::cmd_convergence(&ctx),
        Command::Uq => commands::cmd_uq(&ctx),
        Command::Verify => commands::cmd_verify(&ctx),
    }
}
