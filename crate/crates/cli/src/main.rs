//! Command line front end. Parsing and dispatch only; the work lives in the
//! library so tests can drive it without spawning processes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spicard_cli::commands::{cmd_reference, cmd_solve, cmd_sweep, cmd_verify};
use spicard_cli::config::RunConfig;
use spicard_cli::{LogLevel, Logger};

/// Pseudo-spectral fixed-point solver for forced incompressible flow.
///
/// Every run is described by one TOML config file; the subcommand picks what
/// to do with it. Environment variables SPICARD_CONFIG, SPICARD_OUT,
/// SPICARD_THREADS and SPICARD_LOG_LEVEL back the matching flags.
#[derive(Parser)]
#[command(name = "spicard", version, about, max_term_width = 100)]
struct Cli {
    /// Path to the run configuration file.
    #[arg(long, global = true, env = "SPICARD_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory; overrides the [output] section of the config.
    #[arg(long, global = true, env = "SPICARD_OUT")]
    out: Option<PathBuf>,

    /// Worker threads for parallel sections; 0 or absent keeps the default.
    #[arg(long, global = true, env = "SPICARD_THREADS")]
    threads: Option<usize>,

    /// Verbosity of progress messages on stderr.
    #[arg(long, global = true, env = "SPICARD_LOG_LEVEL", value_enum, default_value = "info")]
    log_level: LogLevel,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the fixed-point iteration and write snapshots, diagnostics and a
    /// residual report.
    Solve,
    /// Tabulate the closed-form benchmark solution and its quadrature check.
    Reference,
    /// Map the convergence region over a grid of force and shape parameters.
    Sweep,
    /// Recompute the residual report of a finished run from its files.
    Verify,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Reference => "reference",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = Logger::new(cli.log_level);
    let command_name = cli.command.name();

    match run(cli, &log) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // one machine-readable record on stderr; the chain joins with ": "
            let record = serde_json::json!({
                "command": command_name,
                "error": format!("{err:#}"),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli, log: &Logger) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| anyhow::anyhow!("cannot size the thread pool: {e}"))?;
        }
    }

    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("no config file: pass --config or set SPICARD_CONFIG"))?;
    let config = RunConfig::load(config_path)?;
    let out = cli.out.as_deref();

    match cli.command {
        Command::Solve => cmd_solve(&config, out, log),
        Command::Reference => cmd_reference(&config, out, log),
        Command::Sweep => cmd_sweep(&config, out, log),
        Command::Verify => cmd_verify(&config, out, log),
    }
}
