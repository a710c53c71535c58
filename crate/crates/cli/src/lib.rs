//! The `lcc` command line: simulation runs, the Strassen demo, privacy
//! audits, cost checks and parameter sweeps.
//!
//! Exit status is 0 on success, 1 on a failed run, privacy violation or cost
//! mismatch, and 2 on usage or configuration errors.

pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{costs_check, sweep_cells, CostsCheck, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
pub use config::{ConfigError, RunConfig};

use commands::{AuditMode, OutputOpts};

#[derive(Debug, Parser)]
#[command(name = "lcc", about = "Private multi-source coded computation simulator")]
pub struct Cli {
    /// Size of the global worker thread pool.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured instance `trials` times.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Write one CSV row per run.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print rows as JSON instead of a table.
        #[arg(long)]
        json: bool,
        /// Succeed only if some run fails to decode.
        #[arg(long)]
        expect_failure: bool,
    },
    /// Multiply two random matrices with Strassen's algorithm on 20 workers.
    StrassenDemo {
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check that colluding workers learn nothing about the data.
    Audit {
        #[arg(value_enum)]
        mode: AuditKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Samples per secret for the statistical audit.
        #[arg(long)]
        trials: Option<usize>,
        /// Share data without masks, to confirm the auditor catches leaks.
        #[arg(long)]
        zero_masks: bool,
    },
    /// Compare metered communication with the closed forms.
    Costs {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every cell of the `[sweep]` grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuditKind {
    Exhaustive,
    Statistical,
}

fn load(path: &Path, seed: Option<u64>, trials: Option<usize>) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    Ok(cfg)
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool already initialised: {e}");
        }
    }
    let with_config =
        |path: &PathBuf, seed, trials, f: &mut dyn FnMut(&RunConfig) -> i32| match load(path, seed, trials) {
            Ok(cfg) => f(&cfg),
            Err(e) => {
                eprintln!("config error: {e}");
                EXIT_USAGE
            }
        };
    match &cli.command {
        Command::Run {
            config,
            seed,
            trials,
            out,
            json,
            expect_failure,
        } => with_config(config, *seed, *trials, &mut |cfg| {
            let opts = OutputOpts {
                csv: out.as_deref(),
                json: *json,
            };
            commands::cmd_run(cfg, &opts, *expect_failure, stdout)
        }),
        Command::StrassenDemo { dim, seed } => commands::cmd_strassen_demo(*dim, *seed, stdout),
        Command::Audit {
            mode,
            config,
            seed,
            trials,
            zero_masks,
        } => with_config(config, *seed, None, &mut |cfg| {
            let mode = match mode {
                AuditKind::Exhaustive => AuditMode::Exhaustive,
                AuditKind::Statistical => AuditMode::Statistical,
            };
            commands::cmd_audit(mode, cfg, *trials, *zero_masks, stdout)
        }),
        Command::Costs { config, seed } => {
            with_config(config, *seed, None, &mut |cfg| commands::cmd_costs(cfg, stdout))
        }
        Command::Sweep {
            config,
            seed,
            trials,
            out,
            json,
        } => with_config(config, *seed, *trials, &mut |cfg| {
            let opts = OutputOpts {
                csv: out.as_deref(),
                json: *json,
            };
            commands::cmd_sweep(cfg, &opts, stdout)
        }),
    }
}
