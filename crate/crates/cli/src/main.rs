//! `mmaflc`: train the identifier, run and compare parking episodes, sweep
//! parameters and export plot data.
//!
//! Exit codes: 0 on success, 1 for invalid input (usage, config, missing or
//! malformed artifacts), 2 when a run starts and then aborts (non-finite
//! state, diverged training, I/O failure while writing results).

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmaflc::simkit::ControllerKind;

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "mmaflc", version, about = "Adaptive fuzzy parking-control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides both the identifier and the simulation seed.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the plant identifier offline; writes weights.txt and loss.csv.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Run one episode; writes steer.csv, drive.csv and the metrics files.
    Run {
        #[command(flatten)]
        common: Common,
        /// A single controller kind overriding `controller.kind`.
        #[arg(long, value_name = "LIST", value_delimiter = ',')]
        kinds: Vec<ControllerKind>,
    },
    /// Run several controller kinds on the same plant and rank them.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated kinds, at least two.
        #[arg(long, value_name = "LIST", value_delimiter = ',', required = true)]
        kinds: Vec<ControllerKind>,
    },
    /// One episode per value of a config key; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted config key, e.g. plant.friction_coeff.
        #[arg(long, value_name = "KEY")]
        param: String,
        #[arg(long, value_name = "LIST", value_delimiter = ',', required = true, num_args = 0..)]
        values: Vec<f64>,
        /// Kinds to sweep; `controller.kind` when absent.
        #[arg(long, value_name = "LIST", value_delimiter = ',')]
        kinds: Vec<ControllerKind>,
    },
    /// Turn a trajectory log into path points and an error trace.
    Plotdata {
        /// A steer.csv or drive.csv written by run or compare.
        log: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.override_seed(seed);
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn display(p: &Path) -> std::path::Display<'_> {
    p.display()
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train { common } => {
            let (cfg, out) = load(&common)?;
            let s = commands::train(&cfg, &out)?;
            println!("final loss {:e}", s.final_loss);
            println!("weights {}", display(&s.weights));
            println!("loss history {}", display(&s.loss));
        }
        Command::Run { common, kinds } => {
            let (cfg, out) = load(&common)?;
            let kind = match kinds.as_slice() {
                [] => cfg.controller.kind,
                [k] => *k,
                _ => return Err(CliError::Usage("run takes a single kind".into())),
            };
            let r = commands::run(&cfg, &out, kind)?;
            print!("kind={kind}\n{}", r.metrics.to_key_values());
        }
        Command::Compare { common, kinds } => {
            let (cfg, out) = load(&common)?;
            print!("{}", commands::compare(&cfg, &out, &kinds)?);
        }
        Command::Sweep {
            common,
            param,
            values,
            kinds,
        } => {
            let (cfg, out) = load(&common)?;
            let kinds = if kinds.is_empty() {
                vec![cfg.controller.kind]
            } else {
                kinds
            };
            print!("{}", commands::sweep(&cfg, &out, &param, &values, &kinds)?);
        }
        Command::Plotdata { log, out } => {
            let f = commands::plotdata(&log, &out)?;
            println!("{} path points", f.points);
            println!("path {}", display(&f.path));
            println!("error trace {}", display(&f.error));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
