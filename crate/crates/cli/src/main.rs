//! `streamsel` — streaming feature selection over sparse columns.
//!
//! Subcommands: `synth` (planted data generation), `mask` (loss injection),
//! `select` (run the pipeline), `eval` (cross-validated KNN scoring, with an
//! optional two-way ablation). Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

mod args;
mod commands;
mod config;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;
use streamsel::{Error as CoreError, ErrorCategory};

use args::{Cli, Command};
use config::{FileConfig, ResolvedEval, ResolvedMask, ResolvedSelect, ResolvedSynth};

#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Io(PathBuf, std::io::Error),
    Json(serde_json::Error),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
            CliError::Json(e) => write!(f, "json: {e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Json(_) => 2,
            CliError::Io(_, _) => 2,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Usage => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Numeric => 3,
            },
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("could not size the worker pool: {e}")))?;
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);

    match &cli.command {
        Command::Synth(args) => commands::synth(&ResolvedSynth::resolve(args, &file, seed)),
        Command::Mask(args) => commands::mask(&ResolvedMask::resolve(args, &file, seed)),
        Command::Select(args) => commands::select(&ResolvedSelect::resolve(args, &file, seed)),
        Command::Eval(args) => commands::eval(&ResolvedEval::resolve(args, &file, seed)),
    }
}

fn main() {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap pre-formats help and usage messages.
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
