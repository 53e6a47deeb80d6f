//! `maxent`: experiment drivers and report rendering for maxent-core.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use commands::diagnose::DiagnoseArgs;
use commands::entropy_approx::EntropyApproxArgs;
use commands::fit::FitArgs;
use commands::project::ProjectArgs;
use commands::sanov::SanovArgs;
use commands::Context;
use config::{overlay, RunConfig};
use error::{CliError, Outcome};

#[derive(Debug, Parser)]
#[command(
    name = "maxent",
    version,
    about = "Maximum-entropy inference on finite alphabets"
)]
struct Cli {
    /// Master seed for every random stream [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report destination; stdout when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// JSON run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the resolved run configuration here.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact versus Stirling log-multinomials over sampled histograms (CSV).
    EntropyApprox(EntropyApproxArgs),
    /// Information projection of a prior onto a constraint set (JSON).
    Project(ProjectArgs),
    /// Fit by moment-matching projection and by log-loss descent (JSON).
    Fit(FitArgs),
    /// Run the identity certificates (JSON, table on stderr).
    Diagnose(DiagnoseArgs),
    /// Exact or simulated probability of an empirical-measure event (JSON).
    Sanov(SanovArgs),
}

impl Command {
    fn section(&self) -> &'static str {
        match self {
            Command::EntropyApprox(_) => "entropy_approx",
            Command::Project(_) => "project",
            Command::Fit(_) => "fit",
            Command::Diagnose(_) => "diagnose",
            Command::Sanov(_) => "sanov",
        }
    }
}

fn resolve<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: &RunConfig,
    section: &str,
    resolved: &mut RunConfig,
) -> Result<T, CliError> {
    let args = overlay(flags, file.section(section))?;
    resolved.set_section(
        section,
        serde_json::to_value(&args).expect("arguments serialize"),
    );
    Ok(args)
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let file: RunConfig = match &cli.config {
        Some(path) => io::read_json(path)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let threads = cli.threads.or(file.threads);
    let output = cli.output.clone().or_else(|| file.output.clone());
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::input(format!("--threads: {e}")))?;
    }
    let mut resolved = RunConfig {
        seed: Some(seed),
        threads,
        output: output.clone(),
        ..RunConfig::default()
    };
    let ctx = Context { seed, output };
    let section = cli.command.section();
    macro_rules! dispatch {
        ($args:expr, $module:ident) => {{
            let args = resolve($args, &file, section, &mut resolved)?;
            if let Some(path) = &cli.save_config {
                io::write_output(Some(path), &io::to_json(&resolved))?;
            }
            commands::$module::run(&args, &ctx)
        }};
    }
    match &cli.command {
        Command::EntropyApprox(a) => dispatch!(a, entropy_approx),
        Command::Project(a) => dispatch!(a, project),
        Command::Fit(a) => dispatch!(a, fit),
        Command::Diagnose(a) => dispatch!(a, diagnose),
        Command::Sanov(a) => dispatch!(a, sanov),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Outcome::InputError.into()
            } else {
                Outcome::Ok.into()
            };
        }
    };
    match run(cli) {
        Ok(outcome) => outcome.into(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
