pub mod diagnose;
pub mod entropy_approx;
pub mod fit;
pub mod project;
pub mod sanov;

use std::path::{Path, PathBuf};

use clap::Args;
use maxent_core::projection::SolverOptions;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Settings shared by every command after config resolution.
#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Context {
    pub fn output(&self) -> Option<&Path> {
        self.output.as_deref()
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    /// Moment-matching tolerance of the dual solver.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_tol: Option<f64>,
    /// Newton iteration budget.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Largest |λ| before a boundary is suspected.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cap: Option<f64>,
    /// Record per-iteration diagnostics.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<bool>,
}

impl SolverArgs {
    pub fn options(&self, seed: u64) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            moment_tol: self.moment_tol.unwrap_or(d.moment_tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            lambda_cap: self.lambda_cap.unwrap_or(d.lambda_cap),
            trace: self.trace.unwrap_or(false),
            seed,
            ..d
        }
    }
}

pub fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::input(format!("missing required --{flag}")))
}

/// `"a,b,c"` as a list of integers.
pub fn parse_list(text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| CliError::input(format!("invalid integer {s:?} in {text:?}")))
        })
        .collect()
}
