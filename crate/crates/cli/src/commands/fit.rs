use std::path::PathBuf;

use clap::Args;
use maxent_core::projection::{fit_log_loss, project, ProjectionResult, ProjectionStatus};
use maxent_core::{
    moments, Alphabet, ConstraintSet, EmpiricalMeasure, FeatureSet, FiniteDistribution,
};
use serde::{Deserialize, Serialize};

use super::{required, Context, SolverArgs};
use crate::error::{CliError, Outcome};
use crate::io::{read_json, read_text, to_json, write_output};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Prior distribution JSON; uniform over --alphabet when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PathBuf>,
    /// Comma-separated outcome labels, used when no prior is given.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<String>,
    /// Feature set JSON: {"names": [...], "matrix": [[...]]}.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    /// Newline-delimited outcome labels.
    #[arg(long, conflicts_with = "empirical")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    /// Empirical distribution JSON, instead of samples.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Serialize)]
struct FitReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_count: Option<u64>,
    alpha: Vec<f64>,
    boundary: bool,
    /// Minimum relative entropy to the prior subject to the data's moments.
    projection: ProjectionResult,
    /// Direct minimization of the data's log loss over the family.
    log_loss_fit: ProjectionResult,
    total_variation: f64,
}

fn prior_of(args: &FitArgs) -> Result<FiniteDistribution, CliError> {
    if let Some(path) = &args.prior {
        return read_json(path);
    }
    let labels = required(&args.alphabet, "prior or --alphabet")?;
    let alphabet = Alphabet::new(labels.split(',').map(|s| s.trim().to_string()).collect())?;
    Ok(FiniteDistribution::uniform(alphabet)?)
}

fn data_of(
    args: &FitArgs,
    alphabet: &Alphabet,
) -> Result<(FiniteDistribution, Option<u64>), CliError> {
    if let Some(path) = &args.empirical {
        let d: FiniteDistribution = read_json(path)?;
        return Ok((d, None));
    }
    let path = required(&args.samples, "samples or --empirical")?;
    let text = read_text(path)?;
    let samples: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    if samples.is_empty() {
        return Err(CliError::input(format!("{}: no samples", path.display())));
    }
    let measure = EmpiricalMeasure::from_samples(alphabet, &samples)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok((measure.to_distribution(alphabet)?, Some(measure.n())))
}

pub fn run(args: &FitArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let prior = prior_of(args)?;
    let features: FeatureSet = read_json(required(&args.features, "features")?)?;
    let (data, sample_count) = data_of(args, prior.outcomes())?;
    let opts = args.solver.options(ctx.seed);
    let alpha = moments(&data, &features)?;
    let projection = project(
        &prior,
        &ConstraintSet::equalities(features.clone(), alpha.clone())?,
        &opts,
    )?;
    let log_loss_fit = fit_log_loss(&prior, &features, &data, &opts)?;
    let total_variation = projection
        .projection
        .total_variation(&log_loss_fit.projection)?;
    let boundary = projection.status == ProjectionStatus::BoundaryNonattained;
    let outcome = super::project::status_outcome(projection.status);
    let report = FitReport {
        sample_count,
        alpha,
        boundary,
        projection,
        log_loss_fit,
        total_variation,
    };
    write_output(ctx.output(), &to_json(&report))?;
    Ok(outcome)
}
