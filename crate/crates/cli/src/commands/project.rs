use std::path::PathBuf;

use clap::Args;
use maxent_core::projection::{project, ProjectionResult, ProjectionStatus};
use maxent_core::{ConstraintSet, FiniteDistribution};
use serde::{Deserialize, Serialize};

use super::{required, Context, SolverArgs};
use crate::error::{CliError, Outcome};
use crate::io::{read_json, to_json, write_output};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ProjectArgs {
    /// Prior distribution JSON: {"outcomes": [...], "probs": [...]}.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PathBuf>,
    /// Constraint set JSON: {"featureset": {"names", "matrix"}, "kinds", "targets"}.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

pub fn status_outcome(status: ProjectionStatus) -> Outcome {
    match status {
        ProjectionStatus::Converged => Outcome::Ok,
        ProjectionStatus::Infeasible => Outcome::Infeasible,
        ProjectionStatus::BoundaryNonattained => Outcome::Boundary,
        ProjectionStatus::NotConverged => Outcome::NotConverged,
    }
}

pub fn run(args: &ProjectArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let prior: FiniteDistribution = read_json(required(&args.prior, "prior")?)?;
    let constraints: ConstraintSet = read_json(required(&args.constraints, "constraints")?)?;
    let result: ProjectionResult = project(&prior, &constraints, &args.solver.options(ctx.seed))?;
    write_output(ctx.output(), &to_json(&result))?;
    Ok(status_outcome(result.status))
}
