use std::path::PathBuf;

use clap::Args;
use maxent_core::identities::IdentityReport;
use maxent_core::sanov::{
    conditional_law, curve_csv, enumerate_event_capped, gibbs_conditioning_curve,
    monte_carlo_event, nested_relative_probability, rate_solver, ConditionalLaw, CurvePoint,
    SanovReport, DEFAULT_ENUMERATION_CAP,
};
use maxent_core::{ConstraintSet, FiniteDistribution};
use serde::{Deserialize, Serialize};

use super::{parse_list, required, Context};
use crate::error::{CliError, Outcome};
use crate::io::{read_json, to_json, write_output};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SanovArgs {
    /// Sampling distribution JSON.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PathBuf>,
    /// Event constraint set JSON.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<PathBuf>,
    /// Number of draws.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Estimate by simulation instead of enumeration.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<bool>,
    /// Simulation trials [default: 1000000].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// Histogram enumeration cap [default: 2000000].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    /// Comma list of n for the conditioning curve.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<String>,
    /// CSV destination for the curve.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_output: Option<PathBuf>,
    /// Constraint set JSON of a sub-event B of the event.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nested: Option<PathBuf>,
    /// Include the conditional law of the histogram.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<bool>,
}

#[derive(Debug, Serialize)]
struct SanovOutput {
    report: SanovReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    curve: Option<Vec<CurvePoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nested: Option<IdentityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conditional_law: Option<ConditionalLaw>,
}

pub fn run(args: &SanovArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let p: FiniteDistribution = read_json(required(&args.prior, "prior")?)?;
    let event: ConstraintSet = read_json(required(&args.event, "event")?)?;
    let n = *required(&args.n, "n")?;
    let report = if args.monte_carlo.unwrap_or(false) {
        monte_carlo_event(&p, &event, n, args.trials.unwrap_or(1_000_000), ctx.seed)?
    } else {
        let cap = args.cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
        enumerate_event_capped(&p, &event, n, cap, &rate_solver())?
    };
    let curve = match &args.curve {
        Some(list) => Some(gibbs_conditioning_curve(&p, &event, &parse_list(list)?)?),
        None => None,
    };
    let nested = match &args.nested {
        Some(path) => {
            let inner: ConstraintSet = read_json(path)?;
            Some(nested_relative_probability(&p, &event, &inner, n)?)
        }
        None => None,
    };
    let law = match args.law {
        Some(true) => Some(conditional_law(&p, &event, n)?),
        _ => None,
    };
    if let (Some(points), Some(path)) = (&curve, &args.curve_output) {
        write_output(Some(path), &curve_csv(points))?;
    }
    let out = SanovOutput {
        report,
        curve,
        nested,
        conditional_law: law,
    };
    write_output(ctx.output(), &to_json(&out))?;
    Ok(Outcome::Ok)
}
