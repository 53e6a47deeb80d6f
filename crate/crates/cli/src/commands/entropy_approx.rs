use clap::Args;
use maxent_core::boltzmann::{
    entropy_approx_experiment, summarize, to_csv, EntropyApproxConfig, PriorMode, ZeroCountPolicy,
};
use serde::{Deserialize, Serialize};

use super::{parse_list, Context};
use crate::error::{CliError, Outcome};
use crate::io::write_output;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyApproxArgs {
    /// Alphabet size D [default: 1000].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet_size: Option<usize>,
    /// Sample sizes: a comma list, or `a..b` for doubling from a up to b
    /// [default: 5000..40000].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<String>,
    /// Trials per sample size [default: 20].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Distribution prior: dirichlet1 or uniform-orthant [default: dirichlet1].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<String>,
    /// First-order handling of empty bins: drop-empty-bins or skip
    /// [default: drop-empty-bins].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_counts: Option<String>,
}

/// `"a,b"` or `"a..b"`, the latter doubling from `a` while `≤ b`.
pub fn parse_grid(text: &str) -> Result<Vec<u64>, CliError> {
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("invalid grid {text:?}")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("invalid grid {text:?}")))?;
        if lo == 0 || lo > hi {
            return Err(CliError::input(format!("invalid grid {text:?}")));
        }
        let mut out = Vec::new();
        let mut n = lo;
        while n <= hi {
            out.push(n);
            n = n.saturating_mul(2);
        }
        Ok(out)
    } else {
        parse_list(text)
    }
}

fn parse_prior(s: &str) -> Result<PriorMode, CliError> {
    match s.replace('_', "-").as_str() {
        "dirichlet1" => Ok(PriorMode::Dirichlet1),
        "uniform-orthant" => Ok(PriorMode::UniformOrthant),
        other => Err(CliError::input(format!("unknown prior {other:?}"))),
    }
}

fn parse_policy(s: &str) -> Result<ZeroCountPolicy, CliError> {
    match s.replace('_', "-").as_str() {
        "drop-empty-bins" => Ok(ZeroCountPolicy::DropEmptyBins),
        "skip" => Ok(ZeroCountPolicy::Skip),
        other => Err(CliError::input(format!(
            "unknown zero-count policy {other:?}"
        ))),
    }
}

pub fn run(args: &EntropyApproxArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let config = EntropyApproxConfig {
        alphabet_size: args.alphabet_size.unwrap_or(1000),
        n_grid: parse_grid(args.n.as_deref().unwrap_or("5000..40000"))?,
        prior_mode: parse_prior(args.prior.as_deref().unwrap_or("dirichlet1"))?,
        trials: args.trials.unwrap_or(20),
        seed: ctx.seed,
        zero_counts: parse_policy(args.zero_counts.as_deref().unwrap_or("drop-empty-bins"))?,
    };
    let rows = entropy_approx_experiment(&config)?;
    write_output(ctx.output(), &to_csv(&rows))?;
    eprintln!(
        "{:>8} {:>7} {:>14} {:>14} {:>14} {:>8}",
        "n", "trials", "med|zeroth|", "med|first|", "q90|first|", "first<"
    );
    for s in summarize(&rows) {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
        eprintln!(
            "{:>8} {:>7} {:>14.6e} {:>14} {:>14} {:>8}",
            s.n,
            s.trials,
            s.median_abs_err_zeroth,
            fmt(s.median_abs_err_first),
            fmt(s.q90_abs_err_first),
            s.frac_first_better
                .map(|f| format!("{f:.3}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    Ok(Outcome::Ok)
}
