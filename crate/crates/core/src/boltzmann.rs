//! Exact probability of an i.i.d. histogram, its Stirling approximations, and
//! the entropy-approximation accuracy experiment.
//!
//! For counts `c` with `n = Σ c_i` and `Q = c / n`:
//!
//! ```text
//! log Pr(c | P) = log n!/(c_1!⋯c_D!) + Σ c_i log P_i
//! log n!/(c_1!⋯c_D!) ≈ n H(Q)                                   (zeroth order)
//!                    ≈ n H(Q) + ½[log 2πn − Σ log 2πc_i]         (first order)
//! ```

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{
    cross_entropy, entropy, kl_divergence, Alphabet, EmpiricalMeasure, FiniteDistribution,
};
use crate::error::{Error, Result};
use crate::numeric::ln_factorial;
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `log n!/(c_1!⋯c_D!)` via log-gamma.
pub fn log_multinomial(counts: &EmpiricalMeasure) -> f64 {
    let tail: f64 = counts.counts().iter().map(|&c| ln_factorial(c)).sum();
    (ln_factorial(counts.n()) - tail).max(0.0)
}

/// `log Pr(x_1 = c_1, ..., x_D = c_D)` under i.i.d. sampling from `P`;
/// `-inf` when a positive count sits on a zero-probability outcome.
pub fn log_histogram_prob(counts: &EmpiricalMeasure, p: &FiniteDistribution) -> Result<f64> {
    if counts.len() != p.len() {
        return Err(Error::ShapeMismatch {
            what: "histogram vs distribution",
            expected: p.len(),
            found: counts.len(),
        });
    }
    let mut energy = 0.0;
    for (&c, &lp) in counts.counts().iter().zip(p.log_probs()) {
        if c > 0 {
            if lp == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            energy += c as f64 * lp;
        }
    }
    Ok(log_multinomial(counts) + energy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StirlingOrder {
    Zeroth,
    First,
}

/// `n·H(c/n)`.
fn zeroth_order(counts: &EmpiricalMeasure) -> f64 {
    let n = counts.n() as f64;
    let ln_n = n.ln();
    let sum: f64 = counts
        .counts()
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let c = c as f64;
            c * (c.ln() - ln_n)
        })
        .sum();
    (-sum).max(0.0)
}

/// `½[log 2πn − Σ log 2πc_i]` over the bins with `c_i > 0`.
fn first_correction_on_support(counts: &EmpiricalMeasure) -> f64 {
    let n = counts.n() as f64;
    let tail: f64 = counts
        .counts()
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| LN_2PI + (c as f64).ln())
        .sum();
    0.5 * (LN_2PI + n.ln() - tail)
}

/// Stirling approximation of the log-multinomial coefficient.
///
/// The first-order correction diverges at empty bins, so `First` rejects
/// histograms with a zero count.
pub fn stirling_log_multinomial(counts: &EmpiricalMeasure, order: StirlingOrder) -> Result<f64> {
    let zeroth = zeroth_order(counts);
    match order {
        StirlingOrder::Zeroth => Ok(zeroth),
        StirlingOrder::First => {
            if let Some(i) = counts.counts().iter().position(|&c| c == 0) {
                return Err(Error::Domain(format!(
                    "first-order Stirling correction needs every count ≥ 1 (bin {i} is empty)"
                )));
            }
            Ok(zeroth + first_correction_on_support(counts))
        }
    }
}

/// First-order approximation applied to the occupied bins only. Empty bins
/// contribute `log 0! = 0` to the exact coefficient, so dropping them keeps
/// the approximation well defined.
pub fn stirling_first_on_support(counts: &EmpiricalMeasure) -> f64 {
    zeroth_order(counts) + first_correction_on_support(counts)
}

/// Every quantity in the histogram probability calculation at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramLogProb {
    pub exact_log_prob: f64,
    pub log_multinomial: f64,
    pub stirling_zeroth: f64,
    /// `None` when some bin is empty.
    pub stirling_first_correction: Option<f64>,
    pub n: u64,
    pub alphabet_size: usize,
}

pub fn histogram_log_prob(
    counts: &EmpiricalMeasure,
    p: &FiniteDistribution,
) -> Result<HistogramLogProb> {
    let exact_log_prob = log_histogram_prob(counts, p)?;
    let full_support = counts.counts().iter().all(|&c| c > 0);
    Ok(HistogramLogProb {
        exact_log_prob,
        log_multinomial: log_multinomial(counts),
        stirling_zeroth: zeroth_order(counts),
        stirling_first_correction: full_support.then(|| first_correction_on_support(counts)),
        n: counts.n(),
        alphabet_size: counts.len(),
    })
}

/// Residual of `(1/n) log Pr(c|P) = −D(Q‖P) + (1/n)[log W(c) − nH(Q)]`.
/// It is zero up to rounding for every histogram; the check exercises the
/// algebra that links the exact probability to the divergence.
pub fn boltzmann_identity_residual(
    counts: &EmpiricalMeasure,
    p: &FiniteDistribution,
) -> Result<f64> {
    let q = counts.to_distribution(p.outcomes())?;
    let n = counts.n() as f64;
    let lhs = log_histogram_prob(counts, p)? / n;
    let rhs = -kl_divergence(&q, p)? + (log_multinomial(counts) - n * entropy(&q)) / n;
    Ok(lhs - rhs)
}

/// The same identity in cross-entropy form: `log Pr = log W − n H(Q, P)`.
pub fn cross_entropy_form(counts: &EmpiricalMeasure, p: &FiniteDistribution) -> Result<f64> {
    let q = counts.to_distribution(p.outcomes())?;
    Ok(log_multinomial(counts) - counts.n() as f64 * cross_entropy(&q, p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// `P ~ Dirichlet(1, ..., 1)`: normalized standard exponentials.
    Dirichlet1,
    /// Normalized standard uniforms.
    UniformOrthant,
}

impl PriorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PriorMode::Dirichlet1 => "dirichlet1",
            PriorMode::UniformOrthant => "uniform_orthant",
        }
    }
}

/// What to do with the first-order approximation when a sampled histogram has
/// empty bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroCountPolicy {
    /// Apply the correction over the occupied bins.
    #[default]
    DropEmptyBins,
    /// Leave the first-order value blank and set `skipped_first`.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyApproxConfig {
    pub alphabet_size: usize,
    pub n_grid: Vec<u64>,
    pub prior_mode: PriorMode,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub zero_counts: ZeroCountPolicy,
}

/// One (n, trial) cell. Errors are `approximation − exact`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub prior_mode: PriorMode,
    pub alphabet_size: usize,
    pub n: u64,
    pub trial: usize,
    pub exact: f64,
    pub zeroth: f64,
    pub first: Option<f64>,
    pub err_zeroth: f64,
    pub err_first: Option<f64>,
    pub skipped_first: bool,
    pub empty_bins: usize,
}

impl ExperimentRow {
    pub fn from_counts(
        prior_mode: PriorMode,
        trial: usize,
        counts: &EmpiricalMeasure,
        policy: ZeroCountPolicy,
    ) -> Self {
        let exact = log_multinomial(counts);
        let zeroth = zeroth_order(counts);
        let empty_bins = counts.counts().iter().filter(|&&c| c == 0).count();
        let first = match (empty_bins, policy) {
            (0, _) | (_, ZeroCountPolicy::DropEmptyBins) => Some(stirling_first_on_support(counts)),
            (_, ZeroCountPolicy::Skip) => None,
        };
        ExperimentRow {
            prior_mode,
            alphabet_size: counts.len(),
            n: counts.n(),
            trial,
            exact,
            zeroth,
            first,
            err_zeroth: zeroth - exact,
            err_first: first.map(|f| f - exact),
            skipped_first: first.is_none(),
            empty_bins,
        }
    }
}

fn validate(config: &EntropyApproxConfig) -> Result<()> {
    if config.alphabet_size < 2 {
        return Err(Error::InvalidParameters(
            "alphabet size must be at least 2".into(),
        ));
    }
    if config.n_grid.is_empty() || config.n_grid.contains(&0) {
        return Err(Error::InvalidParameters(
            "n grid must be non-empty with every n ≥ 1".into(),
        ));
    }
    if config.trials == 0 {
        return Err(Error::InvalidParameters("trials must be at least 1".into()));
    }
    Ok(())
}

/// Samples `P` from the prior and a histogram from `Multinomial(n, P)` for
/// every (n, trial) cell, recording exact and approximate log-multinomials.
/// Each cell draws from its own stream, so output is independent of the
/// rayon thread count.
pub fn entropy_approx_experiment(config: &EntropyApproxConfig) -> Result<Vec<ExperimentRow>> {
    validate(config)?;
    let cells: Vec<(u64, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.trials).map(move |t| (n, t)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(n, trial)| {
            let mut rng = rng::stream(config.seed, "entropy-approx", &[n, trial as u64]);
            let p = match config.prior_mode {
                PriorMode::Dirichlet1 => rng::sample_dirichlet1(&mut rng, config.alphabet_size),
                PriorMode::UniformOrthant => {
                    rng::sample_uniform_orthant(&mut rng, config.alphabet_size)
                }
            };
            let counts = EmpiricalMeasure::new(rng::sample_multinomial(&mut rng, n, &p))
                .expect("n ≥ 1 is validated");
            ExperimentRow::from_counts(config.prior_mode, trial, &counts, config.zero_counts)
        })
        .collect();
    Ok(rows)
}

pub const CSV_HEADER: &str =
    "prior_mode,D,n,trial,exact,zeroth,first,err_zeroth,err_first,skipped_first,\
empty_bins,rel_err_zeroth,rel_err_first,err_zeroth_per_n,err_first_per_n";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV rendering. The first ten columns are the fixed experiment schema; the
/// remaining ones add the empty-bin count and the errors normalized by the
/// exact value and by `n`.
pub fn to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let rel = |e: f64| {
            if r.exact != 0.0 {
                Some(e / r.exact)
            } else {
                None
            }
        };
        let n = r.n as f64;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.prior_mode.as_str(),
            r.alphabet_size,
            r.n,
            r.trial,
            r.exact,
            r.zeroth,
            opt(r.first),
            r.err_zeroth,
            opt(r.err_first),
            u8::from(r.skipped_first),
            r.empty_bins,
            opt(rel(r.err_zeroth)),
            opt(r.err_first.and_then(rel)),
            r.err_zeroth / n,
            opt(r.err_first.map(|e| e / n)),
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Per-n medians of the absolute errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub n: u64,
    pub trials: usize,
    pub median_abs_err_zeroth: f64,
    pub median_abs_err_first: Option<f64>,
    pub q90_abs_err_first: Option<f64>,
    /// Fraction of trials (with a first-order value) where it beats zeroth order.
    pub frac_first_better: Option<f64>,
}

fn quantile(mut v: Vec<f64>, q: f64) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn summarize(rows: &[ExperimentRow]) -> Vec<ExperimentSummary> {
    let mut ns: Vec<u64> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let cell: Vec<&ExperimentRow> = rows.iter().filter(|r| r.n == n).collect();
            let zeroth: Vec<f64> = cell.iter().map(|r| r.err_zeroth.abs()).collect();
            let first: Vec<f64> = cell
                .iter()
                .filter_map(|r| r.err_first.map(f64::abs))
                .collect();
            let better = cell
                .iter()
                .filter_map(|r| r.err_first.map(|e| e.abs() < r.err_zeroth.abs()))
                .collect::<Vec<_>>();
            ExperimentSummary {
                n,
                trials: cell.len(),
                median_abs_err_zeroth: quantile(zeroth, 0.5).unwrap_or(f64::NAN),
                median_abs_err_first: quantile(first.clone(), 0.5),
                q90_abs_err_first: quantile(first, 0.9),
                frac_first_better: (!better.is_empty())
                    .then(|| better.iter().filter(|b| **b).count() as f64 / better.len() as f64),
            }
        })
        .collect()
}

/// Convenience for callers holding plain count vectors.
pub fn counts_distribution(counts: &[u64]) -> Result<FiniteDistribution> {
    EmpiricalMeasure::new(counts.to_vec())?.to_distribution(&Alphabet::indexed(counts.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn em(c: &[u64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(c.to_vec()).unwrap()
    }

    fn dist(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::from_probs(p.to_vec()).unwrap()
    }

    #[test]
    fn log_multinomial_examples() {
        assert_eq!(log_multinomial(&em(&[7, 0, 0])), 0.0);
        assert!((log_multinomial(&em(&[1, 1])) - 2f64.ln()).abs() < 1e-15);
        // 10!/(2!3!5!) = 2520
        assert!((log_multinomial(&em(&[2, 3, 5])) - 2520f64.ln()).abs() < 1e-12);
        assert!((log_multinomial(&em(&[2, 3, 5])) - 7.832_014_180_505_469).abs() < 1e-12);
    }

    #[test]
    fn log_histogram_prob_examples() {
        let half = dist(&[0.5, 0.5]);
        assert!((log_histogram_prob(&em(&[1, 1]), &half).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!(
            (log_histogram_prob(&em(&[10, 0]), &half).unwrap() - 10.0 * 0.5f64.ln()).abs() < 1e-13
        );
        // 2520 · 0.2² · 0.3³ · 0.5⁵ = 0.0510300
        let v = log_histogram_prob(&em(&[2, 3, 5]), &dist(&[0.2, 0.3, 0.5])).unwrap();
        assert!((v - (2520.0 * 0.04 * 0.027 * 0.03125f64).ln()).abs() < 1e-12);
        assert!((v + 2.464_515_960_140_266).abs() < 1e-12);
        assert_eq!(
            log_histogram_prob(&em(&[1, 1]), &dist(&[1.0, 0.0])).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(log_histogram_prob(&em(&[1, 1, 1]), &half).is_err());
    }

    #[test]
    fn cross_entropy_form_agrees() {
        let p = dist(&[0.1, 0.6, 0.3]);
        for c in [[1u64, 4, 2], [0, 3, 0], [5, 5, 5]] {
            let e = em(&c);
            let a = log_histogram_prob(&e, &p).unwrap();
            let b = cross_entropy_form(&e, &p).unwrap();
            assert!((a - b).abs() < 1e-10);
            assert!(boltzmann_identity_residual(&e, &p).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn stirling_examples() {
        let two = 2f64.ln();
        assert!(
            (stirling_log_multinomial(&em(&[1, 1]), StirlingOrder::Zeroth).unwrap() - 2.0 * two)
                .abs()
                < 1e-15
        );
        let first = stirling_log_multinomial(&em(&[1, 1]), StirlingOrder::First).unwrap();
        let expected = 2.0 * two - 0.5 * std::f64::consts::PI.ln();
        assert!((first - expected).abs() < 1e-14);
        assert!((first - 0.813_928_9).abs() < 1e-6);
        assert_eq!(
            stirling_log_multinomial(&em(&[9, 0, 0]), StirlingOrder::Zeroth).unwrap(),
            0.0
        );
        assert!(matches!(
            stirling_log_multinomial(&em(&[9, 0, 1]), StirlingOrder::First),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn histogram_report_fields() {
        let r = histogram_log_prob(&em(&[2, 3, 5]), &dist(&[0.2, 0.3, 0.5])).unwrap();
        let direct = r.log_multinomial + 2.0 * 0.2f64.ln() + 3.0 * 0.3f64.ln() + 5.0 * 0.5f64.ln();
        assert!((r.exact_log_prob - direct).abs() < 1e-13);
        assert!(r.stirling_zeroth >= 0.0);
        assert!(r.stirling_first_correction.is_some());
        let r = histogram_log_prob(&em(&[2, 0, 5]), &dist(&[0.2, 0.3, 0.5])).unwrap();
        assert!(r.stirling_first_correction.is_none());
    }

    #[test]
    fn forced_small_cell() {
        let row = ExperimentRow::from_counts(
            PriorMode::Dirichlet1,
            0,
            &em(&[1, 1]),
            ZeroCountPolicy::Skip,
        );
        assert!((row.exact - 2f64.ln()).abs() < 1e-15);
        assert!((row.zeroth - 4f64.ln()).abs() < 1e-15);
        assert!(!row.skipped_first);

        let row = ExperimentRow::from_counts(
            PriorMode::Dirichlet1,
            0,
            &em(&[2, 0]),
            ZeroCountPolicy::Skip,
        );
        assert!(row.skipped_first && row.first.is_none());
        let row = ExperimentRow::from_counts(
            PriorMode::Dirichlet1,
            0,
            &em(&[2, 0]),
            ZeroCountPolicy::DropEmptyBins,
        );
        assert_eq!(row.empty_bins, 1);
        assert!(row.first.is_some());
    }

    #[test]
    fn tiny_experiment_d2_n2() {
        let config = EntropyApproxConfig {
            alphabet_size: 2,
            n_grid: vec![2],
            prior_mode: PriorMode::Dirichlet1,
            trials: 40,
            seed: 7,
            zero_counts: ZeroCountPolicy::Skip,
        };
        let rows = entropy_approx_experiment(&config).unwrap();
        assert_eq!(rows.len(), 40);
        for r in &rows {
            if r.empty_bins == 0 {
                assert!((r.exact - 2f64.ln()).abs() < 1e-15);
                assert!((r.zeroth - 4f64.ln()).abs() < 1e-15);
            } else {
                assert_eq!(r.exact, 0.0);
                assert!(r.skipped_first);
            }
        }
        assert!(rows.iter().any(|r| r.empty_bins == 0));
    }

    #[test]
    fn experiment_is_deterministic_and_validated() {
        let config = EntropyApproxConfig {
            alphabet_size: 30,
            n_grid: vec![50, 100],
            prior_mode: PriorMode::UniformOrthant,
            trials: 5,
            seed: 11,
            zero_counts: ZeroCountPolicy::default(),
        };
        let a = to_csv(&entropy_approx_experiment(&config).unwrap());
        let b = to_csv(&entropy_approx_experiment(&config).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 11);
        let mut bad = config.clone();
        bad.alphabet_size = 1;
        assert!(entropy_approx_experiment(&bad).is_err());
        bad = config.clone();
        bad.n_grid = vec![0];
        assert!(entropy_approx_experiment(&bad).is_err());
        bad = config;
        bad.trials = 0;
        assert!(entropy_approx_experiment(&bad).is_err());
    }

    #[test]
    fn first_order_beats_zeroth_on_full_support() {
        // n ≥ 5D; the comparison is statistical, so count failures.
        let d = 5usize;
        let mut compared = 0;
        let mut failures = 0;
        for trial in 0..2000u64 {
            let mut rng = stream(3, "ordering", &[trial]);
            let p = rng::sample_dirichlet1(&mut rng, d);
            let n = 25 + (trial % 4) * 25;
            let counts = em(&rng::sample_multinomial(&mut rng, n, &p));
            if counts.counts().contains(&0) {
                continue;
            }
            compared += 1;
            let exact = log_multinomial(&counts);
            let z = stirling_log_multinomial(&counts, StirlingOrder::Zeroth).unwrap();
            let f = stirling_log_multinomial(&counts, StirlingOrder::First).unwrap();
            if (f - exact).abs() > (z - exact).abs() {
                failures += 1;
            }
        }
        assert!(compared > 500);
        assert!(
            (failures as f64) < 0.01 * compared as f64,
            "{failures}/{compared}"
        );
    }

    #[test]
    fn summary_quantiles() {
        assert_eq!(quantile(vec![3.0, 1.0, 2.0], 0.5), Some(2.0));
        assert_eq!(quantile(vec![1.0, 2.0, 3.0, 4.0], 0.5), Some(2.5));
        assert_eq!(quantile(vec![], 0.5), None);
    }
}
