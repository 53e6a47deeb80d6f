//! Exact small-n large deviations: enumerate every histogram of `n` draws,
//! compute `Pr(P̂n ∈ A)` and the conditional law `μ_A` of the histogram, and
//! compare against the information projection `P*` of `P` onto `A`.
//!
//! Microstates are grouped by histogram. For a law `μ` over histograms and a
//! reference `R`,
//!
//! ```text
//! D(μ‖Rⁿ) = Σ_c μ(c) [log(μ(c)/W(c)) − Σ_i c_i log R_i]
//! ```
//!
//! where `W(c)` is the multinomial coefficient. Direct algebra gives
//!
//! ```text
//! (1/n) log Pr(P̂n ∈ A) + D(P*‖P) + (1/n) D(μ_A‖P*ⁿ) = −slack
//! slack = (1/n) E_μ[Σ_i c_i log(P*_i/P_i)] − D(P*‖P)
//! ```
//!
//! The slack equals `λ*·(E_μ[P̂n moments] − α*)`. It vanishes when every
//! histogram in `A` has the same moments (equality events) and is positive for
//! events with an active half-space constraint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boltzmann::{log_histogram_prob, log_multinomial};
use crate::dist::{ConstraintSet, EmpiricalMeasure, FiniteDistribution, DEFAULT_MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::identities::{Check, IdentityReport};
use crate::numeric::LogSumExp;
use crate::projection::{project_inequality, ProjectionResult, ProjectionStatus, SolverOptions};
use crate::rng;

pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;
/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_964;
/// Moment tolerance for the projection behind the rate. Closure at `1e-10`
/// is first-order sensitive to the moment residual.
pub const RATE_MOMENT_TOL: f64 = 1e-13;
/// Monte Carlo trials per random stream.
pub const MC_CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SanovMethod {
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilsonInterval {
    pub hits: u64,
    pub trials: u64,
    pub lower: f64,
    pub upper: f64,
}

impl WilsonInterval {
    pub fn new(hits: u64, trials: u64, z: f64) -> Self {
        let n = trials as f64;
        let p = hits as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Self {
            hits,
            trials,
            lower: if hits == 0 {
                0.0
            } else {
                (center - half).max(0.0)
            },
            upper: if hits == trials {
                1.0
            } else {
                (center + half).min(1.0)
            },
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanovReport {
    pub n: u64,
    pub method: SanovMethod,
    /// `log Pr(P̂n ∈ A)`; `-inf` for an empty event or zero Monte Carlo hits.
    pub log_prob: f64,
    /// `D(P*‖P)`.
    pub rate: f64,
    /// `(1/n) D(μ_A‖P*ⁿ)` by enumeration. Under Monte Carlo, the implied value
    /// `−(1/n) log p̂ − rate`.
    pub residual: Option<f64>,
    /// `(1/n) log_prob + rate + residual`.
    pub closure: Option<f64>,
    /// `(1/n) E_μ[Σ c_i log(P*_i/P_i)] − rate`.
    pub slack: Option<f64>,
    /// `closure + slack`, zero for every event.
    pub closure_with_slack: Option<f64>,
    /// `E_μ` of the empirical moments.
    pub conditional_moments: Option<Vec<f64>>,
    pub num_histograms_in_a: u64,
    pub projection_status: ProjectionStatus,
    pub lambda_star: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<WilsonInterval>,
    /// False when the point estimate is undefined (zero hits).
    pub estimate_defined: bool,
}

impl SanovReport {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

/// `C(n + k − 1, k − 1)`, the number of histograms of `n` draws on `k` outcomes.
pub fn histogram_count(n: u64, k: usize) -> u128 {
    let (n, r) = (n as u128, (k as u128).saturating_sub(1));
    let mut acc: u128 = 1;
    for i in 1..=r {
        acc = acc.saturating_mul(n + i) / i;
    }
    acc
}

/// Calls `visit` on every composition of `n` into `k` parts, in lexicographic
/// order.
pub fn for_each_composition(n: u64, k: usize, mut visit: impl FnMut(&[u64])) {
    if k == 0 {
        return;
    }
    let mut c = vec![0u64; k];
    c[k - 1] = n;
    loop {
        visit(&c);
        // Grow the rightmost non-last part that still has mass to its right,
        // then push all remaining mass into the last part.
        let Some(i) = (0..k - 1)
            .rev()
            .find(|&i| c[i + 1..].iter().any(|&v| v > 0))
        else {
            return;
        };
        let rest: u64 = c[i + 1..].iter().sum();
        c[i] += 1;
        c[i + 1..].iter_mut().for_each(|v| *v = 0);
        c[k - 1] = rest - 1;
    }
}

fn check_inputs(p: &FiniteDistribution, event: &ConstraintSet, n: u64, cap: u64) -> Result<()> {
    event.features().check_width(p.len())?;
    if n == 0 {
        return Err(Error::InvalidParameters("n must be at least 1".into()));
    }
    let count = histogram_count(n, p.len());
    if count > cap as u128 {
        return Err(Error::EnumerationCap { count, cap });
    }
    Ok(())
}

/// Histograms of `n` draws whose empirical measure lies in the event, with
/// their log-probabilities under `p`. Zero-probability histograms are skipped.
struct EventHistograms {
    counts: Vec<Vec<u64>>,
    log_probs: Vec<f64>,
    log_prob: f64,
}

fn histogram_moments(c: &[u64], n: u64, event: &ConstraintSet) -> Vec<f64> {
    let n = n as f64;
    event
        .features()
        .rows()
        .iter()
        .map(|row| row.iter().zip(c).map(|(f, &k)| f * k as f64).sum::<f64>() / n)
        .collect()
}

fn in_event(c: &[u64], n: u64, event: &ConstraintSet) -> bool {
    event.contains_moments(&histogram_moments(c, n, event), DEFAULT_MEMBERSHIP_TOL)
}

/// Enumerates in parallel over the first count; blocks are concatenated in
/// order so the result never depends on scheduling.
fn collect_event(p: &FiniteDistribution, event: &ConstraintSet, n: u64) -> Result<EventHistograms> {
    let k = p.len();
    let blocks: Vec<(Vec<Vec<u64>>, Vec<f64>)> = (0..=n)
        .into_par_iter()
        .map(|first| {
            let mut counts = Vec::new();
            let mut lps = Vec::new();
            let mut full = vec![0u64; k];
            full[0] = first;
            let mut visit = |rest: &[u64]| {
                full[1..].copy_from_slice(rest);
                if !in_event(&full, n, event) {
                    return;
                }
                let em = EmpiricalMeasure::new(full.clone()).expect("n ≥ 1");
                let lp = log_histogram_prob(&em, p).expect("shapes checked");
                if lp > f64::NEG_INFINITY {
                    counts.push(full.clone());
                    lps.push(lp);
                }
            };
            if k == 1 {
                if first == n {
                    visit(&[]);
                }
            } else {
                for_each_composition(n - first, k - 1, &mut visit);
            }
            (counts, lps)
        })
        .collect();
    let mut counts = Vec::new();
    let mut log_probs = Vec::new();
    let mut acc = LogSumExp::default();
    for (c, l) in blocks {
        l.iter().for_each(|&v| acc.push(v));
        counts.extend(c);
        log_probs.extend(l);
    }
    Ok(EventHistograms {
        counts,
        log_probs,
        log_prob: acc.value(),
    })
}

/// `D(μ‖Rⁿ)` and `E_μ[Σ c_i log(R_i/P_i)]` for the conditional law `μ` of the
/// event under `p`.
fn conditional_divergences(
    events: &EventHistograms,
    p: &FiniteDistribution,
    reference: &FiniteDistribution,
) -> (f64, f64) {
    let mut divergence = 0.0;
    let mut log_ratio = 0.0;
    for (c, &lp) in events.counts.iter().zip(&events.log_probs) {
        let log_mu = lp - events.log_prob;
        let mu = log_mu.exp();
        let em = EmpiricalMeasure::new(c.clone()).expect("n ≥ 1");
        let ref_energy: f64 = c
            .iter()
            .zip(reference.log_probs())
            .filter(|(k, _)| **k > 0)
            .map(|(&k, &lr)| k as f64 * lr)
            .sum();
        let p_energy: f64 = c
            .iter()
            .zip(p.log_probs())
            .filter(|(k, _)| **k > 0)
            .map(|(&k, &lp)| k as f64 * lp)
            .sum();
        divergence += mu * (log_mu - log_multinomial(&em) - ref_energy);
        log_ratio += mu * (ref_energy - p_energy);
    }
    (divergence, log_ratio)
}

fn conditional_moments(events: &EventHistograms, n: u64, event: &ConstraintSet) -> Vec<f64> {
    let mut out = vec![0.0; event.dim()];
    for (c, &lp) in events.counts.iter().zip(&events.log_probs) {
        let mu = (lp - events.log_prob).exp();
        for (o, m) in out.iter_mut().zip(histogram_moments(c, n, event)) {
            *o += mu * m;
        }
    }
    out
}

/// Exact `Pr(P̂n ∈ A)` by enumeration, with the rate `D(P*‖P)` and the
/// residual `(1/n) D(μ_A‖P*ⁿ)`.
pub fn enumerate_event(
    p: &FiniteDistribution,
    event: &ConstraintSet,
    n: u64,
) -> Result<SanovReport> {
    enumerate_event_capped(p, event, n, DEFAULT_ENUMERATION_CAP, &rate_solver())
}

pub fn rate_solver() -> SolverOptions {
    SolverOptions {
        moment_tol: RATE_MOMENT_TOL,
        ..SolverOptions::default()
    }
}

pub fn enumerate_event_capped(
    p: &FiniteDistribution,
    event: &ConstraintSet,
    n: u64,
    cap: u64,
    opts: &SolverOptions,
) -> Result<SanovReport> {
    check_inputs(p, event, n, cap)?;
    let events = collect_event(p, event, n)?;
    let star = project_inequality(p, event, opts)?;
    let nf = n as f64;
    if events.log_prob == f64::NEG_INFINITY {
        return Ok(SanovReport {
            n,
            method: SanovMethod::ExactEnumeration,
            log_prob: f64::NEG_INFINITY,
            rate: star.min_divergence,
            residual: None,
            closure: None,
            slack: None,
            closure_with_slack: None,
            conditional_moments: None,
            num_histograms_in_a: 0,
            projection_status: star.status,
            lambda_star: star.lambda_star,
            interval: None,
            estimate_defined: true,
        });
    }
    let (divergence, log_ratio) = conditional_divergences(&events, p, &star.projection);
    let rate = star.min_divergence;
    let residual = divergence / nf;
    let closure = events.log_prob / nf + rate + residual;
    let slack = log_ratio / nf - rate;
    Ok(SanovReport {
        n,
        method: SanovMethod::ExactEnumeration,
        log_prob: events.log_prob,
        rate,
        residual: Some(residual),
        closure: Some(closure),
        slack: Some(slack),
        closure_with_slack: Some(closure + slack),
        conditional_moments: Some(conditional_moments(&events, n, event)),
        num_histograms_in_a: events.counts.len() as u64,
        projection_status: star.status,
        lambda_star: star.lambda_star,
        interval: None,
        estimate_defined: true,
    })
}

/// The law of the histogram given `P̂n ∈ A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalLaw {
    pub n: u64,
    pub histograms: Vec<Vec<u64>>,
    pub masses: Vec<f64>,
}

pub fn conditional_law(
    p: &FiniteDistribution,
    event: &ConstraintSet,
    n: u64,
) -> Result<ConditionalLaw> {
    check_inputs(p, event, n, DEFAULT_ENUMERATION_CAP)?;
    let events = collect_event(p, event, n)?;
    if events.log_prob == f64::NEG_INFINITY {
        return Err(Error::EmptyEvent);
    }
    let masses = events
        .log_probs
        .iter()
        .map(|lp| (lp - events.log_prob).exp())
        .collect();
    Ok(ConditionalLaw {
        n,
        histograms: events.counts,
        masses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    pub log_prob: f64,
    pub rate: f64,
    pub residual: Option<f64>,
}

/// `(n, (1/n) D(μ_A‖P*ⁿ))` for every requested `n`.
pub fn gibbs_conditioning_curve(
    p: &FiniteDistribution,
    event: &ConstraintSet,
    ns: &[u64],
) -> Result<Vec<CurvePoint>> {
    ns.iter()
        .map(|&n| {
            let r = enumerate_event(p, event, n)?;
            Ok(CurvePoint {
                n,
                log_prob: r.log_prob,
                rate: r.rate,
                residual: r.residual,
            })
        })
        .collect()
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("n,log_prob,rate,residual\n");
    for pt in points {
        let residual = pt.residual.map(|r| r.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            pt.n, pt.log_prob, pt.rate, residual
        ));
    }
    out
}

/// Compares `log Pr(P̂n ∈ B | P̂n ∈ A)` with `−(D(μ_B‖P*_Aⁿ) − D(μ_A‖P*_Aⁿ))`.
///
/// The two agree when `E_μ[Σ c_i log(P*_A,i/P_i)]` is the same under `μ_A`
/// and `μ_B`; the difference of those expectations is recorded as
/// `slack_correction`, and `lhs − rhs + slack_correction` as
/// `residual_with_slack`.
pub fn nested_relative_probability(
    p: &FiniteDistribution,
    outer: &ConstraintSet,
    inner: &ConstraintSet,
    n: u64,
) -> Result<IdentityReport> {
    check_inputs(p, outer, n, DEFAULT_ENUMERATION_CAP)?;
    inner.features().check_width(p.len())?;
    let a = collect_event(p, outer, n)?;
    let b = collect_event(p, inner, n)?;
    if a.log_prob == f64::NEG_INFINITY || b.log_prob == f64::NEG_INFINITY {
        return Err(Error::EmptyEvent);
    }
    if let Some(c) = b.counts.iter().find(|c| !in_event(c, n, outer)) {
        return Err(Error::NotSubset(format!(
            "histogram {c:?} is in B but not in A"
        )));
    }
    let star = project_inequality(p, outer, &rate_solver())?;
    let (div_a, ratio_a) = conditional_divergences(&a, p, &star.projection);
    let (div_b, ratio_b) = conditional_divergences(&b, p, &star.projection);
    let lhs = b.log_prob - a.log_prob;
    let rhs = -(div_b - div_a);
    let correction = ratio_b - ratio_a;
    Ok(
        IdentityReport::new("nested_relative_probability", lhs, rhs, 1e-10, Check::Equal)
            .with_detail("log_prob_a", a.log_prob)
            .with_detail("log_prob_b", b.log_prob)
            .with_detail("divergence_a", div_a)
            .with_detail("divergence_b", div_b)
            .with_detail("slack_correction", correction)
            .with_detail("residual_with_slack", lhs - rhs + correction),
    )
}

/// Monte Carlo estimate of `Pr(P̂n ∈ A)`. Trials are split into fixed chunks,
/// each with its own stream, and hit counts are summed in chunk order.
pub fn monte_carlo_event(
    p: &FiniteDistribution,
    event: &ConstraintSet,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<SanovReport> {
    event.features().check_width(p.len())?;
    if n == 0 || trials == 0 {
        return Err(Error::InvalidParameters(
            "n and trials must be at least 1".into(),
        ));
    }
    let star = project_inequality(p, event, &rate_solver())?;
    let log_ratio: Vec<f64> = star
        .projection
        .log_probs()
        .iter()
        .zip(p.log_probs())
        .map(|(s, q)| s - q)
        .collect();
    let chunks = trials.div_ceil(MC_CHUNK);
    let per_chunk: Vec<(u64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rng::stream(seed, "sanov-mc", &[chunk]);
            let size = MC_CHUNK.min(trials - chunk * MC_CHUNK);
            let mut hits = 0u64;
            let mut ratio_sum = 0.0;
            for _ in 0..size {
                let c = rng::sample_multinomial(&mut rng, n, p.probs());
                if in_event(&c, n, event) {
                    hits += 1;
                    ratio_sum += c
                        .iter()
                        .zip(&log_ratio)
                        .filter(|(k, _)| **k > 0)
                        .map(|(&k, r)| k as f64 * r)
                        .sum::<f64>();
                }
            }
            (hits, ratio_sum)
        })
        .collect();
    let hits: u64 = per_chunk.iter().map(|(h, _)| h).sum();
    let ratio_sum: f64 = per_chunk.iter().map(|(_, r)| r).sum();
    let nf = n as f64;
    let rate = star.min_divergence;
    let interval = WilsonInterval::new(hits, trials, WILSON_Z);
    let estimate_defined = hits > 0;
    let log_prob = if estimate_defined {
        (hits as f64 / trials as f64).ln()
    } else {
        f64::NEG_INFINITY
    };
    let (residual, slack) = if estimate_defined {
        (
            Some(-log_prob / nf - rate),
            Some(ratio_sum / hits as f64 / nf - rate),
        )
    } else {
        (None, None)
    };
    Ok(SanovReport {
        n,
        method: SanovMethod::MonteCarlo,
        log_prob,
        rate,
        residual,
        closure: None,
        slack,
        closure_with_slack: None,
        conditional_moments: None,
        num_histograms_in_a: 0,
        projection_status: star.status,
        lambda_star: star.lambda_star,
        interval: Some(interval),
        estimate_defined,
    })
}

/// The projection the rate is taken from, for callers that need `P*` itself.
pub fn event_projection(p: &FiniteDistribution, event: &ConstraintSet) -> Result<ProjectionResult> {
    project_inequality(p, event, &rate_solver())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{Alphabet, ConstraintKind, FeatureSet};

    fn fair_coin() -> FiniteDistribution {
        FiniteDistribution::uniform(Alphabet::indexed(2)).unwrap()
    }

    fn heads(kind: ConstraintKind, t: f64) -> ConstraintSet {
        ConstraintSet::new(
            FeatureSet::single("heads", vec![0.0, 1.0]).unwrap(),
            vec![kind],
            vec![t],
        )
        .unwrap()
    }

    #[test]
    fn counts_and_compositions() {
        assert_eq!(histogram_count(10, 2), 11);
        assert_eq!(histogram_count(4, 3), 15);
        assert_eq!(histogram_count(30, 4), 5456);
        for (n, k) in [(0u64, 3usize), (5, 1), (4, 3), (6, 4)] {
            let mut seen = Vec::new();
            for_each_composition(n, k, |c| seen.push(c.to_vec()));
            assert_eq!(seen.len() as u128, histogram_count(n, k), "n={n} k={k}");
            assert!(seen.iter().all(|c| c.iter().sum::<u64>() == n));
            let mut sorted = seen.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted, seen);
        }
    }

    #[test]
    fn certain_event() {
        let r = enumerate_event(&fair_coin(), &ConstraintSet::unconstrained(), 7).unwrap();
        assert!(r.log_prob.abs() < 1e-12);
        assert_eq!(r.rate, 0.0);
        assert!(r.residual.unwrap().abs() < 1e-12);
        assert_eq!(r.num_histograms_in_a, 8);
    }

    #[test]
    fn bernoulli_tail() {
        let r = enumerate_event(&fair_coin(), &heads(ConstraintKind::Ge, 0.8), 10).unwrap();
        assert!((r.log_prob - (56.0f64 / 1024.0).ln()).abs() < 1e-12);
        assert!((r.rate - 0.192_744_757_021_757_5).abs() < 1e-9);
        assert_eq!(r.num_histograms_in_a, 3);
        assert!((r.residual.unwrap() - 0.068_160_946_726_389_5).abs() < 1e-9);
        assert!(r.closure_with_slack.unwrap().abs() < 1e-10);
        // slack = λ*·(E_μ[heads] − 0.8) with E_μ[heads] = 46/56.
        let expected_slack = 4f64.ln() * (46.0 / 56.0 - 0.8);
        assert!((r.slack.unwrap() - expected_slack).abs() < 1e-9);
        assert!((r.conditional_moments.unwrap()[0] - 46.0 / 56.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_point_event() {
        let r = enumerate_event(&fair_coin(), &heads(ConstraintKind::Eq, 1.0), 5).unwrap();
        assert!((r.log_prob - 5.0 * 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(r.projection_status, ProjectionStatus::BoundaryNonattained);
        assert!(r.residual.unwrap().abs() < 1e-12);
        assert!(r.closure.unwrap().abs() < 1e-10);
    }

    #[test]
    fn equality_event_closes_without_slack() {
        let p = FiniteDistribution::from_probs(vec![0.2, 0.5, 0.3]).unwrap();
        let f = FeatureSet::single("x", vec![0.0, 1.0, 2.0]).unwrap();
        let a = ConstraintSet::equalities(f, vec![1.25]).unwrap();
        let r = enumerate_event(&p, &a, 12).unwrap();
        assert!(r.num_histograms_in_a > 1);
        assert!(r.closure.unwrap().abs() < 1e-10, "{:?}", r.closure);
        assert!(r.slack.unwrap().abs() < 1e-10);
        assert!(r.residual.unwrap() >= -1e-12);
    }

    #[test]
    fn empty_event_is_reported() {
        let p = FiniteDistribution::from_probs(vec![1.0, 0.0]).unwrap();
        let r = enumerate_event(&p, &heads(ConstraintKind::Ge, 0.5), 4).unwrap();
        assert_eq!(r.log_prob, f64::NEG_INFINITY);
        assert!(r.residual.is_none());
        assert!(matches!(
            conditional_law(&p, &heads(ConstraintKind::Ge, 0.5), 4),
            Err(Error::EmptyEvent)
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let p = FiniteDistribution::uniform(Alphabet::indexed(10)).unwrap();
        let e = enumerate_event_capped(
            &p,
            &ConstraintSet::unconstrained(),
            30,
            1000,
            &SolverOptions::default(),
        );
        assert!(matches!(e, Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn conditional_law_examples() {
        let law = conditional_law(&fair_coin(), &heads(ConstraintKind::Ge, 0.8), 10).unwrap();
        assert_eq!(law.histograms, vec![vec![0, 10], vec![1, 9], vec![2, 8]]);
        let expected = [1.0 / 56.0, 10.0 / 56.0, 45.0 / 56.0];
        for (m, e) in law.masses.iter().zip(expected) {
            assert!((m - e).abs() < 1e-14);
        }
        assert!((law.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let law = conditional_law(&fair_coin(), &ConstraintSet::unconstrained(), 4).unwrap();
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        for (m, b) in law.masses.iter().zip(binom) {
            assert!((m - b / 16.0).abs() < 1e-14);
        }
        let law = conditional_law(&fair_coin(), &heads(ConstraintKind::Eq, 1.0), 6).unwrap();
        assert_eq!(law.masses, vec![1.0]);
    }

    #[test]
    fn curve_examples() {
        let pts =
            gibbs_conditioning_curve(&fair_coin(), &heads(ConstraintKind::Ge, 0.8), &[10, 20, 40])
                .unwrap();
        assert!(pts[2].residual.unwrap() < pts[0].residual.unwrap());
        let csv = curve_csv(&pts);
        assert_eq!(csv.lines().count(), 4);
        let flat =
            gibbs_conditioning_curve(&fair_coin(), &ConstraintSet::unconstrained(), &[1, 5, 9])
                .unwrap();
        assert!(flat.iter().all(|pt| pt.residual.unwrap().abs() < 1e-12));
    }

    #[test]
    fn single_draw_residual_by_hand() {
        // n = 1: histograms are the two outcomes; μ equals P restricted to A.
        let p = FiniteDistribution::from_probs(vec![0.3, 0.7]).unwrap();
        let r = enumerate_event(&p, &ConstraintSet::unconstrained(), 1).unwrap();
        assert!(r.residual.unwrap().abs() < 1e-12);
        let tail = enumerate_event(&p, &heads(ConstraintKind::Ge, 0.5), 1).unwrap();
        // μ = δ_1 and P already lies in A, so P* = P and D(δ_1‖P*) = −log 0.7.
        assert!((tail.residual.unwrap() + 0.7f64.ln()).abs() < 1e-12);
        let far = enumerate_event(&p, &heads(ConstraintKind::Ge, 0.9), 1).unwrap();
        // P* = Ber(0.9): D(δ_1‖P*) = −log 0.9.
        assert!((far.residual.unwrap() + 0.9f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn nested_examples() {
        let p = fair_coin();
        let a = heads(ConstraintKind::Ge, 0.8);
        let same = nested_relative_probability(&p, &a, &a, 10).unwrap();
        assert!(same.pass && same.residual.abs() < 1e-12);

        let b = heads(ConstraintKind::Ge, 0.9);
        let r = nested_relative_probability(&p, &a, &b, 10).unwrap();
        assert!((r.lhs - (11.0f64 / 56.0).ln()).abs() < 1e-12);
        assert!(r.details["residual_with_slack"].abs() < 1e-10);

        let bad = nested_relative_probability(&p, &b, &a, 10);
        assert!(matches!(bad, Err(Error::NotSubset(_))));
    }

    #[test]
    fn monte_carlo_examples() {
        let p = fair_coin();
        let sure = monte_carlo_event(&p, &ConstraintSet::unconstrained(), 10, 1000, 3).unwrap();
        assert_eq!(sure.log_prob, 0.0);
        assert_eq!(sure.interval.as_ref().unwrap().hits, 1000);

        let r = monte_carlo_event(&p, &heads(ConstraintKind::Ge, 0.8), 10, 200_000, 5).unwrap();
        assert!(r.interval.unwrap().contains(0.0546875));
        let again = monte_carlo_event(&p, &heads(ConstraintKind::Ge, 0.8), 10, 200_000, 5).unwrap();
        assert_eq!(r.log_prob, again.log_prob);

        let none = monte_carlo_event(&p, &heads(ConstraintKind::Ge, 1.0), 60, 1000, 1).unwrap();
        assert!(!none.estimate_defined);
        assert_eq!(none.interval.as_ref().unwrap().lower, 0.0);
    }

    #[test]
    fn wilson_interval_shape() {
        let w = WilsonInterval::new(50, 100, WILSON_Z);
        assert!(w.contains(0.5) && w.lower > 0.39 && w.upper < 0.61);
        let w = WilsonInterval::new(0, 100, WILSON_Z);
        assert_eq!(w.lower, 0.0);
        assert!(w.upper > 0.0 && w.upper < 0.05);
    }
}
