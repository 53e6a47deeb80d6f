//! Numerical certificates for the divergence identities that tie data,
//! projections and exponential-family models together, plus a seeded suite
//! that runs every certificate over random instances.
//!
//! Tolerances follow a ladder: `1e-10` for closed-form identities, `1e-8` when
//! a solver output participates, `1e-6` when two solver outputs are compared.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{
    cross_entropy, entropy, kl_divergence, moments, Alphabet, ConstraintKind, ConstraintSet,
    FeatureSet, FiniteDistribution, DEFAULT_MEMBERSHIP_TOL,
};
use crate::error::{Error, Result};
use crate::expfam::ExpFamModel;
use crate::numeric::max_abs_diff;
use crate::projection::{project, ProjectionResult, ProjectionStatus, SolverOptions};
use crate::rng;
use crate::sanov::{enumerate_event, histogram_count, SanovReport};

pub const CLOSED_FORM_TOL: f64 = 1e-10;
pub const SOLVER_TOL: f64 = 1e-8;
pub const TWO_SOLVER_TOL: f64 = 1e-6;
pub const BOGOLIUBOV_TOL: f64 = 1e-9;
pub const ENERGY_MATCH_TOL: f64 = 1e-9;
pub const SANDWICH_TOL: f64 = 1e-9;
pub const FISHER_FD_TOL: f64 = 1e-4;
pub const SCALE_RANGE: (f64, f64) = (1e-3, 1e3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// `|lhs − rhs| ≤ tol`.
    Equal,
    /// `lhs ≤ rhs + tol`.
    AtMost,
    /// `lhs ≥ rhs − tol`.
    AtLeast,
    /// `lower − tol ≤ lhs ≤ rhs + tol`, with `lower` in the details.
    Between,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed `lhs − rhs` for equalities and one-sided checks; for `Between`,
    /// the larger of the two violations.
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub check: Check,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl IdentityReport {
    pub fn new(name: &str, lhs: f64, rhs: f64, tol: f64, check: Check) -> Self {
        let residual = lhs - rhs;
        let pass = match check {
            Check::Equal => residual.abs() <= tol,
            Check::AtMost => residual <= tol,
            Check::AtLeast => residual >= -tol,
            Check::Between => residual <= tol,
        };
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            residual,
            tol,
            pass,
            check,
            mode: None,
            details: BTreeMap::new(),
        }
    }

    /// `lower ≤ value ≤ upper`.
    pub fn between(name: &str, value: f64, lower: f64, upper: f64, tol: f64) -> Self {
        let residual = (value - upper).max(lower - value);
        Self {
            name: name.to_string(),
            lhs: value,
            rhs: upper,
            residual,
            tol,
            pass: residual <= tol,
            check: Check::Between,
            mode: None,
            details: BTreeMap::from([("lower".to_string(), lower)]),
        }
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn with_mode(mut self, mode: &str) -> Self {
        self.mode = Some(mode.to_string());
        self
    }

    /// Adds an extra requirement to `pass`.
    fn require(mut self, ok: bool) -> Self {
        self.pass &= ok;
        self
    }
}

/// Moment targets recovered from a projection: `E_{P*}[f] − residual`.
fn targets_of(star: &ProjectionResult) -> Vec<f64> {
    moments(&star.projection, star.model.features())
        .expect("projection lives on the model's alphabet")
        .iter()
        .zip(&star.moment_residual)
        .map(|(m, r)| m - r)
        .collect()
}

fn require_in_constraint_set(p: &FiniteDistribution, star: &ProjectionResult) -> Result<()> {
    star.projection.check_same_alphabet(p)?;
    let gap = max_abs_diff(&moments(p, star.model.features())?, &targets_of(star));
    if gap > DEFAULT_MEMBERSHIP_TOL {
        return Err(Error::NotInConstraintSet(format!("moment gap {gap:e}")));
    }
    Ok(())
}

fn require_same_family(star: &ProjectionResult, model: &ExpFamModel) -> Result<()> {
    if star.model.same_family(model) {
        Ok(())
    } else {
        Err(Error::FamilyMismatch)
    }
}

/// `D(P‖P_λ) = D(P*‖P_λ) + D(P‖P*)`: regret splits into estimation and
/// approximation error.
pub fn pythagorean(
    p: &FiniteDistribution,
    star: &ProjectionResult,
    model: &ExpFamModel,
) -> Result<IdentityReport> {
    require_in_constraint_set(p, star)?;
    require_same_family(star, model)?;
    let regret = kl_divergence(p, model.distribution())?;
    let estimation = kl_divergence(&star.projection, model.distribution())?;
    let approximation = kl_divergence(p, &star.projection)?;
    Ok(IdentityReport::new(
        "pythagorean",
        regret,
        estimation + approximation,
        SOLVER_TOL,
        Check::Equal,
    )
    .with_detail("regret", regret)
    .with_detail("estimation_error", estimation)
    .with_detail("approximation_error", approximation))
}

/// `D(Q‖P_b) − D(Q‖P_a) = D(P_a‖P_b)` whenever `Q` has the moments of `P_a`.
pub fn robustness(
    q: &FiniteDistribution,
    a: &ExpFamModel,
    b: &ExpFamModel,
) -> Result<IdentityReport> {
    if !a.same_family(b) {
        return Err(Error::FamilyMismatch);
    }
    a.prior().check_same_alphabet(q)?;
    let gap = max_abs_diff(&moments(q, a.features())?, &a.mean_parameters());
    if gap > DEFAULT_MEMBERSHIP_TOL {
        return Err(Error::MomentMismatch(format!("moment gap {gap:e}")));
    }
    let lhs = kl_divergence(q, b.distribution())? - kl_divergence(q, a.distribution())?;
    let rhs = kl_divergence(a.distribution(), b.distribution())?;
    let loss_gap = cross_entropy(q, b.distribution())? - cross_entropy(q, a.distribution())?;
    let report = IdentityReport::new("robustness", lhs, rhs, SOLVER_TOL, Check::Equal)
        .with_detail("cross_entropy_gap", loss_gap)
        .with_detail("cross_entropy_residual", loss_gap - rhs);
    let loss_ok = (loss_gap - rhs).abs() <= SOLVER_TOL;
    Ok(report.require(loss_ok))
}

/// Both directions of the variational free-energy bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BogoliubovReports {
    pub upper: IdentityReport,
    pub lower: IdentityReport,
}

/// `F^λ(P) = U^λ(P) + D(P‖P₀)`.
fn free_energy(model: &ExpFamModel, p: &FiniteDistribution) -> Result<f64> {
    Ok(model.energies(p)?.free_energy)
}

fn scaled(model: &ExpFamModel, c: f64) -> Result<ExpFamModel> {
    model.with_lambda(model.lambda().iter().map(|l| c * l).collect())
}

/// Root of `h` on `[lo, hi]` in log-scale: scan for a sign change, then bisect.
fn solve_scale(h: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if h(1.0)?.abs() <= ENERGY_MATCH_TOL * 1e-3 {
        return Ok(1.0);
    }
    let (lo, hi) = (SCALE_RANGE.0.ln(), SCALE_RANGE.1.ln());
    const GRID: usize = 240;
    let mut prev_t = lo;
    let mut prev_h = h(lo.exp())?;
    for step in 1..=GRID {
        let t = lo + (hi - lo) * step as f64 / GRID as f64;
        let ht = h(t.exp())?;
        if prev_h == 0.0 {
            return Ok(prev_t.exp());
        }
        if prev_h.signum() != ht.signum() {
            let (mut a, mut b, mut ha) = (prev_t, t, prev_h);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let hm = h(mid.exp())?;
                if hm == 0.0 || (b - a) < 1e-15 {
                    a = mid;
                    b = mid;
                    break;
                }
                if hm.signum() == ha.signum() {
                    a = mid;
                    ha = hm;
                } else {
                    b = mid;
                }
            }
            let c = (0.5 * (a + b)).exp();
            let residual = h(c)?;
            if residual.abs() > ENERGY_MATCH_TOL {
                return Err(Error::EnergyMatching(format!(
                    "bisection stalled at mismatch {residual:e}"
                )));
            }
            return Ok(c);
        }
        prev_t = t;
        prev_h = ht;
    }
    Err(Error::EnergyMatching(format!(
        "no scale in [{}, {}] equalizes the energies",
        SCALE_RANGE.0, SCALE_RANGE.1
    )))
}

fn require_common_prior(target: &ExpFamModel, variational: &ExpFamModel) -> Result<()> {
    target.prior().check_same_alphabet(variational.prior())?;
    if target.prior() != variational.prior() {
        return Err(Error::InvalidParameters(
            "target and variational models need a common prior".into(),
        ));
    }
    Ok(())
}

/// Rescales `ψ` so that `U^λ(P_ψ) = U^ψ(P_ψ)`; the gap
/// `F^ψ(P_ψ) − F^λ(P_λ)` must then equal `D(P_ψ‖P_λ) ≥ 0`.
pub fn bogoliubov_upper(target: &ExpFamModel, variational: &ExpFamModel) -> Result<IdentityReport> {
    require_common_prior(target, variational)?;
    let f_target = free_energy(target, target.distribution())?;
    let scale = solve_scale(|c| {
        let m = scaled(variational, c)?;
        Ok(target.internal_energy(m.distribution())? - m.internal_energy(m.distribution())?)
    })?;
    let psi = scaled(variational, scale)?;
    let mismatch =
        target.internal_energy(psi.distribution())? - psi.internal_energy(psi.distribution())?;
    let f_psi = free_energy(&psi, psi.distribution())?;
    let gap = f_psi - f_target;
    let kl = kl_divergence(psi.distribution(), target.distribution())?;
    Ok(
        IdentityReport::new("bogoliubov_upper", gap, kl, BOGOLIUBOV_TOL, Check::Equal)
            .with_detail("scale", scale)
            .with_detail("energy_mismatch", mismatch)
            .with_detail("free_energy_variational", f_psi)
            .with_detail("free_energy_target", f_target)
            .require(gap >= -CLOSED_FORM_TOL),
    )
}

/// Rescales `ψ` so that `U^λ(P_λ) = U^ψ(P_λ)`; the gap
/// `F^ψ(P_ψ) − F^λ(P_λ)` must then equal `−D(P_λ‖P_ψ) ≤ 0`.
pub fn bogoliubov_lower(target: &ExpFamModel, variational: &ExpFamModel) -> Result<IdentityReport> {
    require_common_prior(target, variational)?;
    let f_target = free_energy(target, target.distribution())?;
    let u_target = target.internal_energy(target.distribution())?;
    let u_var = variational.internal_energy(target.distribution())?;
    // The matching condition is linear in the scale.
    let scale = if u_target == 0.0 && u_var == 0.0 {
        1.0
    } else {
        let c = u_target / u_var;
        if !(c.is_finite() && (SCALE_RANGE.0..=SCALE_RANGE.1).contains(&c)) {
            return Err(Error::EnergyMatching(format!(
                "lower matching needs scale {c}"
            )));
        }
        c
    };
    let psi = scaled(variational, scale)?;
    let mismatch = u_target - psi.internal_energy(target.distribution())?;
    let f_psi = free_energy(&psi, psi.distribution())?;
    let gap = f_psi - f_target;
    let kl = kl_divergence(target.distribution(), psi.distribution())?;
    Ok(
        IdentityReport::new("bogoliubov_lower", gap, -kl, BOGOLIUBOV_TOL, Check::Equal)
            .with_detail("scale", scale)
            .with_detail("energy_mismatch", mismatch)
            .with_detail("free_energy_variational", f_psi)
            .with_detail("free_energy_target", f_target)
            .require(gap <= CLOSED_FORM_TOL && mismatch.abs() <= ENERGY_MATCH_TOL),
    )
}

/// Free-energy bounds between a target `P_λ` and a variational `P_ψ` sharing
/// its prior, each after its own scalar rescaling of `ψ`.
pub fn bogoliubov(target: &ExpFamModel, variational: &ExpFamModel) -> Result<BogoliubovReports> {
    Ok(BogoliubovReports {
        upper: bogoliubov_upper(target, variational)?,
        lower: bogoliubov_lower(target, variational)?,
    })
}

/// `D(P‖P*) = H(P*) − H(P)` under a uniform prior; otherwise
/// `D(P‖P*) = D(P‖P₀) − D(P*‖P₀)`.
pub fn approximation_error_entropy(
    p: &FiniteDistribution,
    star: &ProjectionResult,
) -> Result<IdentityReport> {
    require_in_constraint_set(p, star)?;
    let lhs = kl_divergence(p, &star.projection)?;
    let prior = star.model.prior();
    if prior.is_uniform() {
        let rhs = entropy(&star.projection) - entropy(p);
        Ok(IdentityReport::new(
            "approximation_error_entropy",
            lhs,
            rhs,
            SOLVER_TOL,
            Check::Equal,
        )
        .with_mode("entropy"))
    } else {
        let rhs = kl_divergence(p, prior)? - kl_divergence(&star.projection, prior)?;
        Ok(IdentityReport::new(
            "approximation_error_entropy",
            lhs,
            rhs,
            SOLVER_TOL,
            Check::Equal,
        )
        .with_mode("prior_relative"))
    }
}

/// `H(P, P_λ) = H(P*, P_λ)` for every `P` in the constraint set under a
/// uniform prior. Otherwise the prior's own loss is subtracted on both sides:
/// `H(P,P_λ) − H(P,P₀) = H(P*,P_λ) − H(P*,P₀)`.
pub fn pretend_data_identity(
    p: &FiniteDistribution,
    star: &ProjectionResult,
    model: &ExpFamModel,
) -> Result<IdentityReport> {
    require_in_constraint_set(p, star)?;
    require_same_family(star, model)?;
    let data_loss = model.model_cross_entropy(p)?;
    let star_loss = model.model_cross_entropy(&star.projection)?;
    let prior = model.prior();
    if prior.is_uniform() {
        Ok(IdentityReport::new(
            "pretend_data_identity",
            data_loss,
            star_loss,
            SOLVER_TOL,
            Check::Equal,
        )
        .with_mode("entropy"))
    } else {
        let lhs = data_loss - cross_entropy(p, prior)?;
        let rhs = star_loss - cross_entropy(&star.projection, prior)?;
        Ok(
            IdentityReport::new("pretend_data_identity", lhs, rhs, SOLVER_TOL, Check::Equal)
                .with_mode("prior_relative")
                .with_detail("data_loss", data_loss)
                .with_detail("projection_loss", star_loss),
        )
    }
}

fn require_finite_probability(sanov: &SanovReport) -> Result<f64> {
    if sanov.n == 0 || !sanov.log_prob.is_finite() {
        return Err(Error::EmptyEvent);
    }
    Ok(sanov.log_prob / sanov.n as f64)
}

/// `(1/n) log Pr(P̂n ∈ A) ≤ H(P*) − log |X|` under a uniform prior.
pub fn entropy_multiplicity_bound(
    star: &ProjectionResult,
    sanov: &SanovReport,
) -> Result<IdentityReport> {
    let prior = star.model.prior();
    if !prior.is_uniform() {
        return Err(Error::PriorNotUniform);
    }
    let lhs = require_finite_probability(sanov)?;
    let rhs = entropy(&star.projection) - (prior.len() as f64).ln();
    Ok(IdentityReport::new(
        "entropy_multiplicity_bound",
        lhs,
        rhs,
        CLOSED_FORM_TOL,
        Check::AtMost,
    )
    .with_detail("entropy_star", entropy(&star.projection)))
}

/// `−H(P*, P) ≤ (1/n) log Pr(P̂n ∈ A) ≤ −D(P*‖P)`; the width of the sandwich
/// is `H(P*)`.
pub fn data_approximates_family(
    star: &ProjectionResult,
    prior: &FiniteDistribution,
    sanov: &SanovReport,
) -> Result<IdentityReport> {
    star.projection.check_same_alphabet(prior)?;
    let rate = kl_divergence(&star.projection, prior)?;
    if (rate - sanov.rate).abs() > TWO_SOLVER_TOL {
        return Err(Error::Inconsistent(format!(
            "projection rate {rate} disagrees with the event report's {}",
            sanov.rate
        )));
    }
    let value = require_finite_probability(sanov)?;
    let loss = cross_entropy(&star.projection, prior)?;
    Ok(IdentityReport::between(
        "data_approximates_family",
        value,
        -loss,
        -rate,
        SANDWICH_TOL,
    )
    .with_detail("sandwich_width", entropy(&star.projection)))
}

/// `C_i = −λ_i² Var[f_i] ≤ 0`.
pub fn heat_capacity_sign(model: &ExpFamModel, index: usize) -> Result<IdentityReport> {
    let c = model.heat_capacity(index)?;
    Ok(
        IdentityReport::new("heat_capacity_sign", c.value, 0.0, 0.0, Check::AtMost)
            .with_detail("index", index as f64),
    )
}

/// Largest entry of the central-difference Jacobian of `∇A` minus the Fisher
/// matrix, relative to the Fisher matrix's largest entry.
pub fn fisher_finite_difference(model: &ExpFamModel) -> Result<IdentityReport> {
    let fisher = model.fisher_information();
    let d = model.dim();
    let scale = fisher.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for j in 0..d {
        let h = 1e-5 * (1.0 + model.lambda()[j].abs());
        let mut plus = model.lambda().to_vec();
        let mut minus = plus.clone();
        plus[j] += h;
        minus[j] -= h;
        let gp = model.with_lambda(plus)?.mean_parameters();
        let gm = model.with_lambda(minus)?.mean_parameters();
        for i in 0..d {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            worst = worst.max((fd - fisher[(i, j)]).abs());
        }
    }
    let rel = if scale > 0.0 { worst / scale } else { worst };
    Ok(IdentityReport::new(
        "fisher_finite_difference",
        rel,
        0.0,
        FISHER_FD_TOL,
        Check::AtMost,
    )
    .with_detail("fisher_scale", scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstancePrior {
    Uniform,
    Dirichlet1,
    /// Read from an instance file.
    Supplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub seed: u64,
    pub index: u64,
    pub alphabet_size: usize,
    pub dim: usize,
    pub prior_mode: InstancePrior,
    pub sanov_n: u64,
}

/// One random `(prior, features, data, model)` quadruple with the auxiliary
/// objects the identities need.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub descriptor: InstanceDescriptor,
    pub prior: FiniteDistribution,
    pub features: FeatureSet,
    pub data: FiniteDistribution,
    pub model: ExpFamModel,
    pub star: ProjectionResult,
    /// Distribution sharing the moments of `robust_a`.
    pub matched: FiniteDistribution,
    pub robust_a: ExpFamModel,
    pub robust_b: ExpFamModel,
    /// Variational models for which the upper and lower energy matchings are
    /// attainable. One model cannot serve both when `U^λ(P₀) > 0 > U^λ(P_λ)`.
    pub variational_upper: ExpFamModel,
    pub variational_lower: ExpFamModel,
    /// Half-space event on the first feature at the data's moment.
    pub event: ConstraintSet,
}

pub const MAX_ALPHABET: usize = 20;
pub const MAX_DIM: usize = 4;
pub const MAX_LAMBDA: f64 = 3.0;
/// Largest histogram count used for the enumerated checks inside the suite.
pub const SUITE_HISTOGRAM_BUDGET: u128 = 20_000;

fn suite_solver() -> SolverOptions {
    SolverOptions {
        moment_tol: 1e-11,
        ..SolverOptions::default()
    }
}

fn random_lambda<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| rng.random_range(-MAX_LAMBDA..=MAX_LAMBDA))
        .collect()
}

fn random_features<R: Rng>(rng: &mut R, d: usize, k: usize) -> FeatureSet {
    let matrix = (0..d)
        .map(|_| (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    FeatureSet::new((0..d).map(|i| format!("f{i}")).collect(), matrix).expect("rectangular")
}

fn random_distribution<R: Rng>(rng: &mut R, alphabet: &Alphabet) -> FiniteDistribution {
    FiniteDistribution::new(
        alphabet.clone(),
        rng::sample_dirichlet1(rng, alphabet.len()),
    )
    .expect("simplex draw")
}

/// Random features plus a constant row. The constant shifts the energy
/// without moving `P_ψ`, so both signs of `ψ·g` across outcomes are reachable.
fn random_offset_model<R: Rng>(
    rng: &mut R,
    prior: &FiniteDistribution,
    k: usize,
) -> Result<ExpFamModel> {
    let d = rng.random_range(1..=MAX_DIM - 1);
    let random = random_features(rng, d, k);
    let mut psi = random_lambda(rng, d);
    let bound = random
        .scores(&psi, k)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        + 1.0;
    psi.push(rng.random_range(-bound..=bound));
    let features = random.concat(&FeatureSet::single("offset", vec![1.0; k])?)?;
    ExpFamModel::new(prior.clone(), features, psi)
}

/// Draws variational families until `matching` succeeds on one.
fn random_variational<R: Rng>(
    rng: &mut R,
    target: &ExpFamModel,
    matching: impl Fn(&ExpFamModel, &ExpFamModel) -> Result<IdentityReport>,
) -> Result<ExpFamModel> {
    const ATTEMPTS: usize = 256;
    let k = target.prior().len();
    let mut last = None;
    for _ in 0..ATTEMPTS {
        let candidate = random_offset_model(rng, target.prior(), k)?;
        match matching(target, &candidate) {
            Ok(_) => return Ok(candidate),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::EnergyMatching(format!(
        "no variational family found in {ATTEMPTS} draws; last: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

fn largest_enumerable_n(k: usize) -> u64 {
    (1..=12u64)
        .rev()
        .find(|&n| histogram_count(n, k) <= SUITE_HISTOGRAM_BUDGET)
        .unwrap_or(1)
}

pub fn random_instance(seed: u64, index: u64) -> Result<RandomInstance> {
    let mut rng = rng::stream(seed, "identity-instance", &[index]);
    let k = rng.random_range(3..=MAX_ALPHABET);
    let d = rng.random_range(1..=MAX_DIM);
    let alphabet = Alphabet::indexed(k);
    let prior_mode = if rng.random_bool(0.5) {
        InstancePrior::Uniform
    } else {
        InstancePrior::Dirichlet1
    };
    let prior = match prior_mode {
        InstancePrior::Uniform => FiniteDistribution::uniform(alphabet.clone())?,
        InstancePrior::Dirichlet1 | InstancePrior::Supplied => {
            random_distribution(&mut rng, &alphabet)
        }
    };
    let features = random_features(&mut rng, d, k);
    let data = random_distribution(&mut rng, &alphabet);
    let alpha = moments(&data, &features)?;
    let opts = suite_solver();
    let star = project(
        &prior,
        &ConstraintSet::equalities(features.clone(), alpha.clone())?,
        &opts,
    )?;
    let model = ExpFamModel::new(prior.clone(), features.clone(), random_lambda(&mut rng, d))?;
    let robust_a = model.with_lambda(random_lambda(&mut rng, d))?;
    let robust_b = model.with_lambda(random_lambda(&mut rng, d))?;
    let perturbed = random_distribution(&mut rng, &alphabet);
    let matched = project(
        &perturbed,
        &ConstraintSet::equalities(features.clone(), robust_a.mean_parameters())?,
        &opts,
    )?
    .projection;
    let variational_upper = random_variational(&mut rng, &model, bogoliubov_upper)?;
    let variational_lower = random_variational(&mut rng, &model, bogoliubov_lower)?;
    let event = ConstraintSet::new(
        features.select(&[0]),
        vec![ConstraintKind::Ge],
        vec![alpha[0]],
    )?;
    Ok(RandomInstance {
        descriptor: InstanceDescriptor {
            seed,
            index,
            alphabet_size: k,
            dim: d,
            prior_mode,
            sanov_n: largest_enumerable_n(k),
        },
        prior,
        features,
        data,
        model,
        star,
        matched,
        robust_a,
        robust_b,
        variational_upper,
        variational_lower,
        event,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub instance: InstanceDescriptor,
    pub reports: Vec<IdentityReport>,
    /// Operations that raised instead of reporting.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl InstanceReport {
    pub fn all_pass(&self) -> bool {
        self.errors.is_empty() && self.reports.iter().all(|r| r.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub instances: Vec<InstanceReport>,
    pub all_pass: bool,
}

impl SuiteReport {
    pub fn failures(&self) -> Vec<(&InstanceDescriptor, &IdentityReport)> {
        self.instances
            .iter()
            .flat_map(|i| {
                i.reports
                    .iter()
                    .filter(|r| !r.pass)
                    .map(move |r| (&i.instance, r))
            })
            .collect()
    }
}

/// Runs every certificate on one instance; errors are recorded, not raised.
pub fn check_instance(inst: &RandomInstance) -> InstanceReport {
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    let mut record = |name: &str, r: Result<Vec<IdentityReport>>| match r {
        Ok(mut rs) => reports.append(&mut rs),
        Err(e) => errors.push(format!("{name}: {e}")),
    };
    record(
        "pythagorean",
        pythagorean(&inst.data, &inst.star, &inst.model).map(|r| vec![r]),
    );
    record(
        "robustness",
        robustness(&inst.matched, &inst.robust_a, &inst.robust_b).map(|r| vec![r]),
    );
    record(
        "bogoliubov_upper",
        bogoliubov_upper(&inst.model, &inst.variational_upper).map(|r| vec![r]),
    );
    record(
        "bogoliubov_lower",
        bogoliubov_lower(&inst.model, &inst.variational_lower).map(|r| vec![r]),
    );
    record(
        "approximation_error_entropy",
        approximation_error_entropy(&inst.data, &inst.star).map(|r| vec![r]),
    );
    record(
        "pretend_data_identity",
        pretend_data_identity(&inst.data, &inst.star, &inst.model).map(|r| vec![r]),
    );
    record(
        "heat_capacity_sign",
        (0..inst.model.dim())
            .map(|i| heat_capacity_sign(&inst.model, i))
            .collect(),
    );
    record(
        "fisher_finite_difference",
        fisher_finite_difference(&inst.model).map(|r| vec![r]),
    );
    record("sanov", sanov_checks(inst));
    InstanceReport {
        instance: inst.descriptor.clone(),
        reports,
        errors,
    }
}

fn sanov_checks(inst: &RandomInstance) -> Result<Vec<IdentityReport>> {
    let sanov = enumerate_event(&inst.prior, &inst.event, inst.descriptor.sanov_n)?;
    let star = project(&inst.prior, &inst.event, &suite_solver())?;
    if star.status == ProjectionStatus::Infeasible {
        return Err(Error::Inconsistent("event projection is infeasible".into()));
    }
    let mut out = vec![data_approximates_family(&star, &inst.prior, &sanov)?];
    if inst.prior.is_uniform() {
        out.push(entropy_multiplicity_bound(&star, &sanov)?);
    }
    Ok(out)
}

/// A hand-built instance. The model is `P_λ` in the family of
/// `(prior, features)`; the projection targets the data's moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppliedInstance {
    pub prior: FiniteDistribution,
    pub features: FeatureSet,
    pub data: FiniteDistribution,
    pub lambda: Vec<f64>,
    /// Variational model for both free-energy bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variational: Option<ExpFamModel>,
    /// Event and draw count for the enumerated bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<ConstraintSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
}

pub fn check_supplied(inst: &SuppliedInstance, index: u64) -> InstanceReport {
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    let mut record = |name: &str, r: Result<Vec<IdentityReport>>| match r {
        Ok(mut rs) => reports.append(&mut rs),
        Err(e) => errors.push(format!("{name}: {e}")),
    };
    let descriptor = InstanceDescriptor {
        seed: 0,
        index,
        alphabet_size: inst.prior.len(),
        dim: inst.features.dim(),
        prior_mode: InstancePrior::Supplied,
        sanov_n: inst.n.unwrap_or(0),
    };
    let setup = (|| {
        let alpha = moments(&inst.data, &inst.features)?;
        let star = project(
            &inst.prior,
            &ConstraintSet::equalities(inst.features.clone(), alpha)?,
            &suite_solver(),
        )?;
        let model = ExpFamModel::in_family(star.model.family().clone(), inst.lambda.clone())?;
        Ok::<_, Error>((star, model))
    })();
    let (star, model) = match setup {
        Ok(v) => v,
        Err(e) => {
            errors.push(format!("setup: {e}"));
            return InstanceReport {
                instance: descriptor,
                reports,
                errors,
            };
        }
    };
    record(
        "pythagorean",
        pythagorean(&inst.data, &star, &model).map(|r| vec![r]),
    );
    if star.is_converged() {
        record(
            "robustness",
            robustness(&inst.data, &star.model, &model).map(|r| vec![r]),
        );
    }
    record(
        "approximation_error_entropy",
        approximation_error_entropy(&inst.data, &star).map(|r| vec![r]),
    );
    record(
        "pretend_data_identity",
        pretend_data_identity(&inst.data, &star, &model).map(|r| vec![r]),
    );
    record(
        "heat_capacity_sign",
        (0..model.dim())
            .map(|i| heat_capacity_sign(&model, i))
            .collect(),
    );
    record(
        "fisher_finite_difference",
        fisher_finite_difference(&model).map(|r| vec![r]),
    );
    if let Some(variational) = &inst.variational {
        record(
            "bogoliubov",
            bogoliubov(&model, variational).map(|b| vec![b.upper, b.lower]),
        );
    }
    if let (Some(event), Some(n)) = (&inst.event, inst.n) {
        let sanov = (|| {
            let report = enumerate_event(&inst.prior, event, n)?;
            let star = project(&inst.prior, event, &suite_solver())?;
            let mut out = vec![data_approximates_family(&star, &inst.prior, &report)?];
            if inst.prior.is_uniform() {
                out.push(entropy_multiplicity_bound(&star, &report)?);
            }
            Ok(out)
        })();
        record("sanov", sanov);
    }
    InstanceReport {
        instance: descriptor,
        reports,
        errors,
    }
}

/// Deterministic in `seed`; instances run in parallel and are reported in
/// index order.
pub fn run_suite(seed: u64, instances: u64) -> SuiteReport {
    let reports: Vec<InstanceReport> = (0..instances)
        .into_par_iter()
        .map(|index| match random_instance(seed, index) {
            Ok(inst) => check_instance(&inst),
            Err(e) => InstanceReport {
                instance: InstanceDescriptor {
                    seed,
                    index,
                    alphabet_size: 0,
                    dim: 0,
                    prior_mode: InstancePrior::Uniform,
                    sanov_n: 0,
                },
                reports: Vec::new(),
                errors: vec![format!("instance generation: {e}")],
            },
        })
        .collect();
    let all_pass = reports.iter().all(InstanceReport::all_pass);
    SuiteReport {
        seed,
        instances: reports,
        all_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::project_inequality;
    use crate::sanov::enumerate_event;

    const LN4: f64 = 1.386_294_361_119_890_6;

    fn coin() -> FiniteDistribution {
        FiniteDistribution::uniform(Alphabet::indexed(2)).unwrap()
    }

    fn heads() -> FeatureSet {
        FeatureSet::single("heads", vec![0.0, 1.0]).unwrap()
    }

    fn bernoulli_star(alpha: f64) -> ProjectionResult {
        project(
            &coin(),
            &ConstraintSet::equalities(heads(), vec![alpha]).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn report_checks() {
        assert!(IdentityReport::new("e", 1.0, 1.0 + 1e-11, 1e-10, Check::Equal).pass);
        assert!(!IdentityReport::new("e", 1.0, 1.1, 1e-10, Check::Equal).pass);
        assert!(IdentityReport::new("m", -5.0, 0.0, 0.0, Check::AtMost).pass);
        assert!(!IdentityReport::new("m", 5.0, 0.0, 0.0, Check::AtMost).pass);
        assert!(IdentityReport::new("l", 5.0, 0.0, 0.0, Check::AtLeast).pass);
        assert!(IdentityReport::between("b", 0.5, 0.0, 1.0, 0.0).pass);
        assert!(!IdentityReport::between("b", 1.5, 0.0, 1.0, 1e-9).pass);
    }

    #[test]
    fn pythagorean_cases() {
        let star = bernoulli_star(0.7);
        let p = star.projection.clone();
        let model = star.model.with_lambda(vec![-0.4]).unwrap();
        let r = pythagorean(&p, &star, &model).unwrap();
        assert!(r.pass);
        assert!((r.details["estimation_error"] - r.details["regret"]).abs() < 1e-14);
        let r = pythagorean(&p, &star, &star.model).unwrap();
        assert!(r.details["estimation_error"].abs() < 1e-12);

        let prior = FiniteDistribution::from_probs(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let f = FeatureSet::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 1.0, 2.0, 3.0], vec![1.0, -1.0, 0.5, 0.0]],
        )
        .unwrap();
        let data = FiniteDistribution::from_probs(vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let alpha = moments(&data, &f).unwrap();
        let star = project(
            &prior,
            &ConstraintSet::equalities(f, alpha).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let model = star.model.with_lambda(vec![0.3, -1.2]).unwrap();
        assert!(pythagorean(&data, &star, &model).unwrap().pass);
        let outside = FiniteDistribution::from_probs(vec![0.25; 4]).unwrap();
        assert!(matches!(
            pythagorean(&outside, &star, &model),
            Err(Error::NotInConstraintSet(_))
        ));
    }

    #[test]
    fn robustness_cases() {
        let a = ExpFamModel::new(coin(), heads(), vec![0.5]).unwrap();
        let b = a.with_lambda(vec![-1.0]).unwrap();
        let r = robustness(a.distribution(), &a, &b).unwrap();
        assert!(
            r.pass
                && (r.rhs - kl_divergence(a.distribution(), b.distribution()).unwrap()).abs()
                    < 1e-15
        );
        let r = robustness(a.distribution(), &a, &a).unwrap();
        assert!(r.pass && r.lhs.abs() < 1e-15 && r.rhs.abs() < 1e-15);
        assert!(matches!(
            robustness(&coin(), &a, &b),
            Err(Error::MomentMismatch(_))
        ));
    }

    #[test]
    fn bogoliubov_same_family_is_tight() {
        let target = ExpFamModel::new(coin(), heads(), vec![LN4]).unwrap();
        let r = bogoliubov(&target, &target).unwrap();
        assert!(r.upper.pass && r.lower.pass);
        assert!(r.upper.lhs.abs() < 1e-12 && r.lower.lhs.abs() < 1e-12);
    }

    #[test]
    fn bogoliubov_bernoulli_complement_feature() {
        let target = ExpFamModel::new(coin(), heads(), vec![LN4]).unwrap();
        let tails = FeatureSet::single("tails", vec![1.0, 0.0]).unwrap();
        let variational = ExpFamModel::new(coin(), tails, vec![1.0]).unwrap();
        let r = bogoliubov(&target, &variational).unwrap();
        assert!(r.upper.pass, "{:?}", r.upper);
        assert!(r.lower.pass, "{:?}", r.lower);
        assert!(r.upper.rhs > 0.0);
        // Lower matching solves ln4·0.8 = c·0.2 in closed form.
        assert!((r.lower.details["scale"] - 4.0 * LN4).abs() < 1e-12);
        // Upper matching solves t·eᵗ = ln 4 for t = c·ψ.
        let t = r.upper.details["scale"];
        assert!((t * t.exp() - LN4).abs() < 1e-9);

        let flipped = variational.with_lambda(vec![-1.0]).unwrap();
        assert!(matches!(
            bogoliubov_upper(&target, &flipped),
            Err(Error::EnergyMatching(_))
        ));
        assert!(matches!(
            bogoliubov_lower(&target, &flipped),
            Err(Error::EnergyMatching(_))
        ));
    }

    #[test]
    fn approximation_error_cases() {
        let star = bernoulli_star(0.7);
        let p = FiniteDistribution::from_probs(vec![0.3, 0.7]).unwrap();
        let r = approximation_error_entropy(&p, &star).unwrap();
        assert!(r.pass && r.residual.abs() <= 1e-10);
        assert_eq!(r.mode.as_deref(), Some("entropy"));

        let f = FeatureSet::single("x", vec![0.0, 1.0, 2.0]).unwrap();
        let star = project(
            &FiniteDistribution::uniform(Alphabet::indexed(3)).unwrap(),
            &ConstraintSet::equalities(f, vec![1.2]).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let p = FiniteDistribution::from_probs(vec![0.3, 0.2, 0.5]).unwrap();
        let r = approximation_error_entropy(&p, &star).unwrap();
        assert!(r.pass);
        assert!(entropy(&star.projection) >= entropy(&p));
        let same = approximation_error_entropy(&star.projection, &star).unwrap();
        assert!(same.lhs.abs() < 1e-15 && same.pass);
    }

    #[test]
    fn pretend_data_cases() {
        let f = FeatureSet::single("x", vec![0.0, 1.0, 2.0]).unwrap();
        let c = ConstraintSet::equalities(f.clone(), vec![1.2]).unwrap();
        let u = FiniteDistribution::uniform(Alphabet::indexed(3)).unwrap();
        let star = project(&u, &c, &SolverOptions::default()).unwrap();
        let p = FiniteDistribution::from_probs(vec![0.3, 0.2, 0.5]).unwrap();
        let base = star.model.with_lambda(vec![0.0]).unwrap();
        let r = pretend_data_identity(&p, &star, &base).unwrap();
        assert!(r.pass && (r.lhs - 3f64.ln()).abs() < 1e-12);
        let tilted = star.model.with_lambda(vec![2.5]).unwrap();
        assert!(pretend_data_identity(&p, &star, &tilted).unwrap().pass);

        let skewed = FiniteDistribution::from_probs(vec![0.6, 0.3, 0.1]).unwrap();
        let star = project(&skewed, &c, &SolverOptions::default()).unwrap();
        let model = star.model.with_lambda(vec![-0.7]).unwrap();
        let r = pretend_data_identity(&p, &star, &model).unwrap();
        assert!(r.pass);
        assert_eq!(r.mode.as_deref(), Some("prior_relative"));
        // The bare loss equality does not hold away from a uniform prior.
        assert!((r.details["data_loss"] - r.details["projection_loss"]).abs() > 1e-3);
    }

    fn tail_event() -> ConstraintSet {
        ConstraintSet::new(heads(), vec![ConstraintKind::Ge], vec![0.8]).unwrap()
    }

    #[test]
    fn multiplicity_bound_cases() {
        let star = project_inequality(&coin(), &tail_event(), &SolverOptions::default()).unwrap();
        let sanov = enumerate_event(&coin(), &tail_event(), 10).unwrap();
        let r = entropy_multiplicity_bound(&star, &sanov).unwrap();
        assert!(r.pass);
        assert!((r.lhs - (-0.290_612)).abs() < 1e-6);
        assert!((r.rhs - (-0.192_745)).abs() < 1e-6);

        let free = ConstraintSet::unconstrained();
        let star = project_inequality(&coin(), &free, &SolverOptions::default()).unwrap();
        let sanov = enumerate_event(&coin(), &free, 6).unwrap();
        let r = entropy_multiplicity_bound(&star, &sanov).unwrap();
        assert!(r.pass && r.lhs.abs() < 1e-12 && r.rhs.abs() < 1e-12);

        let skewed = FiniteDistribution::from_probs(vec![0.3, 0.7]).unwrap();
        let star = project_inequality(&skewed, &tail_event(), &SolverOptions::default()).unwrap();
        assert!(matches!(
            entropy_multiplicity_bound(&star, &sanov),
            Err(Error::PriorNotUniform)
        ));
    }

    #[test]
    fn sandwich_cases() {
        let star = project_inequality(&coin(), &tail_event(), &SolverOptions::default()).unwrap();
        let sanov = enumerate_event(&coin(), &tail_event(), 10).unwrap();
        let r = data_approximates_family(&star, &coin(), &sanov).unwrap();
        assert!(r.pass);
        assert!((r.rhs + 0.192_745).abs() < 1e-6);
        assert!((r.details["lower"] + 2f64.ln()).abs() < 1e-12);

        let free = ConstraintSet::unconstrained();
        let star = project_inequality(&coin(), &free, &SolverOptions::default()).unwrap();
        let sanov_free = enumerate_event(&coin(), &free, 4).unwrap();
        assert!(
            data_approximates_family(&star, &coin(), &sanov_free)
                .unwrap()
                .pass
        );
        assert!(matches!(
            data_approximates_family(&star, &coin(), &sanov),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn diagnostics_on_known_models() {
        let m = ExpFamModel::new(coin(), heads(), vec![LN4]).unwrap();
        assert!(heat_capacity_sign(&m, 0).unwrap().pass);
        assert!(fisher_finite_difference(&m).unwrap().pass);
    }

    #[test]
    fn supplied_bernoulli_instance() {
        let inst = SuppliedInstance {
            prior: coin(),
            features: heads(),
            data: FiniteDistribution::from_probs(vec![0.2, 0.8]).unwrap(),
            lambda: vec![0.5],
            variational: Some(
                ExpFamModel::new(
                    coin(),
                    FeatureSet::single("tails", vec![1.0, 0.0]).unwrap(),
                    vec![1.0],
                )
                .unwrap(),
            ),
            event: Some(tail_event()),
            n: Some(10),
        };
        let r = check_supplied(&inst, 0);
        assert!(r.all_pass(), "{r:?}");
        let py = r.reports.iter().find(|r| r.name == "pythagorean").unwrap();
        assert!(py.residual.abs() <= 1e-10);
        assert_eq!(r.reports.len(), 10);
    }

    #[test]
    fn suite_is_deterministic_and_passes() {
        let a = run_suite(11, 6);
        let b = run_suite(11, 6);
        assert_eq!(a, b);
        for inst in &a.instances {
            assert!(inst.errors.is_empty(), "{:?}", inst.errors);
        }
        assert!(a.all_pass, "{:?}", a.failures());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
