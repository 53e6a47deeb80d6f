//! Information projection `P* = argmin_{Q ∈ A} D(Q‖P₀)` and the log-loss fit
//! that reaches the same model from the data side.
//!
//! Equality constraints are solved through the dual `g(λ) = A(λ) − λ·α`, whose
//! gradient is `E_{P_λ}[f] − α` and whose Hessian is the Fisher matrix. When
//! `α` lies on a proper face of the moment polytope the infimum over `λ` is
//! not attained; the exact projection is then the same dual problem solved on
//! the prior restricted to that face.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{
    cross_entropy, kl_divergence, moments, ConstraintKind, ConstraintSet, FeatureSet,
    FiniteDistribution,
};
use crate::error::{Error, Result};
use crate::expfam::{ExpFamModel, Family};
use crate::feasibility::{check_feasibility, maximal_face, FeasibilityReport};
use crate::numeric::{dot, norm_inf};

/// Below this value of `min_x P_λ(x)/P₀(x)` a converged solve is double-checked
/// against the face LP.
const INTERIOR_RATIO: f64 = 1e-6;
const ARMIJO_C: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub moment_tol: f64,
    pub max_iter: usize,
    pub lambda_cap: f64,
    pub equiv_tol: f64,
    pub seed: u64,
    pub trace: bool,
    /// Starting point for the dual solve; zero when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            moment_tol: 1e-9,
            max_iter: 200,
            lambda_cap: 1e4,
            equiv_tol: 1e-6,
            seed: 0,
            trace: false,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionStatus {
    Converged,
    Infeasible,
    BoundaryNonattained,
    /// The iteration budget ran out on an interior problem.
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub gradient_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub status: ProjectionStatus,
    pub lambda_star: Vec<f64>,
    /// `P_{λ*}` on the full prior. On a boundary this is the capped model.
    pub model: ExpFamModel,
    /// The minimizer itself, exact also when the boundary is hit.
    pub projection: FiniteDistribution,
    pub min_divergence: f64,
    /// `E_{P*}[f] − α`.
    pub moment_residual: Vec<f64>,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityReport>,
    /// Constraints held with equality, for inequality problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_set: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

impl ProjectionResult {
    pub fn is_converged(&self) -> bool {
        self.status == ProjectionStatus::Converged
    }

    /// `λ*·α − A(λ*)`, the dual objective at the returned parameters.
    pub fn dual_value(&self, targets: &[f64]) -> f64 {
        dot(&self.lambda_star, targets) - self.model.log_partition()
    }
}

struct NewtonRun {
    model: ExpFamModel,
    iterations: usize,
    converged: bool,
    trace: Vec<TraceEntry>,
}

/// Solves `(H + μI) x = b` with `μ` starting at `1e-10` times the largest
/// diagonal entry and growing tenfold until the Cholesky factorization
/// succeeds.
fn regularized_solve(h: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let d = h.nrows();
    let scale = (0..d)
        .map(|i| h[(i, i)].abs())
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut shift = 1e-10 * scale;
    loop {
        let shifted = h + DMatrix::identity(d, d) * shift;
        if let Some(ch) = shifted.cholesky() {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return x;
            }
        }
        shift *= 10.0;
    }
}

/// Largest coordinate change of a single Newton step.
const MAX_STEP: f64 = 50.0;

fn dual_objective(family: &Family, lambda: &[f64], alpha: &[f64]) -> f64 {
    family.log_partition(lambda) - dot(lambda, alpha)
}

/// Damped Newton on `g(λ) = A(λ) − λ·α` with Armijo backtracking.
fn newton_dual(
    family: Arc<Family>,
    alpha: &[f64],
    start: Vec<f64>,
    opts: &SolverOptions,
) -> Result<NewtonRun> {
    let mut model = ExpFamModel::in_family(Arc::clone(&family), start)?;
    let mut trace = Vec::new();
    for iteration in 0..=opts.max_iter {
        let grad: Vec<f64> = model
            .mean_parameters()
            .iter()
            .zip(alpha)
            .map(|(m, a)| m - a)
            .collect();
        let grad_norm = norm_inf(&grad);
        let objective = model.log_partition() - dot(model.lambda(), alpha);
        if grad_norm <= opts.moment_tol {
            if opts.trace {
                trace.push(TraceEntry {
                    iteration,
                    objective,
                    gradient_norm: grad_norm,
                    step: 0.0,
                });
            }
            return Ok(NewtonRun {
                model,
                iterations: iteration,
                converged: true,
                trace,
            });
        }
        if iteration == opts.max_iter || norm_inf(model.lambda()) > opts.lambda_cap {
            return Ok(NewtonRun {
                model,
                iterations: iteration,
                converged: false,
                trace,
            });
        }
        let h = model.fisher_information();
        let g = DVector::from_column_slice(&grad);
        let mut dir = regularized_solve(&h, &(-&g));
        let longest = dir.amax();
        if longest > MAX_STEP {
            dir *= MAX_STEP / longest;
        }
        let slope = g.dot(&dir);
        // Rounding in `A(λ) − λ·α` grows with the size of `λ·α`.
        let magnitude: f64 = model
            .lambda()
            .iter()
            .zip(alpha)
            .map(|(l, a)| (l * a).abs())
            .sum();
        let slack = 16.0 * f64::EPSILON * (1.0 + objective.abs() + magnitude);
        let mut step = 1.0;
        let mut next = None;
        while step > 1e-16 {
            let cand: Vec<f64> = model
                .lambda()
                .iter()
                .zip(dir.iter())
                .map(|(l, d)| l + step * d)
                .collect();
            let value = dual_objective(&family, &cand, alpha);
            if value < objective && value <= objective + ARMIJO_C * step * slope {
                next = Some(cand);
                break;
            }
            // Where the objective is flat to rounding, progress is judged by
            // the moment gap instead.
            if value <= objective + slack && moment_gap(&family, &cand, alpha)? < grad_norm {
                next = Some(cand);
                break;
            }
            step *= 0.5;
        }
        if opts.trace {
            trace.push(TraceEntry {
                iteration,
                objective,
                gradient_norm: grad_norm,
                step,
            });
        }
        match next {
            Some(lambda) => model = ExpFamModel::in_family(Arc::clone(&family), lambda)?,
            // No descent left at machine precision.
            None => {
                return Ok(NewtonRun {
                    model,
                    iterations: iteration,
                    converged: false,
                    trace,
                })
            }
        }
    }
    unreachable!("loop returns on its last iteration")
}

fn moment_gap(family: &Arc<Family>, lambda: &[f64], alpha: &[f64]) -> Result<f64> {
    let m = ExpFamModel::in_family(Arc::clone(family), lambda.to_vec())?;
    Ok(m.mean_parameters()
        .iter()
        .zip(alpha)
        .map(|(m, a)| (m - a).abs())
        .fold(0.0, f64::max))
}

fn min_ratio_to_prior(model: &ExpFamModel) -> f64 {
    model
        .distribution()
        .log_probs()
        .iter()
        .zip(model.prior().log_probs())
        .filter(|(_, lp)| **lp > f64::NEG_INFINITY)
        .map(|(l, lp)| (l - lp).exp())
        .fold(f64::INFINITY, f64::min)
}

fn residual(p: &FiniteDistribution, features: &FeatureSet, targets: &[f64]) -> Result<Vec<f64>> {
    Ok(moments(p, features)?
        .iter()
        .zip(targets)
        .map(|(m, a)| m - a)
        .collect())
}

fn start_point(opts: &SolverOptions, d: usize) -> Result<Vec<f64>> {
    match &opts.start {
        Some(s) if s.len() == d => Ok(s.clone()),
        Some(s) => Err(Error::ShapeMismatch {
            what: "solver start",
            expected: d,
            found: s.len(),
        }),
        None => Ok(vec![0.0; d]),
    }
}

/// Information projection of `prior` onto the constraint set. Sets with
/// inequalities are routed to [`project_inequality`].
pub fn project(
    prior: &FiniteDistribution,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<ProjectionResult> {
    if constraints.has_inequalities() {
        return project_inequality(prior, constraints, opts);
    }
    project_equalities(prior, constraints, opts, None)
}

fn project_equalities(
    prior: &FiniteDistribution,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
    known_face: Option<FeasibilityReport>,
) -> Result<ProjectionResult> {
    let family = Family::new(prior.clone(), constraints.features().clone())?;
    let alpha = constraints.targets();
    let d = constraints.dim();
    if d == 0 {
        let model = ExpFamModel::base(family);
        return Ok(ProjectionResult {
            status: ProjectionStatus::Converged,
            lambda_star: vec![],
            projection: prior.clone(),
            model,
            min_divergence: 0.0,
            moment_residual: vec![],
            iterations: 0,
            feasibility: None,
            active_set: None,
            trace: opts.trace.then(Vec::new),
        });
    }

    let run = newton_dual(Arc::clone(&family), alpha, start_point(opts, d)?, opts)?;
    if run.converged && min_ratio_to_prior(&run.model) >= INTERIOR_RATIO && known_face.is_none() {
        return Ok(interior_result(run, constraints, opts, None));
    }

    let report = match known_face {
        Some(r) => r,
        None => check_feasibility(prior, constraints)?,
    };
    if !report.in_hull {
        let model = ExpFamModel::base(family);
        return Ok(ProjectionResult {
            status: ProjectionStatus::Infeasible,
            lambda_star: vec![0.0; d],
            projection: prior.clone(),
            moment_residual: residual(prior, constraints.features(), alpha)?,
            model,
            min_divergence: f64::INFINITY,
            iterations: run.iterations,
            feasibility: Some(report),
            active_set: None,
            trace: opts.trace.then_some(run.trace),
        });
    }
    if !report.on_boundary {
        return Ok(interior_result(run, constraints, opts, Some(report)));
    }

    // Boundary: the supremum over λ is approached but not attained. Solve
    // exactly on the face and keep the full-support iterate as the capped model.
    let restricted = prior.restrict(&report.face)?;
    let face_family = Family::new(restricted, constraints.features().clone())?;
    let face_opts = SolverOptions {
        start: None,
        ..opts.clone()
    };
    let face_run = newton_dual(face_family, alpha, vec![0.0; d], &face_opts)?;
    let projection = face_run.model.to_distribution();
    let min_divergence = kl_divergence(&projection, prior)?;
    let mut trace = run.trace;
    trace.extend(face_run.trace);
    Ok(ProjectionResult {
        status: if face_run.converged {
            ProjectionStatus::BoundaryNonattained
        } else {
            ProjectionStatus::NotConverged
        },
        lambda_star: run.model.lambda().to_vec(),
        moment_residual: residual(&projection, constraints.features(), alpha)?,
        projection,
        model: run.model,
        min_divergence,
        iterations: run.iterations + face_run.iterations,
        feasibility: Some(report),
        active_set: None,
        trace: opts.trace.then_some(trace),
    })
}

fn interior_result(
    run: NewtonRun,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
    feasibility: Option<FeasibilityReport>,
) -> ProjectionResult {
    let projection = run.model.to_distribution();
    let min_divergence = kl_divergence(&projection, run.model.prior()).expect("same alphabet");
    let moment_residual = residual(&projection, constraints.features(), constraints.targets())
        .expect("checked widths");
    ProjectionResult {
        status: if run.converged {
            ProjectionStatus::Converged
        } else {
            ProjectionStatus::NotConverged
        },
        lambda_star: run.model.lambda().to_vec(),
        projection,
        model: run.model,
        min_divergence,
        moment_residual,
        iterations: run.iterations,
        feasibility,
        active_set: None,
        trace: opts.trace.then_some(run.trace),
    }
}

/// Projection onto a mix of equalities and half-spaces by an active-set
/// method: violated inequalities are promoted to equalities, and active ones
/// whose multiplier has the wrong sign are released.
pub fn project_inequality(
    prior: &FiniteDistribution,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<ProjectionResult> {
    let d = constraints.dim();
    let report = check_feasibility(prior, constraints)?;
    if !report.in_hull {
        let family = Family::new(prior.clone(), constraints.features().clone())?;
        return Ok(ProjectionResult {
            status: ProjectionStatus::Infeasible,
            lambda_star: vec![0.0; d],
            projection: prior.clone(),
            moment_residual: residual(prior, constraints.features(), constraints.targets())?,
            model: ExpFamModel::base(family),
            min_divergence: f64::INFINITY,
            iterations: 0,
            feasibility: Some(report),
            active_set: Some(vec![]),
            trace: None,
        });
    }

    let kinds = constraints.kinds();
    let mut active: Vec<usize> = (0..d).filter(|&i| kinds[i] == ConstraintKind::Eq).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut iterations = 0;
    let mut trace = Vec::new();
    loop {
        if !seen.insert(active.clone()) {
            return Err(Error::Inconsistent(format!(
                "active set {active:?} revisited"
            )));
        }
        let sub = constraints.as_equalities(&active);
        let mut sub_opts = opts.clone();
        sub_opts.start = None;
        let face = if active.len() < d {
            None
        } else {
            Some(report.clone())
        };
        let r = project_equalities(prior, &sub, &sub_opts, face)?;
        iterations += r.iterations;
        if let Some(t) = &r.trace {
            trace.extend_from_slice(t);
        }
        if r.status == ProjectionStatus::Infeasible {
            return Err(Error::Inconsistent(format!(
                "equality subproblem on {active:?} is infeasible although the full set is feasible"
            )));
        }
        let m = moments(&r.projection, constraints.features())?;
        let violated = (0..d)
            .filter(|i| !active.contains(i))
            .map(|i| (i, kinds[i].violation(m[i], constraints.targets()[i])))
            .filter(|(_, v)| *v > opts.moment_tol)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let wrong_sign = active.iter().enumerate().find(|(pos, &i)| {
            let l = r.lambda_star[*pos];
            match kinds[i] {
                ConstraintKind::Eq => false,
                ConstraintKind::Ge => l < -opts.equiv_tol,
                ConstraintKind::Le => l > opts.equiv_tol,
            }
        });
        match (violated, wrong_sign) {
            (None, None) => {
                let mut lambda = vec![0.0; d];
                for (pos, &i) in active.iter().enumerate() {
                    lambda[i] = r.lambda_star[pos];
                }
                let model = ExpFamModel::new(
                    prior.clone(),
                    constraints.features().clone(),
                    lambda.clone(),
                )?;
                return Ok(ProjectionResult {
                    status: r.status,
                    lambda_star: lambda,
                    moment_residual: m
                        .iter()
                        .zip(constraints.targets())
                        .map(|(a, b)| a - b)
                        .collect(),
                    model,
                    projection: r.projection,
                    min_divergence: r.min_divergence,
                    iterations,
                    feasibility: Some(report),
                    active_set: Some(active),
                    trace: opts.trace.then_some(trace),
                });
            }
            (_, Some((pos, _))) => {
                active.remove(pos);
            }
            (Some((i, _)), None) => {
                active.push(i);
                active.sort_unstable();
            }
        }
    }
}

/// Gradient descent on the log loss `H(data, P_λ)`, with Barzilai-Borwein
/// steps and an Armijo safeguard. No dual reformulation is used: the objective
/// is the cross entropy of the data against the model.
pub fn fit_log_loss(
    prior: &FiniteDistribution,
    features: &FeatureSet,
    data: &FiniteDistribution,
    opts: &SolverOptions,
) -> Result<ProjectionResult> {
    prior.check_same_alphabet(data)?;
    features.check_width(prior.len())?;
    if let Some(x) = (0..prior.len()).find(|&x| data.prob(x) > 0.0 && prior.prob(x) == 0.0) {
        return Err(Error::SupportViolation(format!(
            "data puts mass {} on outcome {x}, which the prior excludes",
            data.prob(x)
        )));
    }
    let alpha = moments(data, features)?;
    let d = features.dim();
    let constraints = ConstraintSet::equalities(features.clone(), alpha.clone())?;
    let face = maximal_face(prior, &constraints)?;
    let on_boundary = face != prior.support();

    let family = Family::new(prior.clone(), features.clone())?;
    let full = descend_log_loss(
        Arc::clone(&family),
        data,
        &alpha,
        start_point(opts, d)?,
        opts,
    )?;
    if !on_boundary {
        let projection = full.model.to_distribution();
        return Ok(ProjectionResult {
            status: if full.converged {
                ProjectionStatus::Converged
            } else {
                ProjectionStatus::NotConverged
            },
            lambda_star: full.model.lambda().to_vec(),
            min_divergence: kl_divergence(&projection, prior)?,
            moment_residual: residual(&projection, features, &alpha)?,
            projection,
            model: full.model,
            iterations: full.iterations,
            feasibility: None,
            active_set: None,
            trace: opts.trace.then_some(full.trace),
        });
    }

    let restricted = prior.restrict(&face)?;
    let face_family = Family::new(restricted, features.clone())?;
    let on_face = descend_log_loss(face_family, data, &alpha, vec![0.0; d], opts)?;
    let projection = on_face.model.to_distribution();
    Ok(ProjectionResult {
        status: if on_face.converged {
            ProjectionStatus::BoundaryNonattained
        } else {
            ProjectionStatus::NotConverged
        },
        lambda_star: full.model.lambda().to_vec(),
        min_divergence: kl_divergence(&projection, prior)?,
        moment_residual: residual(&projection, features, &alpha)?,
        projection,
        model: full.model,
        iterations: full.iterations + on_face.iterations,
        feasibility: None,
        active_set: None,
        trace: opts.trace.then_some(full.trace),
    })
}

/// Iteration budget of the first-order fit relative to the Newton budget.
const DESCENT_BUDGET_FACTOR: usize = 250;

fn descend_log_loss(
    family: Arc<Family>,
    data: &FiniteDistribution,
    alpha: &[f64],
    start: Vec<f64>,
    opts: &SolverOptions,
) -> Result<NewtonRun> {
    let loss = |m: &ExpFamModel| cross_entropy(data, m.distribution()).expect("same alphabet");
    let gradient = |m: &ExpFamModel| -> Vec<f64> {
        m.mean_parameters()
            .iter()
            .zip(alpha)
            .map(|(a, b)| a - b)
            .collect()
    };
    let mut model = ExpFamModel::in_family(Arc::clone(&family), start)?;
    let mut value = loss(&model);
    let mut grad = gradient(&model);
    let mut step = 1.0;
    let mut trace = Vec::new();
    let budget = opts.max_iter * DESCENT_BUDGET_FACTOR;
    for iteration in 0..=budget {
        let grad_norm = norm_inf(&grad);
        if opts.trace {
            trace.push(TraceEntry {
                iteration,
                objective: value,
                gradient_norm: grad_norm,
                step,
            });
        }
        if grad_norm <= opts.moment_tol {
            return Ok(NewtonRun {
                model,
                iterations: iteration,
                converged: true,
                trace,
            });
        }
        if iteration == budget || norm_inf(model.lambda()) > opts.lambda_cap {
            break;
        }
        let sq: f64 = grad.iter().map(|g| g * g).sum();
        let slack = 8.0 * f64::EPSILON * (1.0 + value.abs());
        let mut t = step;
        let accepted = loop {
            let cand: Vec<f64> = model
                .lambda()
                .iter()
                .zip(&grad)
                .map(|(l, g)| l - t * g)
                .collect();
            let next = ExpFamModel::in_family(Arc::clone(&family), cand)?;
            let next_value = loss(&next);
            if next_value <= value - ARMIJO_C * t * sq + slack {
                break Some((next, next_value, t));
            }
            t *= 0.5;
            if t < 1e-18 {
                break None;
            }
        };
        let Some((next, next_value, t)) = accepted else {
            break;
        };
        let next_grad = gradient(&next);
        let s: Vec<f64> = next
            .lambda()
            .iter()
            .zip(model.lambda())
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(1e-6, 1e6)
        } else {
            (2.0 * t).min(1e6)
        };
        model = next;
        value = next_value;
        grad = next_grad;
    }
    let iterations = trace.len();
    Ok(NewtonRun {
        model,
        iterations,
        converged: false,
        trace,
    })
}

/// Value of the log-loss game over the constraint set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustBayesValue {
    /// `H(P*)` under a uniform prior, otherwise `D(P*‖P₀)`.
    pub value: f64,
    /// True when the value reads as a maximum entropy.
    pub entropy_reading: bool,
    pub result: ProjectionResult,
}

pub fn robust_bayes_value(
    prior: &FiniteDistribution,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<RobustBayesValue> {
    let result = project(prior, constraints, opts)?;
    let entropy_reading = prior.is_uniform();
    let value = if result.status == ProjectionStatus::Infeasible {
        f64::NAN
    } else if entropy_reading {
        crate::dist::entropy(&result.projection)
    } else {
        result.min_divergence
    };
    Ok(RobustBayesValue {
        value,
        entropy_reading,
        result,
    })
}
