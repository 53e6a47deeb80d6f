//! Whether a constraint set meets the moment polytope `conv{f(x) : x ∈ supp(P₀)}`.
//!
//! Two small linear programs answer this.
//!
//! * Face LP. Over `q ≥ 0` on the prior's support, require
//!   `Σ_x q_x (f_i(x) − α_i)` to be `= 0`, `≥ 0` or `≤ 0` per constraint, with
//!   `y_x ≤ q_x` and `y ∈ [0, 1]`, and maximize `Σ y`. The problem is a cone
//!   in `q`, so the optimum marks exactly the outcomes some feasible
//!   distribution charges: the largest feasible support. An empty support means
//!   infeasible. A proper subset of the prior's support means every feasible
//!   distribution sits on the boundary.
//! * Witness LP. Over a direction `w` (sign-restricted for inequalities) and an
//!   offset `s`, require `w·f(x) ≤ s` for all `x` and maximize `w·α − s`.
//!   A positive optimum certifies infeasibility.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::dist::{ConstraintKind, ConstraintSet, FiniteDistribution};
use crate::error::{Error, Result};

/// Separation margin above which the witness LP declares infeasibility.
pub const SEPARATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub in_hull: bool,
    pub on_boundary: bool,
    /// Direction `w` with `w·α > max_x w·f(x)` when infeasible.
    pub witness: Option<Vec<f64>>,
    /// `w·α − max_x w·f(x)` for the witness.
    pub separation: Option<f64>,
    /// Largest support of a feasible distribution.
    pub face: Vec<bool>,
}

impl FeasibilityReport {
    pub fn face_size(&self) -> usize {
        self.face.iter().filter(|b| **b).count()
    }
}

fn lp_error(e: microlp::Error) -> Error {
    Error::LinearProgram(e.to_string())
}

fn check_shapes(prior: &FiniteDistribution, constraints: &ConstraintSet) -> Result<()> {
    constraints.features().check_width(prior.len())
}

fn cmp(kind: ConstraintKind) -> ComparisonOp {
    match kind {
        ConstraintKind::Eq => ComparisonOp::Eq,
        ConstraintKind::Ge => ComparisonOp::Ge,
        ConstraintKind::Le => ComparisonOp::Le,
    }
}

/// Largest support of a distribution on `supp(prior)` satisfying the constraints.
pub fn maximal_face(prior: &FiniteDistribution, constraints: &ConstraintSet) -> Result<Vec<bool>> {
    check_shapes(prior, constraints)?;
    let support: Vec<usize> = (0..prior.len()).filter(|&x| prior.prob(x) > 0.0).collect();
    if constraints.dim() == 0 {
        return Ok(prior.support());
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let q: Vec<_> = support
        .iter()
        .map(|_| lp.add_var(0.0, (0.0, f64::INFINITY)))
        .collect();
    let y: Vec<_> = support
        .iter()
        .map(|_| lp.add_var(1.0, (0.0, 1.0)))
        .collect();
    for (i, (kind, &target)) in constraints
        .kinds()
        .iter()
        .zip(constraints.targets())
        .enumerate()
    {
        let row = constraints.features().row(i);
        let expr: LinearExpr = support
            .iter()
            .zip(&q)
            .map(|(&x, &v)| (v, row[x] - target))
            .collect();
        lp.add_constraint(expr, cmp(*kind), 0.0);
    }
    for (&qv, &yv) in q.iter().zip(&y) {
        lp.add_constraint([(yv, 1.0), (qv, -1.0)], ComparisonOp::Le, 0.0);
    }
    let solution = lp
        .solve()
        .map_err(lp_error)?
        .into_solution()
        .map_err(|_| Error::LinearProgram("face LP interrupted".into()))?;
    let mut face = vec![false; prior.len()];
    for (&x, &yv) in support.iter().zip(&y) {
        face[x] = solution.var_value(yv) > 0.5;
    }
    Ok(face)
}

/// Best separating direction and its margin `w·α − max_x w·f(x)`.
pub fn separating_direction(
    prior: &FiniteDistribution,
    constraints: &ConstraintSet,
) -> Result<(Vec<f64>, f64)> {
    check_shapes(prior, constraints)?;
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let w: Vec<_> = constraints
        .kinds()
        .iter()
        .zip(constraints.targets())
        .map(|(kind, &target)| {
            let bounds = match kind {
                ConstraintKind::Eq => (-1.0, 1.0),
                ConstraintKind::Ge => (0.0, 1.0),
                ConstraintKind::Le => (-1.0, 0.0),
            };
            lp.add_var(target, bounds)
        })
        .collect();
    let s = lp.add_var(-1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for x in (0..prior.len()).filter(|&x| prior.prob(x) > 0.0) {
        let mut expr: LinearExpr = w
            .iter()
            .enumerate()
            .map(|(i, &wv)| (wv, constraints.features().row(i)[x]))
            .collect();
        expr.add(s, -1.0);
        lp.add_constraint(expr, ComparisonOp::Le, 0.0);
    }
    let solution = lp
        .solve()
        .map_err(lp_error)?
        .into_solution()
        .map_err(|_| Error::LinearProgram("witness LP interrupted".into()))?;
    let direction: Vec<f64> = w.iter().map(|&v| solution.var_value(v)).collect();
    let margin = separation_margin(prior, constraints, &direction);
    Ok((direction, margin))
}

/// `w·α − max_{x ∈ supp(prior)} w·f(x)`, evaluated directly.
pub fn separation_margin(
    prior: &FiniteDistribution,
    constraints: &ConstraintSet,
    w: &[f64],
) -> f64 {
    let at_target: f64 = w
        .iter()
        .zip(constraints.targets())
        .map(|(a, b)| a * b)
        .sum();
    let features = constraints.features();
    let best = (0..prior.len())
        .filter(|&x| prior.prob(x) > 0.0)
        .map(|x| (0..w.len()).map(|i| w[i] * features.row(i)[x]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    at_target - best
}

pub fn check_feasibility(
    prior: &FiniteDistribution,
    constraints: &ConstraintSet,
) -> Result<FeasibilityReport> {
    let face = maximal_face(prior, constraints)?;
    let face_size = face.iter().filter(|b| **b).count();
    if face_size == 0 {
        let (witness, margin) = separating_direction(prior, constraints)?;
        return Ok(FeasibilityReport {
            in_hull: false,
            on_boundary: false,
            witness: Some(witness),
            separation: Some(margin),
            face,
        });
    }
    let support_size = prior.support().iter().filter(|b| **b).count();
    Ok(FeasibilityReport {
        in_hull: true,
        on_boundary: face_size < support_size,
        witness: None,
        separation: None,
        face,
    })
}
