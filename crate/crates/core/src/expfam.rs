//! Exponential families `P_λ(x) ∝ P₀(x) exp(λ·f(x))` over a finite alphabet.
//!
//! Energies are measured relative to the prior:
//!
//! ```text
//! U^λ(P) = −λ·E_P[f]
//! F^λ(P) = U^λ(P) + D(P‖P₀)
//! ```
//!
//! With this convention `F^λ(P_λ) = −A(λ)` and
//! `D(P‖P_λ) = F^λ(P) − F^λ(P_λ)` hold for any prior, not only the uniform one.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dist::{cross_entropy, kl_divergence, moments, FeatureSet, FiniteDistribution};
use crate::error::{Error, Result};
use crate::numeric::{dot, log_sum_exp};

/// A base measure together with the sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    prior: FiniteDistribution,
    features: FeatureSet,
}

impl Family {
    pub fn new(prior: FiniteDistribution, features: FeatureSet) -> Result<Arc<Self>> {
        features.check_width(prior.len())?;
        Ok(Arc::new(Self { prior, features }))
    }

    pub fn prior(&self) -> &FiniteDistribution {
        &self.prior
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn alphabet_size(&self) -> usize {
        self.prior.len()
    }

    /// `log P₀(x) + λ·f(x)` for every outcome.
    pub fn log_weights(&self, lambda: &[f64]) -> Vec<f64> {
        let scores = self.features.scores(lambda, self.prior.len());
        self.prior
            .log_probs()
            .iter()
            .zip(scores)
            .map(|(lp, s)| {
                if *lp == f64::NEG_INFINITY {
                    *lp
                } else {
                    lp + s
                }
            })
            .collect()
    }

    /// `A(λ) = log Σ_x P₀(x) exp(λ·f(x))`.
    pub fn log_partition(&self, lambda: &[f64]) -> f64 {
        log_sum_exp(&self.log_weights(lambda))
    }
}

/// A member `P_λ` of a family, with `A(λ)` and `P_λ` cached.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ExpFamModel {
    family: Arc<Family>,
    lambda: Vec<f64>,
    log_partition: f64,
    distribution: FiniteDistribution,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    prior: FiniteDistribution,
    features: FeatureSet,
    lambda: Vec<f64>,
}

impl TryFrom<RawModel> for ExpFamModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        ExpFamModel::new(raw.prior, raw.features, raw.lambda)
    }
}

impl From<ExpFamModel> for RawModel {
    fn from(m: ExpFamModel) -> Self {
        RawModel {
            prior: m.family.prior.clone(),
            features: m.family.features.clone(),
            lambda: m.lambda,
        }
    }
}

impl PartialEq for ExpFamModel {
    fn eq(&self, other: &Self) -> bool {
        self.same_family(other) && self.lambda == other.lambda
    }
}

impl ExpFamModel {
    pub fn new(prior: FiniteDistribution, features: FeatureSet, lambda: Vec<f64>) -> Result<Self> {
        Self::in_family(Family::new(prior, features)?, lambda)
    }

    pub fn in_family(family: Arc<Family>, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != family.dim() {
            return Err(Error::ShapeMismatch {
                what: "natural parameters",
                expected: family.dim(),
                found: lambda.len(),
            });
        }
        if let Some(bad) = lambda.iter().find(|l| !l.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "natural parameter {bad} is not finite"
            )));
        }
        let log_weights = family.log_weights(&lambda);
        let log_partition = log_sum_exp(&log_weights);
        let distribution =
            FiniteDistribution::from_log_weights(family.prior.outcomes().clone(), &log_weights)?;
        Ok(Self {
            family,
            lambda,
            log_partition,
            distribution,
        })
    }

    /// The model at `λ = 0`, which is the prior itself.
    pub fn base(family: Arc<Family>) -> Self {
        let d = family.dim();
        Self::in_family(family, vec![0.0; d]).expect("zero parameters are valid")
    }

    /// Another member of the same family.
    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self> {
        Self::in_family(Arc::clone(&self.family), lambda)
    }

    pub fn family(&self) -> &Arc<Family> {
        &self.family
    }

    pub fn prior(&self) -> &FiniteDistribution {
        &self.family.prior
    }

    pub fn features(&self) -> &FeatureSet {
        &self.family.features
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// `P_λ`.
    pub fn distribution(&self) -> &FiniteDistribution {
        &self.distribution
    }

    pub fn to_distribution(&self) -> FiniteDistribution {
        self.distribution.clone()
    }

    pub fn same_family(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.family, &other.family) || *self.family == *other.family
    }

    fn check_family(&self, other: &Self) -> Result<()> {
        if self.same_family(other) {
            Ok(())
        } else {
            Err(Error::FamilyMismatch)
        }
    }

    /// `∇A(λ) = E_{P_λ}[f]`.
    pub fn mean_parameters(&self) -> Vec<f64> {
        moments(&self.distribution, self.features()).expect("widths are checked at construction")
    }

    /// `∇²A(λ) = Cov_{P_λ}[f]`, accumulated from centered features.
    pub fn fisher_information(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mean = self.mean_parameters();
        let rows = self.features().rows();
        let mut m = DMatrix::zeros(d, d);
        for (x, &p) in self.distribution.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let centered: Vec<f64> = (0..d).map(|i| rows[i][x] - mean[i]).collect();
            for i in 0..d {
                let ci = p * centered[i];
                for j in 0..=i {
                    m[(i, j)] += ci * centered[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                m[(j, i)] = m[(i, j)];
            }
        }
        m
    }

    /// `U^λ(P) = −λ·E_P[f]`.
    pub fn internal_energy(&self, p: &FiniteDistribution) -> Result<f64> {
        self.prior().check_same_alphabet(p)?;
        Ok(-dot(&self.lambda, &moments(p, self.features())?))
    }

    pub fn energies(&self, p: &FiniteDistribution) -> Result<EnergyReport> {
        let internal_energy = self.internal_energy(p)?;
        let rel_entropy_to_prior = kl_divergence(p, self.prior())?;
        Ok(EnergyReport {
            internal_energy,
            free_energy: internal_energy + rel_entropy_to_prior,
            rel_entropy_to_prior,
            entropy: crate::dist::entropy(p),
        })
    }

    /// `H(P_λ) = H(P_λ, P₀) − λ·∇A(λ) + A(λ)`.
    pub fn model_entropy(&self) -> f64 {
        let to_prior =
            cross_entropy(&self.distribution, self.prior()).expect("P_λ is supported on the prior");
        (to_prior - dot(&self.lambda, &self.mean_parameters()) + self.log_partition).max(0.0)
    }

    /// `H(P, P_λ) = H(P, P₀) + U^λ(P) + A(λ)`; `+inf` when `P` leaves the
    /// prior's support.
    pub fn model_cross_entropy(&self, p: &FiniteDistribution) -> Result<f64> {
        let to_prior = cross_entropy(p, self.prior())?;
        if to_prior == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        Ok(to_prior + self.internal_energy(p)? + self.log_partition)
    }

    /// Uncentered cumulant generating function `A(λ+θ) − A(λ)` of `f` under `P_λ`.
    pub fn cgf(&self, theta: &[f64]) -> Result<f64> {
        let shifted = self.shifted(theta)?;
        Ok(self.family.log_partition(&shifted) - self.log_partition)
    }

    /// `A(λ+θ) − A(λ) − θ·∇A(λ)`, the Bregman divergence of `A`.
    pub fn centered_cgf(&self, theta: &[f64]) -> Result<f64> {
        Ok((self.cgf(theta)? - dot(theta, &self.mean_parameters())).max(0.0))
    }

    fn shifted(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                what: "parameter shift",
                expected: self.dim(),
                found: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameters(
                "parameter shift is not finite".into(),
            ));
        }
        Ok(self.lambda.iter().zip(theta).map(|(l, t)| l + t).collect())
    }

    /// `∂E[f_i]/∂T_i = −λ_i² Var[f_i]` with temperature `T_i = 1/λ_i`.
    pub fn heat_capacity(&self, index: usize) -> Result<HeatCapacity> {
        if index >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.dim(),
            });
        }
        let l = self.lambda[index];
        let var = self.fisher_information()[(index, index)];
        Ok(HeatCapacity {
            value: -(l * l) * var,
            temperature: (l != 0.0).then(|| 1.0 / l),
        })
    }
}

/// `D(P_{λ*}‖P_λ) = (λ*−λ)·α + A(λ) − A(λ*)` with `α = ∇A(λ*)`.
pub fn deviance(model_star: &ExpFamModel, model: &ExpFamModel) -> Result<f64> {
    model_star.check_family(model)?;
    let alpha = model_star.mean_parameters();
    let shift: f64 = model_star
        .lambda
        .iter()
        .zip(&model.lambda)
        .zip(&alpha)
        .map(|((s, l), a)| (s - l) * a)
        .sum();
    Ok((shift + model.log_partition - model_star.log_partition).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub internal_energy: f64,
    pub free_energy: f64,
    pub rel_entropy_to_prior: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatCapacity {
    pub value: f64,
    /// `None` when `λ_i = 0`.
    pub temperature: Option<f64>,
}
