//! Finite distributions, feature tables, moment constraints and the three
//! information measures.
//!
//! All logarithms are natural. `0 · log 0 = 0`, and a divergence whose first
//! argument puts mass where the second has none is `+inf` rather than an
//! error.
//!
//! Cross entropy is read with the expectation over the *first* argument:
//! `H(P, Q) = E_{x~P}[-log Q(x)]`.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

/// Inputs whose total mass is off by more than this are rejected instead of
/// renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Default tolerance for constraint membership tests.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

/// Ordered, duplicate-free outcome labels. Cheap to clone.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet(Arc<[String]>);

impl Alphabet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate outcome label {label:?}"
                )));
            }
        }
        Ok(Self(labels.into()))
    }

    /// Labels `"0"`, `"1"`, ..., `"k-1"`.
    pub fn indexed(k: usize) -> Self {
        Self((0..k).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;
    fn try_from(labels: Vec<String>) -> Result<Self> {
        Alphabet::new(labels)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.0.to_vec()
    }
}

/// A probability vector over an explicit finite alphabet.
///
/// Both linear and log probabilities are stored; the log values are the ones
/// the information measures read.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct FiniteDistribution {
    outcomes: Alphabet,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    outcomes: Vec<String>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for FiniteDistribution {
    type Error = Error;
    fn try_from(raw: RawDistribution) -> Result<Self> {
        FiniteDistribution::new(Alphabet::new(raw.outcomes)?, raw.probs)
    }
}

impl From<FiniteDistribution> for RawDistribution {
    fn from(d: FiniteDistribution) -> Self {
        RawDistribution {
            outcomes: d.outcomes.into(),
            probs: d.probs,
        }
    }
}

impl fmt::Debug for FiniteDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDistribution")
            .field("outcomes", &self.outcomes)
            .field("probs", &self.probs)
            .finish()
    }
}

impl FiniteDistribution {
    /// Builds a distribution from probabilities, renormalizing a total that is
    /// off by at most [`RENORMALIZE_TOL`].
    pub fn new(outcomes: Alphabet, probs: Vec<f64>) -> Result<Self> {
        if outcomes.len() != probs.len() {
            return Err(Error::ShapeMismatch {
                what: "distribution probabilities",
                expected: outcomes.len(),
                found: probs.len(),
            });
        }
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "probability {bad} is negative or not finite"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, which deviates from 1 by more than {RENORMALIZE_TOL}"
            )));
        }
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(Self {
            outcomes,
            probs,
            log_probs,
        })
    }

    /// Probabilities with auto-generated labels `"0"..`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        Self::new(Alphabet::indexed(probs.len()), probs)
    }

    /// Normalizes arbitrary non-negative weights (no tolerance check).
    pub fn from_weights(outcomes: Alphabet, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "weights must have a positive finite total, got {total}"
            )));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidDistribution("negative weight".into()));
        }
        Self::new(outcomes, weights.iter().map(|w| w / total).collect())
    }

    /// Normalizes log-weights with log-sum-exp. `-inf` entries get zero mass.
    pub fn from_log_weights(outcomes: Alphabet, log_weights: &[f64]) -> Result<Self> {
        if outcomes.len() != log_weights.len() {
            return Err(Error::ShapeMismatch {
                what: "log weights",
                expected: outcomes.len(),
                found: log_weights.len(),
            });
        }
        if log_weights
            .iter()
            .any(|w| w.is_nan() || *w == f64::INFINITY)
        {
            return Err(Error::InvalidDistribution(
                "log weight is NaN or +inf".into(),
            ));
        }
        let norm = log_sum_exp(log_weights);
        if !norm.is_finite() {
            return Err(Error::InvalidDistribution(
                "all log weights are -inf".into(),
            ));
        }
        let log_probs: Vec<f64> = log_weights.iter().map(|w| w - norm).collect();
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        Ok(Self {
            outcomes,
            probs,
            log_probs,
        })
    }

    pub fn uniform(outcomes: Alphabet) -> Result<Self> {
        let k = outcomes.len();
        if k == 0 {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        let p = 1.0 / k as f64;
        Ok(Self {
            probs: vec![p; k],
            log_probs: vec![-(k as f64).ln(); k],
            outcomes,
        })
    }

    pub fn point_mass(outcomes: Alphabet, index: usize) -> Result<Self> {
        if index >= outcomes.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: outcomes.len(),
            });
        }
        let mut probs = vec![0.0; outcomes.len()];
        probs[index] = 1.0;
        Self::new(outcomes, probs)
    }

    pub fn outcomes(&self) -> &Alphabet {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn support(&self) -> Vec<bool> {
        self.probs.iter().map(|p| *p > 0.0).collect()
    }

    /// True when every outcome has the same mass (within 1e-12).
    pub fn is_uniform(&self) -> bool {
        let target = 1.0 / self.len() as f64;
        self.probs.iter().all(|p| (p - target).abs() <= 1e-12)
    }

    pub fn check_same_alphabet(&self, other: &FiniteDistribution) -> Result<()> {
        if self.outcomes == other.outcomes {
            Ok(())
        } else {
            Err(Error::AlphabetMismatch(format!(
                "{} outcomes vs {} outcomes with different labels",
                self.len(),
                other.len()
            )))
        }
    }

    /// Largest absolute difference in probability.
    pub fn max_norm_distance(&self, other: &FiniteDistribution) -> Result<f64> {
        self.check_same_alphabet(other)?;
        Ok(crate::numeric::max_abs_diff(&self.probs, &other.probs))
    }

    pub fn total_variation(&self, other: &FiniteDistribution) -> Result<f64> {
        self.check_same_alphabet(other)?;
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// Conditions on the outcomes flagged in `keep`.
    pub fn restrict(&self, keep: &[bool]) -> Result<Self> {
        let log_weights: Vec<f64> = self
            .log_probs
            .iter()
            .zip(keep)
            .map(|(l, k)| if *k { *l } else { f64::NEG_INFINITY })
            .collect();
        Self::from_log_weights(self.outcomes.clone(), &log_weights)
    }
}

/// `w·P + (1-w)·Q`.
pub fn mixture(
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    w: f64,
) -> Result<FiniteDistribution> {
    p.check_same_alphabet(q)?;
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidParameters(format!(
            "mixture weight {w} not in [0,1]"
        )));
    }
    let probs = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| w * a + (1.0 - w) * b)
        .collect();
    FiniteDistribution::new(p.outcomes.clone(), probs)
}

/// Shannon entropy `H(P) = -Σ P log P` in nats.
pub fn entropy(p: &FiniteDistribution) -> f64 {
    -p.probs
        .iter()
        .zip(&p.log_probs)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, li)| pi * li)
        .sum::<f64>()
}

/// `H(P, Q) = E_{x~P}[-log Q(x)]`; `+inf` when `P` charges an outcome `Q` does not.
pub fn cross_entropy(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    p.check_same_alphabet(q)?;
    let mut acc = 0.0;
    for ((pi, _), lq) in p.probs.iter().zip(&p.log_probs).zip(&q.log_probs) {
        if *pi > 0.0 {
            if *lq == f64::NEG_INFINITY {
                return Ok(f64::INFINITY);
            }
            acc -= pi * lq;
        }
    }
    Ok(acc)
}

/// Relative entropy `D(Q‖P) = Σ Q log(Q/P)`; `+inf` on support violation.
pub fn kl_divergence(q: &FiniteDistribution, p: &FiniteDistribution) -> Result<f64> {
    q.check_same_alphabet(p)?;
    let mut acc = 0.0;
    for ((qi, lq), lp) in q.probs.iter().zip(&q.log_probs).zip(&p.log_probs) {
        if *qi > 0.0 {
            if *lp == f64::NEG_INFINITY {
                return Ok(f64::INFINITY);
            }
            acc += qi * (lq - lp);
        }
    }
    Ok(acc.max(0.0))
}

/// Real-valued feature functions tabulated over an alphabet:
/// `matrix[i][x] = f_i(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFeatureSet", into = "RawFeatureSet")]
pub struct FeatureSet {
    names: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawFeatureSet {
    names: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<RawFeatureSet> for FeatureSet {
    type Error = Error;
    fn try_from(raw: RawFeatureSet) -> Result<Self> {
        FeatureSet::new(raw.names, raw.matrix)
    }
}

impl From<FeatureSet> for RawFeatureSet {
    fn from(f: FeatureSet) -> Self {
        RawFeatureSet {
            names: f.names,
            matrix: f.matrix,
        }
    }
}

impl FeatureSet {
    pub fn new(names: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != matrix.len() {
            return Err(Error::ShapeMismatch {
                what: "feature names",
                expected: matrix.len(),
                found: names.len(),
            });
        }
        if let Some(first) = matrix.first() {
            if let Some(row) = matrix.iter().find(|r| r.len() != first.len()) {
                return Err(Error::InvalidFeatures(format!(
                    "ragged matrix: rows of length {} and {}",
                    first.len(),
                    row.len()
                )));
            }
        }
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeatures("non-finite feature value".into()));
        }
        Ok(Self { names, matrix })
    }

    /// No features at all (`d = 0`): the constraint set is the whole simplex.
    pub fn empty() -> Self {
        Self {
            names: Vec::new(),
            matrix: Vec::new(),
        }
    }

    /// One feature with the given values.
    pub fn single(name: &str, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![name.to_string()], vec![values])
    }

    /// Builds `d` features over `k` outcomes from a closure `(i, x) -> f_i(x)`.
    pub fn from_fn(d: usize, k: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let names = (0..d).map(|i| format!("f{i}")).collect();
        let matrix = (0..d).map(|i| (0..k).map(|x| f(i, x)).collect()).collect();
        Self::new(names, matrix)
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i]
    }

    /// Number of columns, or `None` when `d = 0` (compatible with any alphabet).
    pub fn width(&self) -> Option<usize> {
        self.matrix.first().map(Vec::len)
    }

    /// The feature vector `f(x)`.
    pub fn column(&self, x: usize) -> Vec<f64> {
        self.matrix.iter().map(|row| row[x]).collect()
    }

    pub fn check_width(&self, k: usize) -> Result<()> {
        match self.width() {
            Some(w) if w != k => Err(Error::ShapeMismatch {
                what: "feature columns vs alphabet size",
                expected: k,
                found: w,
            }),
            _ => Ok(()),
        }
    }

    /// `λ·f(x)` for every outcome.
    pub fn scores(&self, lambda: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; k];
        for (row, l) in self.matrix.iter().zip(lambda) {
            if *l != 0.0 {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += l * v;
                }
            }
        }
        out
    }

    /// Keeps the listed features, in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            names: indices.iter().map(|&i| self.names[i].clone()).collect(),
            matrix: indices.iter().map(|&i| self.matrix[i].clone()).collect(),
        }
    }

    /// Appends the features of `other` after those of `self`.
    pub fn concat(&self, other: &FeatureSet) -> Result<Self> {
        if let (Some(a), Some(b)) = (self.width(), other.width()) {
            if a != b {
                return Err(Error::ShapeMismatch {
                    what: "feature columns",
                    expected: a,
                    found: b,
                });
            }
        }
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        let mut matrix = self.matrix.clone();
        matrix.extend(other.matrix.iter().cloned());
        Self::new(names, matrix)
    }
}

/// `E_P[f_i]` for every feature.
pub fn moments(p: &FiniteDistribution, features: &FeatureSet) -> Result<Vec<f64>> {
    features.check_width(p.len())?;
    Ok(features
        .rows()
        .iter()
        .map(|row| {
            p.probs()
                .iter()
                .zip(row)
                .filter(|(pi, _)| **pi > 0.0)
                .map(|(pi, v)| pi * v)
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Eq,
    Ge,
    Le,
}

impl ConstraintKind {
    /// Signed violation of `value (kind) target`: positive means violated.
    pub fn violation(self, value: f64, target: f64) -> f64 {
        match self {
            ConstraintKind::Eq => (value - target).abs(),
            ConstraintKind::Ge => target - value,
            ConstraintKind::Le => value - target,
        }
    }
}

/// Moment constraints `E_Q[f_i] (=, ≥, ≤) α_i` defining a convex set of
/// distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConstraintSet", into = "RawConstraintSet")]
pub struct ConstraintSet {
    features: FeatureSet,
    kinds: Vec<ConstraintKind>,
    targets: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawConstraintSet {
    #[serde(alias = "features")]
    featureset: FeatureSet,
    kinds: Vec<ConstraintKind>,
    targets: Vec<f64>,
}

impl TryFrom<RawConstraintSet> for ConstraintSet {
    type Error = Error;
    fn try_from(raw: RawConstraintSet) -> Result<Self> {
        ConstraintSet::new(raw.featureset, raw.kinds, raw.targets)
    }
}

impl From<ConstraintSet> for RawConstraintSet {
    fn from(c: ConstraintSet) -> Self {
        RawConstraintSet {
            featureset: c.features,
            kinds: c.kinds,
            targets: c.targets,
        }
    }
}

impl ConstraintSet {
    pub fn new(
        features: FeatureSet,
        kinds: Vec<ConstraintKind>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        let d = features.dim();
        if kinds.len() != d {
            return Err(Error::ShapeMismatch {
                what: "constraint kinds",
                expected: d,
                found: kinds.len(),
            });
        }
        if targets.len() != d {
            return Err(Error::ShapeMismatch {
                what: "constraint targets",
                expected: d,
                found: targets.len(),
            });
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConstraints("non-finite target".into()));
        }
        Ok(Self {
            features,
            kinds,
            targets,
        })
    }

    pub fn equalities(features: FeatureSet, targets: Vec<f64>) -> Result<Self> {
        let kinds = vec![ConstraintKind::Eq; features.dim()];
        Self::new(features, kinds, targets)
    }

    /// The whole simplex.
    pub fn unconstrained() -> Self {
        Self {
            features: FeatureSet::empty(),
            kinds: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn kinds(&self) -> &[ConstraintKind] {
        &self.kinds
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn has_inequalities(&self) -> bool {
        self.kinds.iter().any(|k| *k != ConstraintKind::Eq)
    }

    /// Largest violation over all constraints given the moment vector
    /// (non-positive means satisfied).
    pub fn max_violation_of(&self, moments: &[f64]) -> f64 {
        self.kinds
            .iter()
            .zip(&self.targets)
            .zip(moments)
            .map(|((k, t), m)| k.violation(*m, *t))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Membership test given precomputed moments.
    pub fn contains_moments(&self, moments: &[f64], tol: f64) -> bool {
        self.dim() == 0 || self.max_violation_of(moments) <= tol
    }

    /// True iff every equality holds within `tol` and every inequality has
    /// slack at least `-tol`.
    pub fn contains(&self, q: &FiniteDistribution, tol: f64) -> Result<bool> {
        if tol < 0.0 {
            return Err(Error::InvalidParameters(format!(
                "negative tolerance {tol}"
            )));
        }
        let m = moments(q, &self.features)?;
        Ok(self.contains_moments(&m, tol))
    }

    /// Constraint set made of the listed constraints, all turned into equalities.
    pub fn as_equalities(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(indices),
            kinds: vec![ConstraintKind::Eq; indices.len()],
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Counts of each outcome in a sample of size `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawEmpirical", into = "RawEmpirical")]
pub struct EmpiricalMeasure {
    counts: Vec<u64>,
    n: u64,
}

#[derive(Serialize, Deserialize)]
struct RawEmpirical {
    counts: Vec<u64>,
}

impl TryFrom<RawEmpirical> for EmpiricalMeasure {
    type Error = Error;
    fn try_from(raw: RawEmpirical) -> Result<Self> {
        EmpiricalMeasure::new(raw.counts)
    }
}

impl From<EmpiricalMeasure> for RawEmpirical {
    fn from(e: EmpiricalMeasure) -> Self {
        RawEmpirical { counts: e.counts }
    }
}

impl EmpiricalMeasure {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidDistribution(
                "empirical measure needs n ≥ 1".into(),
            ));
        }
        Ok(Self { counts, n })
    }

    /// Tallies sample labels against an alphabet.
    pub fn from_samples<S: AsRef<str>>(alphabet: &Alphabet, samples: &[S]) -> Result<Self> {
        let mut counts = vec![0u64; alphabet.len()];
        for s in samples {
            let s = s.as_ref();
            let i = alphabet.index_of(s).ok_or_else(|| {
                Error::InvalidDistribution(format!("unknown outcome label {s:?}"))
            })?;
            counts[i] += 1;
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `counts / n` over the given alphabet.
    pub fn to_distribution(&self, alphabet: &Alphabet) -> Result<FiniteDistribution> {
        if alphabet.len() != self.counts.len() {
            return Err(Error::ShapeMismatch {
                what: "empirical counts vs alphabet",
                expected: alphabet.len(),
                found: self.counts.len(),
            });
        }
        let n = self.n as f64;
        let probs: Vec<f64> = self.counts.iter().map(|&c| c as f64 / n).collect();
        let log_probs = self
            .counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    f64::NEG_INFINITY
                } else {
                    (c as f64).ln() - n.ln()
                }
            })
            .collect();
        Ok(FiniteDistribution {
            outcomes: alphabet.clone(),
            probs,
            log_probs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::from_probs(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&dist(&[0.25; 4])) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&dist(&[0.0, 1.0, 0.0])), 0.0);
        // -(0.75 ln 0.75 + 0.25 ln 0.25)
        assert!((entropy(&dist(&[0.75, 0.25])) - 0.562_335_144_618_808_7).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_examples() {
        let p = dist(&[0.3, 0.7]);
        assert!((cross_entropy(&p, &p).unwrap() - entropy(&p)).abs() < 1e-15);
        let point = dist(&[1.0, 0.0]);
        let half = dist(&[0.5, 0.5]);
        assert!((cross_entropy(&point, &half).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(
            cross_entropy(&point, &dist(&[0.0, 1.0])).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn kl_examples() {
        let p = dist(&[0.2, 0.5, 0.3]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        // 0.75 ln 1.5 + 0.25 ln 0.5
        let d = kl_divergence(&dist(&[0.75, 0.25]), &dist(&[0.5, 0.5])).unwrap();
        assert!((d - 0.130_812_035_941_137_5).abs() < 1e-12);
        assert_eq!(
            kl_divergence(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn alphabet_mismatch_is_an_error() {
        let a = dist(&[0.5, 0.5]);
        let b = FiniteDistribution::new(
            Alphabet::new(vec!["x".into(), "y".into()]).unwrap(),
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!(matches!(
            kl_divergence(&a, &b),
            Err(Error::AlphabetMismatch(_))
        ));
        assert!(matches!(
            cross_entropy(&a, &dist(&[1.0])),
            Err(Error::AlphabetMismatch(_))
        ));
    }

    #[test]
    fn construction_rules() {
        assert!(dist(&[0.5, 0.5 + 5e-10]).probs().iter().sum::<f64>() - 1.0 < 1e-15);
        assert!(FiniteDistribution::from_probs(vec![0.5, 0.6]).is_err());
        assert!(FiniteDistribution::from_probs(vec![-0.1, 1.1]).is_err());
        assert!(FiniteDistribution::from_probs(vec![f64::NAN, 1.0]).is_err());
        assert!(Alphabet::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn moments_examples() {
        let x = FeatureSet::single("x", vec![0.0, 1.0, 2.0]).unwrap();
        let u = FiniteDistribution::uniform(Alphabet::indexed(3)).unwrap();
        assert!((moments(&u, &x).unwrap()[0] - 1.0).abs() < 1e-15);

        let f = FeatureSet::from_fn(2, 3, |i, x| (i * 10 + x) as f64).unwrap();
        let delta = FiniteDistribution::point_mass(Alphabet::indexed(3), 2).unwrap();
        assert_eq!(moments(&delta, &f).unwrap(), f.column(2));

        let b = FeatureSet::single("x", vec![0.0, 1.0]).unwrap();
        assert!((moments(&dist(&[0.2, 0.8]), &b).unwrap()[0] - 0.8).abs() < 1e-15);
        assert!(moments(&dist(&[0.2, 0.8]), &x).is_err());
    }

    #[test]
    fn constraint_membership_examples() {
        let any = dist(&[0.1, 0.2, 0.7]);
        assert!(ConstraintSet::unconstrained().contains(&any, 1e-9).unwrap());

        let x = FeatureSet::single("x", vec![0.0, 1.0, 2.0]).unwrap();
        let a = ConstraintSet::equalities(x, vec![1.0]).unwrap();
        let u = FiniteDistribution::uniform(Alphabet::indexed(3)).unwrap();
        assert!(a.contains(&u, 1e-9).unwrap());

        let b = FeatureSet::single("x", vec![0.0, 1.0]).unwrap();
        let ge = ConstraintSet::new(b, vec![ConstraintKind::Ge], vec![0.8]).unwrap();
        assert!(!ge.contains(&dist(&[0.5, 0.5]), 1e-9).unwrap());
        assert!(ge.contains(&dist(&[0.2, 0.8]), 1e-9).unwrap());
        assert!(ge.contains(&dist(&[0.1, 0.9]), 0.0).unwrap());
        assert!(ge.contains(&dist(&[0.5, 0.5]), -1.0).is_err());
    }

    #[test]
    fn empirical_measure_is_exact() {
        let e = EmpiricalMeasure::new(vec![2, 3, 5]).unwrap();
        let q = e.to_distribution(&Alphabet::indexed(3)).unwrap();
        assert_eq!(q.probs(), &[0.2, 0.3, 0.5]);
        assert!(EmpiricalMeasure::new(vec![0, 0]).is_err());
        let alpha = Alphabet::new(vec!["a".into(), "b".into()]).unwrap();
        let s = EmpiricalMeasure::from_samples(&alpha, &["a", "b", "b"]).unwrap();
        assert_eq!(s.counts(), &[1, 2]);
        assert!(EmpiricalMeasure::from_samples(&alpha, &["c"]).is_err());
    }

    #[test]
    fn json_schemas() {
        let d: FiniteDistribution =
            serde_json::from_str(r#"{"outcomes":["a","b"],"probs":[0.25,0.75]}"#).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<FiniteDistribution>(
            r#"{"outcomes":["a","b"],"probs":[0.5,0.75]}"#
        )
        .is_err());
        let c: ConstraintSet = serde_json::from_str(
            r#"{"featureset":{"names":["x"],"matrix":[[0,1]]},"kinds":["ge"],"targets":[0.8]}"#,
        )
        .unwrap();
        assert_eq!(c.kinds(), &[ConstraintKind::Ge]);
        let back: ConstraintSet =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let e: EmpiricalMeasure = serde_json::from_str(r#"{"counts":[1,0,4]}"#).unwrap();
        assert_eq!(e.n(), 5);
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..12).prop_flat_map(|k| {
            (
                prop::collection::vec(0.0f64..1.0, k),
                prop::collection::vec(1e-3f64..1.0, k),
            )
        })
    }

    fn normalize(w: &[f64]) -> Option<FiniteDistribution> {
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(FiniteDistribution::from_probs(w.iter().map(|x| x / total).collect()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn gibbs_inequality_and_chain_rule((a, b) in arb_pair()) {
            let (Some(q), Some(p)) = (normalize(&a), normalize(&b)) else { return Ok(()) };
            let d = kl_divergence(&q, &p).unwrap();
            prop_assert!(d >= 0.0);
            let chain = cross_entropy(&q, &p).unwrap() - entropy(&q);
            prop_assert!((d - chain).abs() <= 1e-10);
            prop_assert!(entropy(&q) <= (q.len() as f64).ln() + 1e-12);
            let dist = q.max_norm_distance(&p).unwrap();
            if d <= 1e-12 {
                prop_assert!(dist <= 1e-5);
            }
            if dist <= 1e-12 {
                prop_assert!(d <= 1e-12);
            }
            prop_assert!((q.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn moments_are_linear((a, b) in arb_pair(), w in 0.0f64..1.0) {
            let (Some(p), Some(q)) = (normalize(&a), normalize(&b)) else { return Ok(()) };
            let k = p.len();
            let f = FeatureSet::from_fn(3, k, |i, x| ((i + 1) * (x + 2)) as f64 * 0.37 - 1.0).unwrap();
            let mix = mixture(&p, &q, w).unwrap();
            let lhs = moments(&mix, &f).unwrap();
            let mp = moments(&p, &f).unwrap();
            let mq = moments(&q, &f).unwrap();
            for i in 0..3 {
                prop_assert!((lhs[i] - (w * mp[i] + (1.0 - w) * mq[i])).abs() <= 1e-12);
            }
        }
    }
}
