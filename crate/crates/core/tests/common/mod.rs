#![allow(dead_code)]

use maxent_core::rng::{sample_dirichlet1, stream};
use maxent_core::{moments, Alphabet, ConstraintSet, FeatureSet, FiniteDistribution};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(name: &str, index: u64) -> ChaCha8Rng {
    stream(0x5eed, name, &[index])
}

pub fn dirichlet(rng: &mut ChaCha8Rng, k: usize) -> FiniteDistribution {
    FiniteDistribution::new(Alphabet::indexed(k), sample_dirichlet1(rng, k)).unwrap()
}

pub fn uniform(k: usize) -> FiniteDistribution {
    FiniteDistribution::uniform(Alphabet::indexed(k)).unwrap()
}

pub fn features(rng: &mut ChaCha8Rng, d: usize, k: usize) -> FeatureSet {
    let matrix = (0..d)
        .map(|_| (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    FeatureSet::new((0..d).map(|i| format!("f{i}")).collect(), matrix).unwrap()
}

pub fn lambda(rng: &mut ChaCha8Rng, d: usize, bound: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Prior (uniform or Dirichlet), features, and a data distribution whose
/// moments define an interior equality constraint set.
pub struct MomentInstance {
    pub prior: FiniteDistribution,
    pub features: FeatureSet,
    pub data: FiniteDistribution,
    pub constraints: ConstraintSet,
}

pub fn moment_instance(
    rng: &mut ChaCha8Rng,
    max_k: usize,
    max_d: usize,
    uniform_prior: bool,
) -> MomentInstance {
    let k = rng.random_range(3..=max_k);
    let d = rng.random_range(1..=max_d);
    let prior = if uniform_prior {
        uniform(k)
    } else {
        dirichlet(rng, k)
    };
    let features = features(rng, d, k);
    let data = dirichlet(rng, k);
    let alpha = moments(&data, &features).unwrap();
    let constraints = ConstraintSet::equalities(features.clone(), alpha).unwrap();
    MomentInstance {
        prior,
        features,
        data,
        constraints,
    }
}
