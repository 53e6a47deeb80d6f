//! Maximum-entropy inference on finite alphabets: exact histogram
//! probabilities, exponential families, information projection, and the
//! concentration results that tie them together.

pub mod boltzmann;
pub mod dist;
pub mod error;
pub mod expfam;
pub mod feasibility;
pub mod identities;
pub mod numeric;
pub mod projection;
pub mod rng;
pub mod sanov;

pub use dist::{
    cross_entropy, entropy, kl_divergence, mixture, moments, Alphabet, ConstraintKind,
    ConstraintSet, EmpiricalMeasure, FeatureSet, FiniteDistribution,
};
pub use error::{Error, Result};
pub use expfam::{deviance, EnergyReport, ExpFamModel, Family, HeatCapacity};
