//! Named, counter-derived random streams.
//!
//! Every random quantity in the toolkit comes from a [`ChaCha8Rng`] keyed by
//! `(master seed, stream name, index...)`. A cell of a parallel computation
//! owns its own stream, so results never depend on thread count or
//! scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Builds the generator for stream `name` at the given index path.
pub fn stream(seed: u64, name: &str, path: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed ^ fnv1a(name));
    for &p in path {
        state = splitmix64(state ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// A derived 64-bit seed, for handing a sub-computation its own seed.
pub fn derive_seed(seed: u64, name: &str, path: &[u64]) -> u64 {
    use rand::RngCore;
    stream(seed, name, path).next_u64()
}

/// Draws `Multinomial(n, probs)` counts by a chain of conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass_left = 1.0f64;
    let last = probs.len().saturating_sub(1);
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        let cond = if mass_left > 0.0 {
            (p / mass_left).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = if cond >= 1.0 {
            remaining
        } else if cond <= 0.0 {
            0
        } else {
            Binomial::new(remaining, cond)
                .expect("binomial parameters are in range")
                .sample(rng)
        };
        counts[i] = k;
        remaining -= k;
        mass_left -= p;
    }
    counts
}

/// Normalized standard-exponential variates: a uniform draw from the simplex
/// (Dirichlet with all concentrations equal to one).
pub fn sample_dirichlet1<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    normalize(w)
}

/// Normalized standard-uniform variates.
pub fn sample_uniform_orthant<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    normalize(w)
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}
