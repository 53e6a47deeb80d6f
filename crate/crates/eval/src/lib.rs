//! Independent oracles for the acceptance criteria: exact rational
//! arithmetic, a plain composition enumerator, and a locator for the
//! command-line binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use maxent_core::ConstraintSet;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Log of a positive big integer, exact to double rounding.
pub fn ln_bigint(x: &BigInt) -> f64 {
    let shift = x.bits().saturating_sub(60);
    (x >> shift).to_f64().expect("60-bit value fits").ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_rational(x: &BigRational) -> f64 {
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

pub fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, k - 1)
                .into_iter()
                .map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
        })
        .collect()
}

pub fn oracle_log_prob(c: &[u64], p: &[f64]) -> f64 {
    let n: u64 = c.iter().sum();
    let mut lp = ln_factorial(n);
    for (&ci, &pi) in c.iter().zip(p) {
        lp -= ln_factorial(ci);
        if ci > 0 {
            lp += ci as f64 * pi.ln();
        }
    }
    lp
}

pub fn kl(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn member(c: &[u64], event: &ConstraintSet) -> bool {
    let n: u64 = c.iter().sum();
    event
        .features()
        .rows()
        .iter()
        .zip(event.kinds())
        .zip(event.targets())
        .all(|((row, kind), &t)| {
            let m = row.iter().zip(c).map(|(f, &ci)| f * ci as f64).sum::<f64>() / n as f64;
            kind.violation(m, t) <= 1e-9
        })
}

/// Enumeration oracle for `log Pr(P̂n ∈ A)` and `(1/n) D(μ_A‖P*ⁿ)`, from
/// the per-sequence conditional law.
pub struct EventOracle {
    pub log_prob: f64,
    pub residual: f64,
    pub rate: f64,
}

pub fn event_oracle(p: &[f64], star: &[f64], event: &ConstraintSet, n: u64) -> EventOracle {
    let members: Vec<Vec<u64>> = compositions(n, p.len())
        .into_iter()
        .filter(|c| member(c, event))
        .collect();
    let lps: Vec<f64> = members.iter().map(|c| oracle_log_prob(c, p)).collect();
    let log_prob = log_sum_exp(&lps);
    let mut expected_ratio = 0.0;
    for (c, lp) in members.iter().zip(&lps) {
        let ratio: f64 = c
            .iter()
            .zip(p.iter().zip(star))
            .filter(|(ci, _)| **ci > 0)
            .map(|(&ci, (a, b))| ci as f64 * (a / b).ln())
            .sum();
        expected_ratio += (lp - log_prob).exp() * ratio;
    }
    EventOracle {
        log_prob,
        residual: (expected_ratio - log_prob) / n as f64,
        rate: kl(star, p),
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

pub fn pow(r: &BigRational, e: u64) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * r)
}

/// Builds the `maxent` binary into its own target directory, so the outer
/// cargo invocation's lock is never contended, and returns its path.
pub fn maxent_binary() -> PathBuf {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let target = root.join("target/acceptance");
    let status = Command::new(env!("CARGO"))
        .args([
            "build",
            "--quiet",
            "-p",
            "maxent-cli",
            "--bin",
            "maxent",
            "--target-dir",
        ])
        .arg(&target)
        .current_dir(&root)
        .status()
        .expect("cargo runs");
    assert!(status.success(), "building maxent failed");
    target
        .join("debug")
        .join(format!("maxent{}", std::env::consts::EXE_SUFFIX))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_logs_match_floating_point() {
        let x = factorial(30);
        let expected: f64 = (2..=30).map(|k| (k as f64).ln()).sum();
        assert!((ln_bigint(&x) - expected).abs() <= 1e-12);
        let huge = factorial(300);
        assert!((ln_bigint(&huge) - ln_factorial(300)).abs() <= 1e-10);
        let r = BigRational::new(3.into(), 7.into());
        assert!((ln_rational(&pow(&r, 5)) - 5.0 * (3.0f64 / 7.0).ln()).abs() <= 1e-14);
    }

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(10, 1), vec![vec![10]]);
        assert_eq!(
            compositions(3, 2),
            vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]
        );
        assert_eq!(compositions(20, 4).len(), 1771);
        assert!(compositions(7, 3)
            .iter()
            .all(|c| c.iter().sum::<u64>() == 7));
    }

    #[test]
    fn binomial_tail_by_hand() {
        let lps: Vec<f64> = [8u64, 9, 10]
            .iter()
            .map(|&h| oracle_log_prob(&[10 - h, h], &[0.5, 0.5]))
            .collect();
        assert!((log_sum_exp(&lps) - (56.0f64 / 1024.0).ln()).abs() <= 1e-14);
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
