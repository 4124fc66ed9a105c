//! Slow, obviously-correct reference implementations.
//!
//! These exist to cross-check the fast paths: ranks are counted pairwise in
//! `O(n^2)`, neighborhoods are found by scanning every pair. Ordering and
//! tie-break seeds are shared with the fast paths so a disagreement can only
//! come from the statistic computation itself, and summation orders follow
//! the documented conventions so equality is bit-exact, not approximate.
//!
//! A quadratic-cost guard refuses `n > 5000` unless explicitly overridden.

use crate::error::{Error, Result};
use crate::sample::{order_by_x, PairedSample, UnitSquareSample};

/// Largest `n` the quadratic oracles accept without an explicit override.
pub const QUADRATIC_GUARD: usize = 5000;

fn check_guard(n: usize) -> Result<()> {
    if n > QUADRATIC_GUARD {
        return Err(Error::QuadraticGuard {
            n,
            guard: QUADRATIC_GUARD,
        });
    }
    Ok(())
}

/// Rank statistic by direct pairwise counting. Must equal
/// [`crate::chatterjee::chatterjee_xi`] bit-exactly.
pub fn xi_bruteforce(sample: &PairedSample, tie_seed: u64) -> Result<f64> {
    check_guard(sample.len())?;
    xi_bruteforce_unguarded(sample, tie_seed)
}

/// [`xi_bruteforce`] without the cost guard.
pub fn xi_bruteforce_unguarded(sample: &PairedSample, tie_seed: u64) -> Result<f64> {
    let n = sample.len();
    let y = order_by_x(sample, tie_seed).y_ordered().to_vec();

    let mut ranks = vec![0u64; n];
    let mut tie_denominator = 0u128;
    let mut has_ties = false;
    for i in 0..n {
        let mut le = 0u64;
        let mut ge = 0u64;
        for j in 0..n {
            if y[j] <= y[i] {
                le += 1;
            }
            if y[j] >= y[i] {
                ge += 1;
            }
            if j != i && y[j] == y[i] {
                has_ties = true;
            }
        }
        ranks[i] = le;
        tie_denominator += ge as u128 * (n as u64 - ge) as u128;
    }

    let mut numerator = 0u64;
    for i in 1..n {
        let (a, b) = (ranks[i - 1], ranks[i]);
        numerator += if a > b { a - b } else { b - a };
    }

    if has_ties {
        let den = 2 * tie_denominator;
        if den == 0 {
            return Err(Error::ConstantY);
        }
        let num = n as u128 * numerator as u128;
        Ok((den as i128 - num as i128) as f64 / den as f64)
    } else {
        let den = n as u128 * n as u128 - 1;
        let num = 3 * numerator as u128;
        Ok((den as i128 - num as i128) as f64 / den as f64)
    }
}

/// L1 residual by scanning all pairs for each neighborhood. Must equal
/// [`crate::epsresid::zeta_hat`] bit-exactly under the fixed summation order.
pub fn zeta_bruteforce(sample: &UnitSquareSample, epsilon: f64) -> Result<f64> {
    check_guard(sample.len())?;
    zeta_bruteforce_unguarded(sample, epsilon)
}

/// [`zeta_bruteforce`] without the cost guard.
pub fn zeta_bruteforce_unguarded(sample: &UnitSquareSample, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveEpsilon { value: epsilon });
    }
    let n = sample.len();
    let us = sample.us();
    let vs = sample.vs();

    // Neighborhood sums run in u-ascending order (ties by index), matching
    // the fast path's convention.
    let mut by_u: Vec<usize> = (0..n).collect();
    by_u.sort_by(|&a, &b| us[a].total_cmp(&us[b]).then(a.cmp(&b)));

    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for &j in &by_u {
            if j != i && (us[j] - us[i]).abs() <= epsilon {
                sum += vs[j];
                count += 1;
            }
        }
        if count > 0 {
            let vbar = sum / count as f64;
            total += (vbar - vs[i]).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::EpsilonBelowResolution);
    }
    Ok(total / used as f64)
}
