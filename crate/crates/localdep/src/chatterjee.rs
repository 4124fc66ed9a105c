//! The canonical finite-sample rank correlation: sort by x, rank the
//! concomitant y-values, and sum adjacent rank differences.
//!
//! Without ties in y the statistic is
//!
//! ```text
//! xi = 1 - 3 * sum_i |r_{i+1} - r_i| / (n^2 - 1)
//! ```
//!
//! with `r_i = #{j : y_(j) <= y_(i)}` (max-rank). Ties in y switch to the
//! tie-corrected form `xi = 1 - n * sum_i |r_{i+1} - r_i| / (2 sum_i l_i (n - l_i))`
//! with `l_i = #{j : y_(j) >= y_(i)}`, which reduces to the expression above
//! when y is tie-free. The `n(n-1)`-style variants seen elsewhere differ only
//! in the finite-sample normalization, not in the statistic's limit; they are
//! not implemented.
//!
//! Both entry points share the ordering and the final arithmetic, so
//! [`chatterjee_xi_large`] (one sort plus linear passes) is bit-identical to
//! [`chatterjee_xi`] on every input. All counts are accumulated in integers;
//! the single float division at the end makes closed-form values such as the
//! monotone maximum `(n-2)/(n+1)` exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{order_by_x, PairedSample};

/// Which normalization the statistic used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorForm {
    /// Tie-free y: denominator `(n^2 - 1) / 3`.
    NoTies,
    /// Ties in y: denominator `(1/n) * 2 * sum l_i (n - l_i)`.
    TieCorrected,
}

/// The statistic plus enough provenance to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiReport {
    pub xi: f64,
    /// `sum_i |r_{i+1} - r_i|`, integer-valued.
    pub numerator: f64,
    pub denominator_form: DenominatorForm,
    pub tie_seed: u64,
    pub n: usize,
}

/// Integer rank statistics of the concomitant y-sequence.
struct RankStats {
    /// `sum |r_{i+1} - r_i|` along the x-order.
    numerator: u64,
    /// `sum l_i (n - l_i)`; zero iff y is constant.
    tie_denominator: u128,
    has_ties: bool,
}

/// Shared final step: one exact integer subtraction, one float division.
fn xi_from_rank_stats(n: usize, stats: &RankStats) -> Result<f64> {
    let n = n as u128;
    if stats.has_ties {
        let den = 2 * stats.tie_denominator;
        if den == 0 {
            return Err(Error::ConstantY);
        }
        let num = n * stats.numerator as u128;
        Ok((den as i128 - num as i128) as f64 / den as f64)
    } else {
        let den = n * n - 1;
        let num = 3 * stats.numerator as u128;
        Ok((den as i128 - num as i128) as f64 / den as f64)
    }
}

fn report(n: usize, tie_seed: u64, stats: RankStats) -> Result<XiReport> {
    let xi = xi_from_rank_stats(n, &stats)?;
    Ok(XiReport {
        xi,
        numerator: stats.numerator as f64,
        denominator_form: if stats.has_ties {
            DenominatorForm::TieCorrected
        } else {
            DenominatorForm::NoTies
        },
        tie_seed,
        n,
    })
}

fn abs_diff(a: u64, b: u64) -> u64 {
    if a > b {
        a - b
    } else {
        b - a
    }
}

/// Straightforward evaluation: ranks via binary search in a sorted copy.
pub fn chatterjee_xi(sample: &PairedSample, tie_seed: u64) -> Result<XiReport> {
    let n = sample.len();
    let y = order_by_x(sample, tie_seed).y_ordered().to_vec();

    let mut sorted = y.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let has_ties = sorted.windows(2).any(|w| w[0] == w[1]);

    let mut numerator = 0u64;
    let mut tie_denominator = 0u128;
    let mut prev_rank = 0u64;
    for (i, &yi) in y.iter().enumerate() {
        // r_i = #{j : y_j <= y_i}, l_i = #{j : y_j >= y_i}.
        let r = sorted.partition_point(|&s| s <= yi) as u64;
        let l = (n - sorted.partition_point(|&s| s < yi)) as u64;
        tie_denominator += (l as u128) * (n as u64 - l) as u128;
        if i > 0 {
            numerator += abs_diff(r, prev_rank);
        }
        prev_rank = r;
    }

    report(
        n,
        tie_seed,
        RankStats {
            numerator,
            tie_denominator,
            has_ties,
        },
    )
}

/// Performance path: identical contract and bit-identical output, computed
/// with one extra argsort and linear passes so the total cost stays
/// `O(n log n)` up to n in the millions.
pub fn chatterjee_xi_large(sample: &PairedSample, tie_seed: u64) -> Result<XiReport> {
    let n = sample.len();
    let y = order_by_x(sample, tie_seed).y_ordered().to_vec();

    let mut by_y: Vec<usize> = (0..n).collect();
    by_y.sort_unstable_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));

    // Assign max-ranks and run statistics per group of equal y.
    let mut rank = vec![0u64; n];
    let mut tie_denominator = 0u128;
    let mut has_ties = false;
    let mut start = 0usize;
    while start < n {
        let mut end = start + 1;
        while end < n && y[by_y[end]] == y[by_y[start]] {
            end += 1;
        }
        let run = (end - start) as u128;
        if run > 1 {
            has_ties = true;
        }
        // Everything before the run is strictly smaller, so r = end and
        // l = n - start for every member.
        let r = end as u64;
        let l = (n - start) as u128;
        tie_denominator += run * l * (n as u128 - l);
        for &i in &by_y[start..end] {
            rank[i] = r;
        }
        start = end;
    }

    let mut numerator = 0u64;
    for w in rank.windows(2) {
        numerator += abs_diff(w[1], w[0]);
    }

    report(
        n,
        tie_seed,
        RankStats {
            numerator,
            tie_denominator,
            has_ties,
        },
    )
}
