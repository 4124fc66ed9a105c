//! The delta-window deviation pipeline: masked deviation matrix, row-wise
//! means, scalar aggregate, and the nearest-neighbor statistic it collapses
//! to when the window shrinks below the x-spacing.
//!
//! The matrix entry `(i, j)` is `|y_i - y_j|` when `|x_i - x_j| < delta`
//! (strict inequality) and `0` otherwise. Row means average the in-window
//! off-diagonal entries only: self-pairs would contribute `0` and drag every
//! average toward zero as the window shrinks, and empty windows are recorded
//! as absent rather than zero-filled. For shrinking windows only the
//! rank-adjacent pairs survive, which is exactly [`adjacent_l1`].

use crate::error::{Error, Result};
use crate::sample::{order_by_x, PairedSample};

/// Dense `n x n` masked deviation matrix at scale `delta` (units of x).
///
/// Symmetric with zero diagonal; entries are `|y_i - y_j|` inside the window
/// and `0` outside. Dense storage is intended for desk-scale `n`.
#[derive(Debug, Clone)]
pub struct LocalDeviationMatrix {
    n: usize,
    delta: f64,
    entries: Vec<f64>,
    in_window: Vec<bool>,
}

impl LocalDeviationMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Masked entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Whether `j` lies in the delta-window of `i` (`j != i` and
    /// `|x_i - x_j| < delta`).
    pub fn in_window(&self, i: usize, j: usize) -> bool {
        self.in_window[i * self.n + j]
    }
}

/// Row-wise means of a [`LocalDeviationMatrix`].
///
/// `means[i]` is `None` exactly when row `i` has no in-window neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMeanVector {
    means: Vec<Option<f64>>,
    neighbor_counts: Vec<usize>,
}

impl RowMeanVector {
    pub fn means(&self) -> &[Option<f64>] {
        &self.means
    }

    pub fn neighbor_counts(&self) -> &[usize] {
        &self.neighbor_counts
    }
}

/// Builds the masked deviation matrix at scale `delta > 0`.
pub fn deviation_matrix(sample: &PairedSample, delta: f64) -> Result<LocalDeviationMatrix> {
    if !(delta > 0.0) {
        return Err(Error::NonPositiveDelta { value: delta });
    }
    let n = sample.len();
    let xs = sample.xs();
    let ys = sample.ys();
    let mut entries = vec![0.0; n * n];
    let mut in_window = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            if j != i && (xs[i] - xs[j]).abs() < delta {
                entries[i * n + j] = (ys[i] - ys[j]).abs();
                in_window[i * n + j] = true;
            }
        }
    }
    Ok(LocalDeviationMatrix {
        n,
        delta,
        entries,
        in_window,
    })
}

/// Averages each row over its in-window neighbors (diagonal excluded).
pub fn row_means(matrix: &LocalDeviationMatrix) -> RowMeanVector {
    let n = matrix.n;
    let mut means = Vec::with_capacity(n);
    let mut neighbor_counts = Vec::with_capacity(n);
    for i in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in 0..n {
            if matrix.in_window[i * n + j] {
                sum += matrix.entries[i * n + j];
                count += 1;
            }
        }
        neighbor_counts.push(count);
        means.push(if count == 0 {
            None
        } else {
            Some(sum / count as f64)
        });
    }
    RowMeanVector {
        means,
        neighbor_counts,
    }
}

/// Arithmetic mean over rows with present means.
///
/// Errors when every window is empty, i.e. `delta` is below the sample's
/// x-resolution.
pub fn scalar_mean(rows: &RowMeanVector) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for mean in &rows.means {
        if let Some(m) = mean {
            sum += m;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoDeltaNeighbors);
    }
    Ok(sum / count as f64)
}

/// Mean absolute difference of x-adjacent concomitants:
/// `(1/(n-1)) sum |Y_(i) - Y_(i+1)|`.
///
/// This is the shrinking-window limit of the pipeline above; ties in `x` are
/// broken by `tie_seed` exactly as in [`order_by_x`].
pub fn adjacent_l1(sample: &PairedSample, tie_seed: u64) -> f64 {
    let ordered = order_by_x(sample, tie_seed);
    let y = ordered.y_ordered();
    let total: f64 = y.windows(2).map(|w| (w[0] - w[1]).abs()).sum();
    total / (y.len() - 1) as f64
}
