//! Sample containers, rank computation, the probability integral transform,
//! and x-ordering with concomitants.
//!
//! Everything downstream works on one of two containers: [`PairedSample`]
//! holds raw `(x, y)` observations in arbitrary units, [`UnitSquareSample`]
//! holds pairs on `(0, 1]^2`, usually produced by [`empirical_pit`]. Both are
//! immutable after construction, so they are safe to share across workers.
//!
//! Tie conventions are fixed once here and inherited by every estimator:
//! ranks use right-continuous ECDF counts `#{j : v_j <= v_i}` (max-rank), and
//! ties in `x` during ordering are broken by a uniform random permutation
//! drawn from an explicit seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `n` real-valued `(x, y)` observations, in input order.
///
/// Invariants: both coordinates have the same length `n >= 2` and every entry
/// is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PairedSample {
    /// Builds a sample from coordinate vectors, validating the invariants.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::InsufficientData { got: xs.len() });
        }
        for (row, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::NonFinite { row });
            }
        }
        Ok(Self { xs, ys })
    }

    /// Builds a sample from `(x, y)` rows, preserving input order.
    pub fn from_rows(rows: &[(f64, f64)]) -> Result<Self> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
        Self::new(xs, ys)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    /// Containers are never empty; kept for API completeness.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }
}

/// PIT-normalized pairs on `(0, 1]^2`.
///
/// `uniform_margins` records provenance: it is set when the sample came from
/// [`empirical_pit`] or from a generator with uniform marginals, and cleared
/// for hand-built samples. Estimators that hard-wire the `Unif(0,1)`
/// normalization constant consult it to flag non-calibrated results.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSquareSample {
    us: Vec<f64>,
    vs: Vec<f64>,
    uniform_margins: bool,
}

impl UnitSquareSample {
    /// Builds a sample from coordinates already on `(0, 1]`.
    ///
    /// The result is treated as *not* rank-scaled; call
    /// [`assume_uniform_margins`](Self::assume_uniform_margins) if the
    /// coordinates are known to have uniform marginals.
    pub fn new(us: Vec<f64>, vs: Vec<f64>) -> Result<Self> {
        if us.len() != vs.len() {
            return Err(Error::LengthMismatch {
                left: us.len(),
                right: vs.len(),
            });
        }
        if us.len() < 2 {
            return Err(Error::InsufficientData { got: us.len() });
        }
        for (row, (&u, &v)) in us.iter().zip(&vs).enumerate() {
            if !(u > 0.0 && u <= 1.0) {
                return Err(Error::OutOfUnitInterval { value: u, row });
            }
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::OutOfUnitInterval { value: v, row });
            }
        }
        Ok(Self {
            us,
            vs,
            uniform_margins: false,
        })
    }

    pub(crate) fn new_uniform(us: Vec<f64>, vs: Vec<f64>) -> Result<Self> {
        Ok(Self::new(us, vs)?.assume_uniform_margins())
    }

    /// Marks the sample as having uniform marginals (rank scale).
    pub fn assume_uniform_margins(mut self) -> Self {
        self.uniform_margins = true;
        self
    }

    /// True when the marginals are known-uniform, so `xi = 1 - 4 zeta` is
    /// calibrated.
    pub fn has_uniform_margins(&self) -> bool {
        self.uniform_margins
    }

    pub fn len(&self) -> usize {
        self.us.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn us(&self) -> &[f64] {
        &self.us
    }

    pub fn vs(&self) -> &[f64] {
        &self.vs
    }

    /// Reinterprets the coordinates as a raw paired sample.
    pub fn to_paired(&self) -> PairedSample {
        PairedSample {
            xs: self.us.clone(),
            ys: self.vs.clone(),
        }
    }
}

/// A sample reordered by `x`, carrying the concomitant y-values.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSample {
    permutation: Vec<usize>,
    y_ordered: Vec<f64>,
    tie_seed: u64,
}

impl OrderedSample {
    /// Indices of the original sample in x-sorted order (a bijection on `0..n`).
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Concomitants: y-values listed along the x-order.
    pub fn y_ordered(&self) -> &[f64] {
        &self.y_ordered
    }

    pub fn tie_seed(&self) -> u64 {
        self.tie_seed
    }

    pub fn len(&self) -> usize {
        self.y_ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Loads `(x, y)` rows into a [`PairedSample`].
///
/// Rejects fewer than two rows and any non-finite value (reported with its
/// row index).
pub fn load_sample(rows: &[(f64, f64)]) -> Result<PairedSample> {
    PairedSample::from_rows(rows)
}

/// Empirical probability integral transform.
///
/// Maps each observation through the right-continuous empirical CDF of its
/// own coordinate: `u_i = #{j : x_j <= x_i} / n` and likewise for `v_i`, so a
/// value's image is the ECDF evaluated *at* the observation (max-rank under
/// ties). Output order matches input order; entries lie on the grid
/// `{1/n, ..., 1}`.
pub fn empirical_pit(sample: &PairedSample) -> UnitSquareSample {
    let us = ecdf_at_observations(sample.xs());
    let vs = ecdf_at_observations(sample.ys());
    UnitSquareSample {
        us,
        vs,
        uniform_margins: true,
    }
}

fn ecdf_at_observations(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    values
        .iter()
        .map(|&v| {
            // #{j : values[j] <= v} via upper bound in the sorted copy.
            let count = sorted.partition_point(|&s| s <= v);
            count as f64 / n as f64
        })
        .collect()
}

/// Sorts the sample by `x`, breaking ties among equal x-values by a uniform
/// random permutation drawn from `tie_seed`.
///
/// With distinct x-values the result is seed-independent; with ties, the same
/// seed always yields the same order.
pub fn order_by_x(sample: &PairedSample, tie_seed: u64) -> OrderedSample {
    let n = sample.len();
    // One i.i.d. key per index: conditioned on distinct keys, the relative
    // order inside each tied group is a uniform random permutation.
    let mut rng = ChaCha8Rng::seed_from_u64(tie_seed);
    let keys: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();

    let xs = sample.xs();
    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.sort_unstable_by(|&a, &b| {
        xs[a]
            .total_cmp(&xs[b])
            .then(keys[a].cmp(&keys[b]))
            .then(a.cmp(&b))
    });

    let ys = sample.ys();
    let y_ordered = permutation.iter().map(|&i| ys[i]).collect();
    OrderedSample {
        permutation,
        y_ordered,
        tie_seed,
    }
}
