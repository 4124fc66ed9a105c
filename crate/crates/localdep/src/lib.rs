//! Local dependence measures between paired observations.
//!
//! The crate builds one pipeline in three resolutions:
//!
//! * [`localdelta`] — the raw construction: a delta-masked deviation matrix
//!   over the x-axis, row means, and their scalar aggregate, collapsing to
//!   the nearest-neighbor statistic `(1/(n-1)) sum |Y_(i) - Y_(i+1)|` as the
//!   window shrinks below the x-spacing.
//! * [`epsresid`] — the same idea on the rank scale after the probability
//!   integral transform: closed eps-windows in u, leave-self-out local
//!   averages of v, the L1 residual `zeta`, and its normalized complement
//!   `xi = 1 - 4 zeta`.
//! * [`chatterjee`] — the canonical rank correlation written in terms of
//!   adjacent rank differences with the `(n^2 - 1)/3` normalization (plus the
//!   tie-corrected denominator), in `O(n log n)`.
//!
//! [`moment`] carries the L2 analogue (`zeta2`, `eta2`, and OLS `R^2`, which
//! `eta2` recovers under joint Gaussianity), [`synth`] the seeded generators
//! for the canonical checks, and [`oracle`] quadratic reference
//! implementations that the fast paths must match bit-for-bit. [`cli`] and
//! [`report`] expose everything through the `localdep` binary.

pub mod chatterjee;
pub mod cli;
pub mod epsresid;
mod error;
pub mod localdelta;
pub mod moment;
pub mod oracle;
pub mod report;
pub mod sample;
pub mod synth;

pub use error::{Error, Result};
pub use sample::{empirical_pit, load_sample, order_by_x, OrderedSample, PairedSample, UnitSquareSample};
