//! The L2 residual and its variance-normalized complement: plug-in
//! conditional-mean estimators, `zeta2 = mean (v_i - Ehat_i)^2`,
//! `eta2 = 1 - zeta2 / Var(v)`, and the exact finite-sample variance
//! decomposition `Var(v) = between + within` for partition-based fits.
//!
//! Two estimators of `E[V | U]` are provided: a leave-one-out k-nearest
//! neighbor average (mirrors the `j != i` convention of the epsilon
//! neighborhoods) and an include-self regressogram over equal-width cells
//! (makes the variance identity exact). Neither claims optimality;
//! `k = ceil(sqrt n)` and `bins = ceil(n^(1/3))` are stated heuristics.
//!
//! Unlike the rank-based estimators, nothing here relies on rank transforms:
//! every operation also accepts raw paired samples (`*_raw` variants) and the
//! classical OLS `R^2` lives here as the moment-based reference point. All
//! variances are population-style (divide by `n`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{PairedSample, UnitSquareSample};

/// Which conditional-mean estimator produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondMeanMethod {
    Knn { k: usize },
    Binned { bins: usize },
}

/// Pointwise estimates of `E[V | U = u_i]`, aligned with the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMeanFit {
    estimates: Vec<f64>,
    method: CondMeanMethod,
    leave_one_out: bool,
}

impl ConditionalMeanFit {
    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn method(&self) -> CondMeanMethod {
        self.method
    }

    pub fn leave_one_out(&self) -> bool {
        self.leave_one_out
    }
}

/// L2 residual report; all variances divide by `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Report {
    /// Mean squared residual, `E[Var(V|U)]` plug-in (units of v^2).
    pub zeta2: f64,
    /// `1 - zeta2 / var_v`, exactly.
    pub eta2: f64,
    pub var_v: f64,
    /// Variance of the fitted conditional means.
    pub between: f64,
    /// Equals `zeta2`.
    pub within: f64,
}

/// Heuristic default `k = ceil(sqrt n)`, clamped to the valid range.
pub fn default_knn_k(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Heuristic default `bins = ceil(n^(1/3))`, clamped to the valid range.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).cbrt().ceil() as usize).clamp(1, n)
}

/// Leave-one-out kNN conditional mean on the unit square.
///
/// For each `i`, averages `v` over the `k` nearest u-neighbors excluding `i`;
/// ties in distance are broken by the smaller index.
pub fn cond_mean_knn(sample: &UnitSquareSample, k: usize) -> Result<ConditionalMeanFit> {
    knn_fit(sample.us(), sample.vs(), k)
}

/// [`cond_mean_knn`] on raw coordinates.
pub fn cond_mean_knn_raw(sample: &PairedSample, k: usize) -> Result<ConditionalMeanFit> {
    knn_fit(sample.xs(), sample.ys(), k)
}

/// Include-self regressogram over `bins` equal-width, right-closed cells of
/// `[0, 1]`.
pub fn cond_mean_binned(sample: &UnitSquareSample, bins: usize) -> Result<ConditionalMeanFit> {
    binned_fit(sample.us(), sample.vs(), bins, 0.0, 1.0)
}

/// [`cond_mean_binned`] on raw coordinates; cells partition the observed
/// x-range.
pub fn cond_mean_binned_raw(sample: &PairedSample, bins: usize) -> Result<ConditionalMeanFit> {
    let xs = sample.xs();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    binned_fit(xs, sample.ys(), bins, lo, hi)
}

fn knn_fit(xs: &[f64], vs: &[f64], k: usize) -> Result<ConditionalMeanFit> {
    let n = xs.len();
    if k == 0 || k > n - 1 {
        return Err(Error::KOutOfRange { k, max: n - 1 });
    }

    let mut sorted: Vec<usize> = (0..n).collect();
    sorted.sort_unstable_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    let mut position = vec![0usize; n];
    for (p, &i) in sorted.iter().enumerate() {
        position[i] = p;
    }
    let xs_sorted: Vec<f64> = sorted.iter().map(|&i| xs[i]).collect();

    let mut estimates = vec![0.0; n];
    let mut chosen: Vec<usize> = Vec::with_capacity(k + 8);
    let mut group: Vec<usize> = Vec::new();
    for i in 0..n {
        let p = position[i];
        chosen.clear();
        let mut left = p; // candidates are sorted positions < left
        let mut right = p; // and > right
        while chosen.len() < k {
            let dl = if left > 0 {
                xs[i] - xs_sorted[left - 1]
            } else {
                f64::INFINITY
            };
            let dr = if right + 1 < n {
                xs_sorted[right + 1] - xs[i]
            } else {
                f64::INFINITY
            };
            let d = dl.min(dr);
            // Collect every candidate at exactly distance d from both sides;
            // the index tie-break only matters inside this group.
            group.clear();
            while left > 0 && xs[i] - xs_sorted[left - 1] == d {
                left -= 1;
                group.push(sorted[left]);
            }
            while right + 1 < n && xs_sorted[right + 1] - xs[i] == d {
                right += 1;
                group.push(sorted[right]);
            }
            let need = k - chosen.len();
            if group.len() <= need {
                chosen.extend_from_slice(&group);
            } else {
                group.sort_unstable();
                chosen.extend_from_slice(&group[..need]);
            }
        }
        // Canonical accumulation order: by (distance, index).
        chosen.sort_unstable_by(|&a, &b| {
            (xs[a] - xs[i])
                .abs()
                .total_cmp(&(xs[b] - xs[i]).abs())
                .then(a.cmp(&b))
        });
        let sum: f64 = chosen.iter().map(|&j| vs[j]).sum();
        estimates[i] = sum / k as f64;
    }

    Ok(ConditionalMeanFit {
        estimates,
        method: CondMeanMethod::Knn { k },
        leave_one_out: true,
    })
}

fn binned_fit(xs: &[f64], vs: &[f64], bins: usize, lo: f64, hi: f64) -> Result<ConditionalMeanFit> {
    let n = xs.len();
    if bins == 0 || bins > n {
        return Err(Error::BinsOutOfRange { bins, max: n });
    }
    let width = (hi - lo) / bins as f64;
    let cell = |x: f64| -> usize {
        if width > 0.0 {
            let raw = ((x - lo) / width).ceil() as isize - 1;
            raw.clamp(0, bins as isize - 1) as usize
        } else {
            0
        }
    };

    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (&x, &v) in xs.iter().zip(vs) {
        let c = cell(x);
        sums[c] += v;
        counts[c] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    let estimates = xs.iter().map(|&x| means[cell(x)]).collect();

    Ok(ConditionalMeanFit {
        estimates,
        method: CondMeanMethod::Binned { bins },
        leave_one_out: false,
    })
}

/// L2 residual report for a fit on the unit square.
pub fn l2_report(sample: &UnitSquareSample, fit: &ConditionalMeanFit) -> Result<L2Report> {
    l2_from_values(sample.vs(), fit)
}

/// L2 residual report for a fit on raw coordinates.
pub fn l2_report_raw(sample: &PairedSample, fit: &ConditionalMeanFit) -> Result<L2Report> {
    l2_from_values(sample.ys(), fit)
}

fn l2_from_values(vs: &[f64], fit: &ConditionalMeanFit) -> Result<L2Report> {
    let n = vs.len();
    debug_assert_eq!(n, fit.estimates.len());

    let mean_v = vs.iter().sum::<f64>() / n as f64;
    let var_v = vs.iter().map(|&v| (v - mean_v) * (v - mean_v)).sum::<f64>() / n as f64;
    if var_v == 0.0 {
        return Err(Error::ConstantV);
    }

    let est = &fit.estimates;
    let zeta2 = vs
        .iter()
        .zip(est)
        .map(|(&v, &e)| (v - e) * (v - e))
        .sum::<f64>()
        / n as f64;
    let mean_e = est.iter().sum::<f64>() / n as f64;
    let between = est.iter().map(|&e| (e - mean_e) * (e - mean_e)).sum::<f64>() / n as f64;

    Ok(L2Report {
        zeta2,
        eta2: 1.0 - zeta2 / var_v,
        var_v,
        between,
        within: zeta2,
    })
}

/// Squared Pearson correlation, the `R^2` of the linear regression of y on x.
pub fn r_squared_ols(sample: &PairedSample) -> Result<f64> {
    let n = sample.len() as f64;
    let xs = sample.xs();
    let ys = sample.ys();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance { axis: "x" });
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance { axis: "y" });
    }
    Ok((sxy * sxy) / (sxx * syy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::load_sample;
    use proptest::prelude::*;

    fn unit(us: Vec<f64>, vs: Vec<f64>) -> UnitSquareSample {
        UnitSquareSample::new(us, vs).unwrap()
    }

    #[test]
    fn knn_hand_examples() {
        // Nearest u-neighbor of 0.9 is 0.2.
        let fit = knn_fit(&[0.1, 0.2, 0.9], &[1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!(fit.estimates(), &[2.0, 1.0, 2.0]);
        assert!(fit.leave_one_out());

        // k = n - 1: every estimate is the mean of all other v.
        let fit = knn_fit(&[0.1, 0.2, 0.9], &[1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(fit.estimates(), &[2.5, 2.0, 1.5]);

        // n = 2, k = 1 swaps the values.
        let fit = knn_fit(&[0.25, 0.75], &[0.1, 0.9], 1).unwrap();
        assert_eq!(fit.estimates(), &[0.9, 0.1]);
    }

    #[test]
    fn knn_distance_ties_prefer_smaller_index() {
        // Point at 0.5 is equidistant from 0.3 and 0.7; index 0 wins.
        let fit = knn_fit(&[0.3, 0.5, 0.7], &[10.0, 0.0, 20.0], 1).unwrap();
        assert_eq!(fit.estimates()[1], 10.0);
        // Same geometry, swapped input order.
        let fit = knn_fit(&[0.7, 0.5, 0.3], &[20.0, 0.0, 10.0], 1).unwrap();
        assert_eq!(fit.estimates()[1], 20.0);
    }

    #[test]
    fn knn_rejects_bad_k() {
        let s = unit(vec![0.25, 0.75], vec![0.1, 0.9]);
        assert!(matches!(
            cond_mean_knn(&s, 0),
            Err(Error::KOutOfRange { k: 0, max: 1 })
        ));
        assert!(matches!(
            cond_mean_knn(&s, 2),
            Err(Error::KOutOfRange { k: 2, max: 1 })
        ));
    }

    /// Reference kNN selection: sort every candidate by (distance, index).
    fn knn_naive(xs: &[f64], vs: &[f64], k: usize) -> Vec<f64> {
        let n = xs.len();
        (0..n)
            .map(|i| {
                let mut cand: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                cand.sort_by(|&a, &b| {
                    (xs[a] - xs[i])
                        .abs()
                        .total_cmp(&(xs[b] - xs[i]).abs())
                        .then(a.cmp(&b))
                });
                let sum: f64 = cand[..k].iter().map(|&j| vs[j]).sum();
                sum / k as f64
            })
            .collect()
    }

    #[test]
    fn binned_hand_examples() {
        let fit = binned_fit(&[0.2, 0.4, 0.6, 0.8], &[1.0, 2.0, 3.0, 4.0], 2, 0.0, 1.0).unwrap();
        assert_eq!(fit.estimates(), &[1.5, 1.5, 3.5, 3.5]);
        assert!(!fit.leave_one_out());

        let fit = binned_fit(&[0.2, 0.4, 0.6, 0.8], &[1.0, 2.0, 3.0, 4.0], 1, 0.0, 1.0).unwrap();
        assert_eq!(fit.estimates(), &[2.5; 4]);

        // bins = n with one point per cell reproduces v exactly.
        let fit = binned_fit(&[0.2, 0.4, 0.6, 0.8], &[1.0, 2.0, 3.0, 4.0], 4, 0.0, 1.0).unwrap();
        assert_eq!(fit.estimates(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn binned_cells_are_right_closed() {
        // 0.5 belongs to the first of two cells over [0, 1].
        let fit = binned_fit(&[0.5, 0.75], &[1.0, 3.0], 2, 0.0, 1.0).unwrap();
        assert_eq!(fit.estimates(), &[1.0, 3.0]);
    }

    #[test]
    fn binned_rejects_bad_bins() {
        let s = unit(vec![0.25, 0.75], vec![0.1, 0.9]);
        assert!(matches!(
            cond_mean_binned(&s, 0),
            Err(Error::BinsOutOfRange { .. })
        ));
        assert!(matches!(
            cond_mean_binned(&s, 3),
            Err(Error::BinsOutOfRange { .. })
        ));
    }

    #[test]
    fn l2_report_hand_example() {
        let raw = load_sample(&[(0.2, 1.0), (0.4, 2.0), (0.6, 3.0), (0.8, 4.0)]).unwrap();
        let fit = cond_mean_binned_raw(&raw, 2).unwrap();
        assert_eq!(fit.estimates(), &[1.5, 1.5, 3.5, 3.5]);
        let rep = l2_report_raw(&raw, &fit).unwrap();
        assert_eq!(rep.var_v, 1.25);
        assert_eq!(rep.between, 1.0);
        assert_eq!(rep.within, 0.25);
        assert_eq!(rep.eta2, 0.8);
    }

    #[test]
    fn l2_report_degenerate_fits() {
        let s = unit(vec![0.2, 0.4, 0.6], vec![0.1, 0.5, 0.9]);
        // Perfect fit.
        let fit = ConditionalMeanFit {
            estimates: s.vs().to_vec(),
            method: CondMeanMethod::Binned { bins: 3 },
            leave_one_out: false,
        };
        let rep = l2_report(&s, &fit).unwrap();
        assert_eq!(rep.zeta2, 0.0);
        assert_eq!(rep.eta2, 1.0);

        // Constant fit at the mean: zeta2 = var, eta2 = 0.
        let fit = ConditionalMeanFit {
            estimates: vec![0.5; 3],
            method: CondMeanMethod::Binned { bins: 1 },
            leave_one_out: false,
        };
        let rep = l2_report(&s, &fit).unwrap();
        assert_eq!(rep.zeta2, rep.var_v);
        assert_eq!(rep.eta2, 0.0);
    }

    #[test]
    fn l2_report_rejects_constant_v() {
        let s = unit(vec![0.2, 0.4, 0.6], vec![0.5, 0.5, 0.5]);
        let fit = cond_mean_binned(&s, 1).unwrap();
        assert_eq!(l2_report(&s, &fit), Err(Error::ConstantV));
    }

    #[test]
    fn r_squared_examples() {
        // Dyadic perfect line: exact 1.
        let s = load_sample(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0), (3.0, 7.0)]).unwrap();
        assert_eq!(r_squared_ols(&s).unwrap(), 1.0);

        // Exactly zero covariance.
        let s = load_sample(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 0.0)]).unwrap();
        assert_eq!(r_squared_ols(&s).unwrap(), 0.0);

        let s = load_sample(&[(1.0, 2.0), (1.0, 3.0)]).unwrap();
        assert_eq!(r_squared_ols(&s), Err(Error::ZeroVariance { axis: "x" }));
        let s = load_sample(&[(1.0, 2.0), (3.0, 2.0)]).unwrap();
        assert_eq!(r_squared_ols(&s), Err(Error::ZeroVariance { axis: "y" }));
    }

    #[test]
    fn knn_k1_on_monotone_shrinks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut last = f64::INFINITY;
        for n in [100usize, 1000, 10_000] {
            let mut us: Vec<f64> = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();
            us.sort_unstable_by(f64::total_cmp);
            let vs: Vec<f64> = us.iter().map(|&u| u * u).collect();
            let s = unit(us, vs);
            let fit = cond_mean_knn(&s, 1).unwrap();
            let rep = l2_report(&s, &fit).unwrap();
            assert!(rep.zeta2 < last);
            last = rep.zeta2;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn defaults_are_clamped() {
        assert_eq!(default_knn_k(2), 1);
        assert_eq!(default_knn_k(100), 10);
        assert_eq!(default_bins(2), 2);
        assert_eq!(default_bins(1000), 10);
        assert_eq!(default_bins(100_000), 47);
    }

    proptest! {
        /// Windowed kNN equals the sort-everything reference.
        #[test]
        fn knn_matches_naive(
            raw in proptest::collection::vec((0u8..12, -50i32..50), 2..40),
            k_frac in 0.0f64..1.0,
        ) {
            let xs: Vec<f64> = raw.iter().map(|&(x, _)| x as f64 / 12.0 + 0.01).collect();
            let vs: Vec<f64> = raw.iter().map(|&(_, v)| v as f64).collect();
            let n = xs.len();
            let k = ((k_frac * (n - 1) as f64).floor() as usize).clamp(1, n - 1);
            let fit = knn_fit(&xs, &vs, k).unwrap();
            let expect = knn_naive(&xs, &vs, k);
            prop_assert_eq!(fit.estimates(), expect.as_slice());
        }

        /// Variance decomposition is exact for include-self binned fits.
        #[test]
        fn anova_identity(
            vals in proptest::collection::vec((1e-6f64..1.0, 1e-6f64..1.0), 2..200),
            bins_frac in 0.0f64..1.0,
        ) {
            let (us, vs): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
            let n = us.len();
            let s = unit(us, vs);
            let bins = ((bins_frac * n as f64).floor() as usize).clamp(1, n);
            let fit = cond_mean_binned(&s, bins).unwrap();
            match l2_report(&s, &fit) {
                Ok(rep) => {
                    let residual = (rep.between + rep.within - rep.var_v).abs();
                    prop_assert!(residual <= 1e-12 * rep.var_v.max(1.0),
                        "residual {residual} var {}", rep.var_v);
                }
                Err(Error::ConstantV) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }

        /// eta2 is invariant under affine maps of v; power-of-two scalings
        /// are bit-exact, general affine maps match to accumulation noise.
        #[test]
        fn eta2_affine_invariance(
            vals in proptest::collection::vec((1e-6f64..1.0, 1e-6f64..1.0), 4..60),
        ) {
            let (us, vs): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
            let n = us.len();
            let s = load_sample(
                &us.iter().copied().zip(vs.iter().copied()).collect::<Vec<_>>(),
            ).unwrap();
            let bins = default_bins(n);
            let base = l2_report_raw(&s, &cond_mean_binned_raw(&s, bins).unwrap());
            let scaled = load_sample(
                &us.iter().copied().zip(vs.iter().map(|&v| -4.0 * v)).collect::<Vec<_>>(),
            ).unwrap();
            let affine = load_sample(
                &us.iter().copied().zip(vs.iter().map(|&v| 3.7 * v - 1.2)).collect::<Vec<_>>(),
            ).unwrap();
            match base {
                Ok(rep) => {
                    let rep2 = l2_report_raw(&scaled, &cond_mean_binned_raw(&scaled, bins).unwrap()).unwrap();
                    prop_assert_eq!(rep.eta2, rep2.eta2);
                    let rep3 = l2_report_raw(&affine, &cond_mean_binned_raw(&affine, bins).unwrap()).unwrap();
                    prop_assert!((rep.eta2 - rep3.eta2).abs() <= 1e-9);
                }
                Err(Error::ConstantV) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
