//! C ABI for the localdep estimators.
//!
//! Conventions: a sample is an opaque handle created from two equal-length
//! arrays and freed by the caller; every computation returns an [`LdStatus`]
//! and writes its result through out-pointers. No call unwinds across the
//! boundary. The generated header lives at `include/localdep.h`.

use std::os::raw::c_char;

use localdep::epsresid::{zeta_hat, zeta_limit};
use localdep::moment::{
    cond_mean_binned_raw, cond_mean_knn_raw, default_bins, default_knn_k, l2_report_raw,
    r_squared_ols,
};
use localdep::{chatterjee, empirical_pit, localdelta, oracle, Error, PairedSample};

/// Status codes returned by every `ld_*` computation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdStatus {
    /// Success.
    LdOk = 0,
    /// A required pointer argument was null.
    LdNullPointer = 1,
    /// A parameter was outside its domain (epsilon, k, bins, correlation).
    LdInvalidArgument = 2,
    /// Fewer than two observations.
    LdInsufficientData = 3,
    /// A coordinate was NaN or infinite.
    LdNonFinite = 4,
    /// The statistic is undefined on this input (constant column).
    LdDegenerate = 5,
    /// The quadratic-cost guard refused the input size.
    LdGuardExceeded = 6,
    /// Internal failure (a bug; never expected).
    LdInternal = 7,
}

fn status_of(err: &Error) -> LdStatus {
    match err {
        Error::InsufficientData { .. } => LdStatus::LdInsufficientData,
        Error::NonFinite { .. } => LdStatus::LdNonFinite,
        Error::ConstantY | Error::ConstantV | Error::ZeroVariance { .. } => LdStatus::LdDegenerate,
        Error::QuadraticGuard { .. } => LdStatus::LdGuardExceeded,
        Error::NoDeltaNeighbors | Error::EpsilonBelowResolution => LdStatus::LdInvalidArgument,
        Error::NonPositiveDelta { .. }
        | Error::NonPositiveEpsilon { .. }
        | Error::KOutOfRange { .. }
        | Error::BinsOutOfRange { .. }
        | Error::InvalidCorrelation { .. }
        | Error::InvalidGeneratorSpec(_)
        | Error::OutOfUnitInterval { .. }
        | Error::LengthMismatch { .. } => LdStatus::LdInvalidArgument,
    }
}

/// Opaque sample handle.
pub struct LdSample {
    inner: PairedSample,
}

/// Runs a closure, mapping panics to `LdInternal` so nothing unwinds into C.
fn guarded<F: FnOnce() -> LdStatus + std::panic::UnwindSafe>(f: F) -> LdStatus {
    std::panic::catch_unwind(f).unwrap_or(LdStatus::LdInternal)
}

/// Creates a sample from two arrays of length `len`. On success writes a
/// handle to `out`; free it with [`ld_sample_free`].
///
/// # Safety
/// `xs` and `ys` must point to `len` readable doubles; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ld_sample_create(
    xs: *const f64,
    ys: *const f64,
    len: usize,
    out: *mut *mut LdSample,
) -> LdStatus {
    if xs.is_null() || ys.is_null() || out.is_null() {
        return LdStatus::LdNullPointer;
    }
    let xs = std::slice::from_raw_parts(xs, len).to_vec();
    let ys = std::slice::from_raw_parts(ys, len).to_vec();
    guarded(move || match PairedSample::new(xs, ys) {
        Ok(sample) => {
            let handle = Box::new(LdSample { inner: sample });
            // Caller owns the box from here.
            unsafe { *out = Box::into_raw(handle) };
            LdStatus::LdOk
        }
        Err(e) => status_of(&e),
    })
}

/// Frees a sample handle. Null is a no-op.
///
/// # Safety
/// `sample` must be a handle from [`ld_sample_create`], freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ld_sample_free(sample: *mut LdSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of observations in the sample.
///
/// # Safety
/// `sample` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ld_sample_len(sample: *const LdSample, out: *mut usize) -> LdStatus {
    if sample.is_null() || out.is_null() {
        return LdStatus::LdNullPointer;
    }
    *out = (*sample).inner.len();
    LdStatus::LdOk
}

unsafe fn with_sample<F>(sample: *const LdSample, out: *mut f64, f: F) -> LdStatus
where
    F: FnOnce(&PairedSample) -> Result<f64, Error> + std::panic::UnwindSafe,
{
    if sample.is_null() || out.is_null() {
        return LdStatus::LdNullPointer;
    }
    let inner = &(*sample).inner;
    guarded(std::panic::AssertUnwindSafe(move || match f(inner) {
        Ok(value) => {
            unsafe { *out = value };
            LdStatus::LdOk
        }
        Err(e) => status_of(&e),
    }))
}

/// Rank correlation (adjacent rank differences after x-ordering).
///
/// # Safety
/// `sample` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ld_chatterjee_xi(
    sample: *const LdSample,
    tie_seed: u64,
    out: *mut f64,
) -> LdStatus {
    with_sample(sample, out, |s| {
        chatterjee::chatterjee_xi(s, tie_seed).map(|r| r.xi)
    })
}

/// Sort-based large-n path; bit-identical to [`ld_chatterjee_xi`].
///
/// # Safety
/// `sample` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ld_chatterjee_xi_large(
    sample: *const LdSample,
    tie_seed: u64,
    out: *mut f64,
) -> LdStatus {
    with_sample(sample, out, |s| {
        chatterjee::chatterjee_xi_large(s, tie_seed).map(|r| r.xi)
    })
}

/// Quadratic reference implementation (guarded at n <= 5000 unless `force`).
///
/// # Safety
/// `sample` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ld_chatterjee_xi_bruteforce(
    sample: *const LdSample,
    tie_seed: u64,
    force: bool,
    out: *mut f64,
) -> LdStatus {
    with_sample(sample, out, |s| {
        if force {
            oracle::xi_bruteforce_unguarded(s, tie_seed)
        } else {
            oracle::xi_bruteforce(s, tie_seed)
        }
    })
}

/// Mean absolute adjacent concomitant difference.
///
/// # Safety
/// `sample` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ld_adjacent_l1(
    sample: *const LdSample,
    tie_seed: u64,
    out: *mut f64,
) -> LdStatus {
    with_sample(sample, out, |s| Ok(localdelta::adjacent_l1(s, tie_seed)))
}

/// L1 residual at fixed epsilon on the rank scale (the sample is passed
/// through the probability integral transform first). Writes `zeta`; `xi`
/// (optional) receives `1 - 4 zeta`.
///
/// # Safety
/// `sample` must be a live handle; `out_zeta` must be valid; `out_xi` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn ld_zeta_eps(
    sample: *const LdSample,
    epsilon: f64,
    out_zeta: *mut f64,
    out_xi: *mut f64,
) -> LdStatus {
    let status = with_sample(sample, out_zeta, |s| {
        zeta_hat(&empirical_pit(s), epsilon).map(|r| r.zeta)
    });
    if status == LdStatus::LdOk && !out_xi.is_null() {
        *out_xi = 1.0 - 4.0 * *out_zeta;
    }
    status
}

/// Shrinking-window L1 residual (rank-adjacent neighbors).
///
/// # Safety
/// `sample` must be a live handle; `out_zeta` must be valid; `out_xi` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn ld_zeta_limit(
    sample: *const LdSample,
    out_zeta: *mut f64,
    out_xi: *mut f64,
) -> LdStatus {
    let status = with_sample(sample, out_zeta, |s| Ok(zeta_limit(&empirical_pit(s)).zeta));
    if status == LdStatus::LdOk && !out_xi.is_null() {
        *out_xi = 1.0 - 4.0 * *out_zeta;
    }
    status
}

/// Normalized L2 residual from the include-self regressogram (`bins = 0`
/// selects the `ceil(n^(1/3))` default).
///
/// # Safety
/// `sample` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ld_eta2_binned(
    sample: *const LdSample,
    bins: usize,
    out: *mut f64,
) -> LdStatus {
    with_sample(sample, out, |s| {
        let bins = if bins == 0 { default_bins(s.len()) } else { bins };
        let fit = cond_mean_binned_raw(s, bins)?;
        l2_report_raw(s, &fit).map(|r| r.eta2)
    })
}

/// Normalized L2 residual from the leave-one-out kNN fit (`k = 0` selects
/// the `ceil(sqrt n)` default).
///
/// # Safety
/// `sample` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ld_eta2_knn(
    sample: *const LdSample,
    k: usize,
    out: *mut f64,
) -> LdStatus {
    with_sample(sample, out, |s| {
        let k = if k == 0 { default_knn_k(s.len()) } else { k };
        let fit = cond_mean_knn_raw(s, k)?;
        l2_report_raw(s, &fit).map(|r| r.eta2)
    })
}

/// Squared Pearson correlation (OLS R^2).
///
/// # Safety
/// `sample` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ld_r_squared(sample: *const LdSample, out: *mut f64) -> LdStatus {
    with_sample(sample, out, r_squared_ols)
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn ld_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Human-readable description of a status code (static storage).
#[no_mangle]
pub extern "C" fn ld_status_message(status: LdStatus) -> *const c_char {
    let msg: &'static str = match status {
        LdStatus::LdOk => "ok\0",
        LdStatus::LdNullPointer => "null pointer argument\0",
        LdStatus::LdInvalidArgument => "invalid argument\0",
        LdStatus::LdInsufficientData => "insufficient data: need at least 2 observations\0",
        LdStatus::LdNonFinite => "non-finite value in input\0",
        LdStatus::LdDegenerate => "degenerate input: constant column\0",
        LdStatus::LdGuardExceeded => "quadratic-cost guard exceeded\0",
        LdStatus::LdInternal => "internal error\0",
    };
    msg.as_ptr() as *const c_char
}
