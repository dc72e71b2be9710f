//! C ABI over the `elg` crate.
//!
//! Every fallible function returns an [`ElgStatus`]; results come back
//! through out-pointers. After a non-zero status, [`elg_last_error`] gives a
//! message for the calling thread. Datasets and fits are opaque handles that
//! must be released with their `_free` function.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use elg::distributions::{elg_cdf, elg_hazard, elg_pdf, elg_quantile, elg_sample, elg_survival};
use elg::estimation::{confidence_intervals, fit_mle_em, log_likelihood};
use elg::inference::{fit_elg_nested, lr_test_against, NullModel};
use elg::moments::elg_moment;
use elg::{Dataset, ElgParams, Error, FitOptions, FitResult, Seed};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElgStatus {
    ElgOk = 0,
    ElgErrDomain = 1,
    ElgErrNonConvergence = 2,
    ElgErrSingular = 3,
    ElgErrDegenerateData = 4,
    ElgErrParse = 5,
    ElgErrIo = 6,
    ElgErrNullPointer = 7,
    ElgErrPanic = 8,
}

/// Null hypothesis for [`elg_lr_test`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElgNull {
    /// alpha = 1
    ElgNullLg = 0,
    /// alpha = 1, p = 0
    ElgNullLindley = 1,
}

/// Opaque sample of positive failure times.
pub struct ElgDataset(Dataset);

/// Opaque maximum likelihood fit.
pub struct ElgFit(FitResult);

const EM_DEFAULT_MAX_ITER: usize = 200_000;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> ElgStatus {
    match err {
        Error::Domain(_) => ElgStatus::ElgErrDomain,
        Error::NonConvergence { .. } => ElgStatus::ElgErrNonConvergence,
        Error::Singular { .. } => ElgStatus::ElgErrSingular,
        Error::DegenerateData(_) => ElgStatus::ElgErrDegenerateData,
        Error::Parse { .. } => ElgStatus::ElgErrParse,
        Error::Io(_) => ElgStatus::ElgErrIo,
    }
}

fn guard<F: FnOnce() -> Result<(), ElgStatusError>>(f: F) -> ElgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ElgStatus::ElgOk,
        Ok(Err(ElgStatusError::Lib(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Ok(Err(ElgStatusError::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            ElgStatus::ElgErrNullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            ElgStatus::ElgErrPanic
        }
    }
}

enum ElgStatusError {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for ElgStatusError {
    fn from(e: Error) -> Self {
        ElgStatusError::Lib(e)
    }
}

fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, ElgStatusError> {
    // SAFETY: caller guarantees `p` is null or valid for writes.
    unsafe { p.as_mut() }.ok_or(ElgStatusError::Null(what))
}

fn input<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, ElgStatusError> {
    // SAFETY: caller guarantees `p` is null or a live handle.
    unsafe { p.as_ref() }.ok_or(ElgStatusError::Null(what))
}

/// Message for the last failing call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn elg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn eval(
    alpha: f64,
    theta: f64,
    p: f64,
    arg: f64,
    result: *mut f64,
    f: fn(ElgParams, f64) -> elg::Result<f64>,
) -> ElgStatus {
    guard(|| {
        let r = out(result, "out")?;
        *r = f(ElgParams::new(alpha, theta, p)?, arg)?;
        Ok(())
    })
}

/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_pdf_eval(alpha: f64, theta: f64, p: f64, x: f64, out: *mut f64) -> ElgStatus {
    eval(alpha, theta, p, x, out, elg_pdf)
}

/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_cdf_eval(alpha: f64, theta: f64, p: f64, x: f64, out: *mut f64) -> ElgStatus {
    eval(alpha, theta, p, x, out, elg_cdf)
}

/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_survival_eval(alpha: f64, theta: f64, p: f64, x: f64, out: *mut f64) -> ElgStatus {
    eval(alpha, theta, p, x, out, elg_survival)
}

/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_hazard_eval(alpha: f64, theta: f64, p: f64, x: f64, out: *mut f64) -> ElgStatus {
    eval(alpha, theta, p, x, out, elg_hazard)
}

/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_quantile_eval(alpha: f64, theta: f64, p: f64, u: f64, out: *mut f64) -> ElgStatus {
    eval(alpha, theta, p, u, out, elg_quantile)
}

/// Raw moment `E(X^n)`, `n >= 1`.
///
/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_moment_eval(alpha: f64, theta: f64, p: f64, n: u32, out: *mut f64) -> ElgStatus {
    guard(|| {
        let r = self::out(out, "out")?;
        *r = elg_moment(ElgParams::new(alpha, theta, p)?, n)?.value;
        Ok(())
    })
}

/// Writes `n` seeded draws into `buffer`, which must hold `n` doubles.
///
/// # Safety
/// `buffer` must be valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn elg_sample_fill(alpha: f64, theta: f64, p: f64, n: usize, seed: u64, buffer: *mut f64) -> ElgStatus {
    guard(|| {
        if buffer.is_null() {
            return Err(ElgStatusError::Null("buffer"));
        }
        let draws = elg_sample(ElgParams::new(alpha, theta, p)?, n, Seed(seed))?;
        // SAFETY: caller guarantees room for n doubles.
        unsafe { ptr::copy_nonoverlapping(draws.as_ptr(), buffer, n) };
        Ok(())
    })
}

/// Copies `n` values into a new dataset handle.
///
/// # Safety
/// `values` must be valid for `n` reads.
#[no_mangle]
pub unsafe extern "C" fn elg_dataset_new(values: *const f64, n: usize, out: *mut *mut ElgDataset) -> ElgStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        if values.is_null() {
            return Err(ElgStatusError::Null("values"));
        }
        // SAFETY: caller guarantees n readable doubles.
        let v = unsafe { std::slice::from_raw_parts(values, n) }.to_vec();
        let ds = Dataset::new(v, "ffi")?;
        *slot = Box::into_raw(Box::new(ElgDataset(ds)));
        Ok(())
    })
}

/// Releases a dataset handle. NULL is ignored.
///
/// # Safety
/// `ds` must come from [`elg_dataset_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn elg_dataset_free(ds: *mut ElgDataset) {
    if !ds.is_null() {
        // SAFETY: pointer came from Box::into_raw.
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_dataset_len(ds: *const ElgDataset) -> usize {
    input(ds, "dataset").map_or(0, |d| d.0.len())
}

/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_log_likelihood(ds: *const ElgDataset, alpha: f64, theta: f64, p: f64, out: *mut f64) -> ElgStatus {
    guard(|| {
        let d = input(ds, "dataset")?;
        let r = self::out(out, "out")?;
        *r = log_likelihood(ElgParams::new(alpha, theta, p)?, &d.0);
        Ok(())
    })
}

fn store_fit(fit: elg::Result<FitResult>, out: *mut *mut ElgFit) -> Result<(), ElgStatusError> {
    let slot = self::out(out, "out")?;
    let fit = fit?;
    *slot = Box::into_raw(Box::new(ElgFit(fit)));
    Ok(())
}

/// Newton-Raphson fit from a grid of starting points.
///
/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_fit_newton(ds: *const ElgDataset, out: *mut *mut ElgFit) -> ElgStatus {
    guard(|| {
        let d = input(ds, "dataset")?;
        store_fit(fit_elg_nested(&d.0, None, &FitOptions::default()), out)
    })
}

/// EM fit started at `(alpha, theta, p)` with `0 < p < 1`. A zero
/// `max_iterations` means 200000.
///
/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_fit_em(ds: *const ElgDataset, alpha: f64, theta: f64, p: f64, max_iterations: usize, out: *mut *mut ElgFit) -> ElgStatus {
    guard(|| {
        let d = input(ds, "dataset")?;
        let init = ElgParams::new(alpha, theta, p)?;
        let opts = FitOptions {
            max_iterations: if max_iterations == 0 { EM_DEFAULT_MAX_ITER } else { max_iterations },
            ..FitOptions::default()
        };
        store_fit(fit_mle_em(&d.0, Some(init), &opts), out)
    })
}

/// Releases a fit handle. NULL is ignored.
///
/// # Safety
/// `fit` must come from a fitting function and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn elg_fit_free(fit: *mut ElgFit) {
    if !fit.is_null() {
        // SAFETY: pointer came from Box::into_raw.
        drop(unsafe { Box::from_raw(fit) });
    }
}

/// Estimates, log-likelihood and convergence flag of a fit.
///
/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_fit_estimates(
    fit: *const ElgFit,
    alpha: *mut f64,
    theta: *mut f64,
    p: *mut f64,
    loglik: *mut f64,
    converged: *mut bool,
) -> ElgStatus {
    guard(|| {
        let f = &input(fit, "fit")?.0;
        *out(alpha, "alpha")? = f.params.alpha();
        *out(theta, "theta")? = f.params.theta();
        *out(p, "p")? = f.params.p();
        *out(loglik, "loglik")? = f.loglik;
        *out(converged, "converged")? = f.converged;
        Ok(())
    })
}

/// Writes the row-major 3x3 covariance matrix of `(alpha, theta, p)`.
///
/// # Safety
/// `out9` must be valid for 9 writes.
#[no_mangle]
pub unsafe extern "C" fn elg_fit_vcov(fit: *const ElgFit, out9: *mut f64) -> ElgStatus {
    guard(|| {
        let f = &input(fit, "fit")?.0;
        if out9.is_null() {
            return Err(ElgStatusError::Null("out9"));
        }
        let v = f.vcov.ok_or(Error::Singular {
            condition: f.info_condition,
        })?;
        for (i, &x) in v.iter().flatten().enumerate() {
            // SAFETY: caller guarantees 9 writable doubles.
            unsafe { *out9.add(i) = x };
        }
        Ok(())
    })
}

/// Wald interval for parameter `index` (0 alpha, 1 theta, 2 p).
///
/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_fit_interval(fit: *const ElgFit, index: u32, level: f64, lower: *mut f64, upper: *mut f64) -> ElgStatus {
    guard(|| {
        let f = &input(fit, "fit")?.0;
        let ci = confidence_intervals(f, level)?;
        let (lo, hi) = match index {
            0 => ci.alpha_ci,
            1 => ci.theta_ci,
            2 => ci.p_ci,
            _ => return Err(Error::Domain(format!("parameter index {index} not in 0..=2")).into()),
        };
        *out(lower, "lower")? = lo;
        *out(upper, "upper")? = hi;
        Ok(())
    })
}

/// Likelihood-ratio test of the full model against a nested submodel.
///
/// # Safety
/// Pointer arguments must be NULL or valid for their stated use.
#[no_mangle]
pub unsafe extern "C" fn elg_lr_test(ds: *const ElgDataset, null: ElgNull, omega: *mut f64, p_value: *mut f64, df: *mut u32) -> ElgStatus {
    guard(|| {
        let d = input(ds, "dataset")?;
        let null = match null {
            ElgNull::ElgNullLg => NullModel::Lg,
            ElgNull::ElgNullLindley => NullModel::Lindley,
        };
        let t = lr_test_against(&d.0, null, &FitOptions::default())?;
        *out(omega, "omega")? = t.test.omega;
        *out(p_value, "p_value")? = t.test.p_value;
        *out(df, "df")? = t.test.df;
        Ok(())
    })
}
