//! C ABI over the estimation core.
//!
//! Datasets and fits are opaque handles created by `sfa_*_load`,
//! `sfa_simulate` and `sfa_fit`, released with the matching `*_free`.
//! Every fallible call returns an [`SfaStatus`]; on failure the message is
//! available from [`sfa_last_error`] on the same thread. Panics never cross
//! the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use frontier_sfa::cli::{exit_code, EXIT_CONFIG, EXIT_DATA};
use frontier_sfa::frontier::FrontierSpec;
use frontier_sfa::inference::standard_errors;
use frontier_sfa::optimizer::{fit_mle, FitOptions, FitResult, ParamLayout};
use frontier_sfa::panel_data::{load_panel, IngestConfig, PanelDataset, Standardization};
use frontier_sfa::reference::default_truth;
use frontier_sfa::synthetic::{generate_panel, make_covariates, CovariateSource};
use frontier_sfa::{bc_efficiency, jlms, score_panel, PosteriorMoments, SfaError};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    EstimationError = 4,
    ConfigError = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque panel dataset.
pub struct SfaDataset {
    inner: PanelDataset,
}

/// Opaque fitted model.
pub struct SfaFit {
    inner: FitResult,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let msg = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: SfaStatus, message: impl Into<String>) -> SfaStatus {
    set_error(message);
    status
}

fn from_core(e: SfaError) -> SfaStatus {
    let status = match exit_code(&e) {
        EXIT_DATA => SfaStatus::DataError,
        EXIT_CONFIG => SfaStatus::ConfigError,
        _ => SfaStatus::EstimationError,
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting panics into [`SfaStatus::Panic`].
fn guard<F: FnOnce() -> SfaStatus>(f: F) -> SfaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == SfaStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(SfaStatus::Panic, "internal panic"),
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, SfaStatus> {
    if p.is_null() {
        return Err(fail(SfaStatus::NullPointer, format!("{what} is null")));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail(SfaStatus::InvalidArgument, format!("{what} is not UTF-8"))),
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sfa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads the culture, governance and GDP files.
///
/// `standardization`: 0 pooled, 1 per year, 2 none.
///
/// # Safety
/// Paths must be null or NUL-terminated strings; `out` must be null or
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sfa_dataset_load(
    culture: *const c_char,
    wgi: *const c_char,
    gdp: *const c_char,
    standardization: i32,
    out: *mut *mut SfaDataset,
) -> SfaStatus {
    guard(|| {
        if out.is_null() {
            return fail(SfaStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let (c, w, g) = match (path_arg(culture, "culture"), path_arg(wgi, "wgi"), path_arg(gdp, "gdp")) {
            (Ok(c), Ok(w), Ok(g)) => (c, w, g),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let standardization = match standardization {
            0 => Standardization::Pooled,
            1 => Standardization::PerYear,
            2 => Standardization::None,
            other => {
                return fail(
                    SfaStatus::InvalidArgument,
                    format!("standardization {other} is not 0, 1 or 2"),
                )
            }
        };
        let config = IngestConfig {
            year_range: None,
            standardization,
        };
        match load_panel(&c, &w, &g, &config) {
            Ok((inner, _)) => {
                *out = Box::into_raw(Box::new(SfaDataset { inner }));
                SfaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Simulates a single-output panel at the default truth with real-shaped
/// covariates, `n_countries` countries and `n_years` consecutive years
/// ending in 2019.
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sfa_simulate(
    n_countries: usize,
    n_years: usize,
    seed: u64,
    out: *mut *mut SfaDataset,
) -> SfaStatus {
    guard(|| {
        if out.is_null() {
            return fail(SfaStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        if n_years == 0 || n_years > 1000 {
            return fail(SfaStatus::InvalidArgument, "n_years must be in 1..=1000");
        }
        let years: Vec<i32> = (0..n_years as i32).map(|k| 2019 - n_years as i32 + 1 + k).collect();
        let spec = FrontierSpec::ti_tn(0);
        let result = make_covariates(CovariateSource::RealShaped, n_countries, &years, seed)
            .and_then(|cov| generate_panel(&default_truth(), &spec, &cov, seed));
        match result {
            Ok(p) => {
                *out = Box::into_raw(Box::new(SfaDataset { inner: p.dataset }));
                SfaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `dataset` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sfa_dataset_free(dataset: *mut SfaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of countries, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfa_dataset_n_countries(dataset: *const SfaDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_countries())
}

/// Number of country-year observations, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfa_dataset_n_observations(dataset: *const SfaDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.observations.len())
}

/// Number of output columns, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfa_dataset_n_outputs(dataset: *const SfaDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_outputs())
}

/// Index of the output named `name` (case-insensitive), or -1.
///
/// # Safety
/// `dataset` must be null or a live handle; `name` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sfa_dataset_output_index(dataset: *const SfaDataset, name: *const c_char) -> i64 {
    let (Some(d), false) = (dataset.as_ref(), name.is_null()) else {
        return -1;
    };
    CStr::from_ptr(name)
        .to_str()
        .ok()
        .and_then(|n| d.inner.output_index(n))
        .map_or(-1, |i| i as i64)
}

/// Fits one output equation by maximum likelihood.
///
/// `spec` is one of `ti-tn`, `ti-hn`, `td-tn`, `td-hn`; `starts` 0 means
/// the default number of starting points.
///
/// # Safety
/// `dataset` must be a live handle, `spec` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sfa_fit(
    dataset: *const SfaDataset,
    output: usize,
    spec: *const c_char,
    starts: usize,
    seed: u64,
    out: *mut *mut SfaFit,
) -> SfaStatus {
    guard(|| {
        if out.is_null() || dataset.is_null() || spec.is_null() {
            return fail(SfaStatus::NullPointer, "dataset, spec and out must be non-null");
        }
        *out = ptr::null_mut();
        let d = &(*dataset).inner;
        if output >= d.n_outputs() {
            return fail(
                SfaStatus::InvalidArgument,
                format!("output {output} out of range ({} outputs)", d.n_outputs()),
            );
        }
        let Some(spec) = CStr::from_ptr(spec)
            .to_str()
            .ok()
            .and_then(|c| FrontierSpec::from_code(output, c))
        else {
            return fail(SfaStatus::InvalidArgument, "spec must be ti-tn, ti-hn, td-tn or td-hn");
        };
        let mut options = FitOptions {
            seed,
            ..FitOptions::default()
        };
        if starts > 0 {
            options.starts = starts;
        }
        match fit_mle(d, &spec, &options) {
            Ok(inner) => {
                let names = inner
                    .param_names
                    .iter()
                    .map(|n| CString::new(n.as_str()).unwrap_or_default())
                    .collect();
                *out = Box::into_raw(Box::new(SfaFit { inner, names }));
                SfaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `fit` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sfa_fit_free(fit: *mut SfaFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Maximized log-likelihood, NaN for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfa_fit_loglik(fit: *const SfaFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.inner.loglik)
}

/// Number of estimated parameters, 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfa_fit_n_params(fit: *const SfaFit) -> usize {
    fit.as_ref().map_or(0, |f| f.names.len())
}

/// Name of parameter `index`, or null when out of range. The string lives
/// as long as the handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfa_fit_param_name(fit: *const SfaFit, index: usize) -> *const c_char {
    fit.as_ref()
        .and_then(|f| f.names.get(index))
        .map_or(ptr::null(), |n| n.as_ptr())
}

unsafe fn fill(values: &[f64], buf: *mut f64, len: usize) -> SfaStatus {
    if buf.is_null() {
        return fail(SfaStatus::NullPointer, "buffer is null");
    }
    if len < values.len() {
        return fail(
            SfaStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        );
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    SfaStatus::Ok
}

/// Writes the estimates in original units, ordered as the parameter names.
///
/// # Safety
/// `fit` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sfa_fit_params(fit: *const SfaFit, buf: *mut f64, len: usize) -> SfaStatus {
    guard(|| {
        let Some(f) = fit.as_ref() else {
            return fail(SfaStatus::NullPointer, "fit is null");
        };
        let p = &f.inner.params;
        let layout = ParamLayout::new(&f.inner.spec, p.beta.len(), p.gamma.len());
        fill(&layout.to_vector(p), buf, len)
    })
}

/// Writes the standard errors from the inverse negative Hessian.
///
/// # Safety
/// `fit` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sfa_fit_standard_errors(fit: *const SfaFit, buf: *mut f64, len: usize) -> SfaStatus {
    guard(|| {
        let Some(f) = fit.as_ref() else {
            return fail(SfaStatus::NullPointer, "fit is null");
        };
        match standard_errors(&f.inner) {
            Ok(t) => fill(&t.rows.iter().map(|r| r.se).collect::<Vec<_>>(), buf, len),
            Err(e) => from_core(e),
        }
    })
}

/// Writes the efficiency score `E[exp(-u) | ε]` of every country in the
/// estimation sample, in dataset country order. `written` receives the
/// number of countries.
///
/// # Safety
/// Handles must be live and the fit must come from `dataset`; `buf` must
/// be writable for `len` doubles and `written` for one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn sfa_fit_efficiency(
    dataset: *const SfaDataset,
    fit: *const SfaFit,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> SfaStatus {
    guard(|| {
        let (Some(d), Some(f)) = (dataset.as_ref(), fit.as_ref()) else {
            return fail(SfaStatus::NullPointer, "dataset and fit must be non-null");
        };
        if written.is_null() {
            return fail(SfaStatus::NullPointer, "written is null");
        }
        match score_panel(&d.inner, &f.inner) {
            Ok(scores) => {
                *written = scores.len();
                fill(&scores.iter().map(|s| s.te).collect::<Vec<_>>(), buf, len)
            }
            Err(e) => from_core(e),
        }
    })
}

/// `E[u | ε]` for a posterior `N(mu_star, sigma_star²)` truncated at zero;
/// NaN for invalid input.
#[no_mangle]
pub extern "C" fn sfa_jlms(mu_star: f64, sigma_star: f64) -> f64 {
    if sigma_star.is_nan() || sigma_star < 0.0 || !mu_star.is_finite() {
        return f64::NAN;
    }
    jlms(&PosteriorMoments { mu_star, sigma_star })
}

/// `E[exp(-weight·u) | ε]` for the same posterior; NaN for invalid input.
#[no_mangle]
pub extern "C" fn sfa_bc_efficiency(mu_star: f64, sigma_star: f64, weight: f64) -> f64 {
    if sigma_star.is_nan() || sigma_star < 0.0 || !mu_star.is_finite() || !weight.is_finite() {
        return f64::NAN;
    }
    bc_efficiency(&PosteriorMoments { mu_star, sigma_star }, weight)
}
