//! C ABI for the LPPL toolkit.
//!
//! Handles are opaque pointers created and freed by this library; every
//! fallible call returns an [`LpplStatus`] and stores a human-readable
//! message retrievable with [`lppl_last_error_message`] (thread-local, valid
//! until the next failing call on the same thread).

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lppl::calibrate::{fit, FitConfig, FitEnsemble};
use lppl::error::Error;
use lppl::forecast::{density_of_samples, tc_density, DensityConfig};
use lppl::model::LpplParams;
use lppl::simulate::{add_noise, generate_reference, NoiseKind, NoiseSpec, PriceSeries, Scale};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpplStatus {
    Ok = 0,
    /// A time at or past the critical time, or a window touching it.
    Domain = 1,
    /// Invalid argument or configuration.
    InvalidArgument = 2,
    /// The slaved linear system is degenerate at the requested point.
    Degenerate = 3,
    /// Calibration produced no usable fit.
    CalibrationFailed = 4,
    NullPointer = 5,
    Io = 6,
    /// A panic was caught at the boundary; state is unspecified.
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> LpplStatus {
    match err {
        Error::TimeNotBeforeCritical { .. } | Error::WindowTouchesCritical { .. } => {
            LpplStatus::Domain
        }
        Error::DegenerateSystem => LpplStatus::Degenerate,
        Error::AllWindowsFailed(_) | Error::NonStationaryResiduals { .. } => {
            LpplStatus::CalibrationFailed
        }
        Error::Io { .. } | Error::Json(_) => LpplStatus::Io,
        _ => LpplStatus::InvalidArgument,
    }
}

fn fail(err: &Error) -> LpplStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guard<F: FnOnce() -> LpplStatus>(body: F) -> LpplStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            LpplStatus::Internal
        }
    }
}

/// The seven parameters of the log-price curve
/// `ln p(t) = A + B (tc-t)^m + C (tc-t)^m cos(omega ln(tc-t) - phi)`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LpplCurveParams {
    pub tc: f64,
    pub m: f64,
    pub omega: f64,
    pub phi: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl From<LpplCurveParams> for LpplParams {
    fn from(p: LpplCurveParams) -> Self {
        LpplParams {
            tc: p.tc,
            m: p.m,
            omega: p.omega,
            phi: p.phi,
            a: p.a,
            b: p.b,
            c: p.c,
        }
    }
}

impl From<LpplParams> for LpplCurveParams {
    fn from(p: LpplParams) -> Self {
        LpplCurveParams {
            tc: p.tc,
            m: p.m,
            omega: p.omega,
            phi: p.phi,
            a: p.a,
            b: p.b,
            c: p.c,
        }
    }
}

/// Opaque price-series handle.
pub struct LpplSeries {
    inner: PriceSeries,
}

/// Opaque handle over the retained fits of a calibration run.
pub struct LpplEnsemble {
    inner: FitEnsemble,
}

/// Calibration options. Use [`lppl_fit_options_default`] and override
/// fields as needed; `top_k`, `taboo_iterations` and `taboo_pool` of zero
/// fall back to the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LpplFitOptions {
    pub seed: u64,
    /// Retained fits (0 = default 10).
    pub top_k: usize,
    /// Taboo-search iterations (0 = default 500).
    pub taboo_iterations: usize,
    /// Taboo candidate pool (0 = default 30).
    pub taboo_pool: usize,
    /// Search the exponent in [-5, 5] instead of [0.01, 0.99].
    pub diagnostic_m: bool,
}

/// Summary statistics of a gridded density.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LpplDensitySummary {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub count: usize,
    pub bandwidth: f64,
    pub degenerate: bool,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lppl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last error on this thread. The pointer stays valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lppl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Default calibration options.
#[no_mangle]
pub extern "C" fn lppl_fit_options_default() -> LpplFitOptions {
    LpplFitOptions {
        seed: 42,
        top_k: 0,
        taboo_iterations: 0,
        taboo_pool: 0,
        diagnostic_m: false,
    }
}

/// Log-price of the curve at time `t` (requires `t < tc`).
///
/// # Safety
/// `params` and `out` must be valid, non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn lppl_log_price(
    params: *const LpplCurveParams,
    t: f64,
    out: *mut f64,
) -> LpplStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        let p: LpplParams = (*params).into();
        match p.log_price(t) {
            Ok(v) => {
                *out = v;
                LpplStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// The non-negative-hazard margin `-B m - |C| sqrt(m^2 + omega^2)`;
/// non-negative values qualify as a bubble-consistent hazard.
///
/// # Safety
/// `params` must be a valid, non-null pointer.
#[no_mangle]
pub unsafe extern "C" fn lppl_hazard_margin(params: *const LpplCurveParams) -> f64 {
    if params.is_null() {
        return f64::NAN;
    }
    let p: LpplParams = (*params).into();
    p.hazard_margin()
}

/// Create a series from `len` uniformly spaced daily values starting at
/// `t0`. `is_log` marks the values as log-prices.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lppl_series_new(
    t0: f64,
    values: *const f64,
    len: usize,
    is_log: bool,
    out: *mut *mut LpplSeries,
) -> LpplStatus {
    guard(|| {
        if values.is_null() || out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        let slice = std::slice::from_raw_parts(values, len);
        let scale = if is_log { Scale::Log } else { Scale::Raw };
        match PriceSeries::new(t0, 1.0, slice.to_vec(), scale) {
            Ok(series) => {
                *out = Box::into_raw(Box::new(LpplSeries { inner: series }));
                LpplStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Generate the noise-free reference curve as a log-price series.
///
/// # Safety
/// `params` and `out` must be valid, non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn lppl_series_reference(
    params: *const LpplCurveParams,
    points: usize,
    t0: f64,
    out: *mut *mut LpplSeries,
) -> LpplStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        match generate_reference(&(*params).into(), points, t0) {
            Ok(series) => {
                *out = Box::into_raw(Box::new(LpplSeries { inner: series }));
                LpplStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Add i.i.d. noise to a log-price series. `student_t4` false draws
/// Gaussian noise; true draws Student-t with four degrees of freedom,
/// rescaled to the same standard deviation.
///
/// # Safety
/// `series` and `out` must be valid, non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn lppl_series_add_noise(
    series: *const LpplSeries,
    student_t4: bool,
    relative_std: f64,
    seed: u64,
    out: *mut *mut LpplSeries,
) -> LpplStatus {
    guard(|| {
        if series.is_null() || out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        let spec = NoiseSpec {
            kind: if student_t4 {
                NoiseKind::StudentT4
            } else {
                NoiseKind::Gaussian
            },
            relative_std,
            seed,
        };
        match add_noise(&(*series).inner, &spec) {
            Ok(noisy) => {
                *out = Box::into_raw(Box::new(LpplSeries { inner: noisy }));
                LpplStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of observations in a series; zero for a null handle.
///
/// # Safety
/// `series` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn lppl_series_len(series: *const LpplSeries) -> usize {
    if series.is_null() {
        0
    } else {
        let inner = &(*series).inner;
        inner.len()
    }
}

/// Copy the series values into `out`, which must hold at least
/// [`lppl_series_len`] doubles.
///
/// # Safety
/// `series` must be a valid handle and `out` writable for the series length.
#[no_mangle]
pub unsafe extern "C" fn lppl_series_values(
    series: *const LpplSeries,
    out: *mut f64,
) -> LpplStatus {
    guard(|| {
        if series.is_null() || out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        let values = &(*series).inner.values;
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
        LpplStatus::Ok
    })
}

/// Free a series handle. Null is a no-op.
///
/// # Safety
/// `series` must be null or a pointer previously returned by this library
/// and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lppl_series_free(series: *mut LpplSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Calibrate a series: taboo search plus damped least squares, returning the
/// retained fits sorted by objective.
///
/// # Safety
/// `series`, `options` and `out` must be valid, non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn lppl_fit(
    series: *const LpplSeries,
    options: *const LpplFitOptions,
    out: *mut *mut LpplEnsemble,
) -> LpplStatus {
    guard(|| {
        if series.is_null() || options.is_null() || out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        let data = &(*series).inner;
        let opts = *options;
        let mut config = if opts.diagnostic_m {
            let mut c = FitConfig::for_window(data.t0, data.t_end());
            c.bounds = lppl::model::FitBounds::diagnostic_for_window(data.t0, data.t_end());
            c
        } else {
            FitConfig::for_window(data.t0, data.t_end())
        };
        config.taboo.seed = opts.seed;
        if opts.top_k > 0 {
            config.top_k = opts.top_k;
        }
        if opts.taboo_iterations > 0 {
            config.taboo.iterations = opts.taboo_iterations;
        }
        if opts.taboo_pool > 0 {
            config.taboo.pool = opts.taboo_pool;
        }
        match fit(data, &config) {
            Ok(ensemble) => {
                *out = Box::into_raw(Box::new(LpplEnsemble { inner: ensemble }));
                LpplStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of retained fits; zero for a null handle.
///
/// # Safety
/// `ensemble` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn lppl_ensemble_len(ensemble: *const LpplEnsemble) -> usize {
    if ensemble.is_null() {
        0
    } else {
        let inner = &(*ensemble).inner;
        inner.results.len()
    }
}

/// Parameters of the fit at `index` (0 = best).
///
/// # Safety
/// `ensemble` and `out` must be valid, non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn lppl_ensemble_params(
    ensemble: *const LpplEnsemble,
    index: usize,
    out: *mut LpplCurveParams,
) -> LpplStatus {
    guard(|| {
        if ensemble.is_null() || out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        let results = &(*ensemble).inner.results;
        match results.get(index) {
            Some(result) => {
                *out = result.params.into();
                LpplStatus::Ok
            }
            None => {
                set_error("fit index out of range");
                LpplStatus::InvalidArgument
            }
        }
    })
}

/// Objective value of the fit at `index`.
///
/// # Safety
/// `ensemble` and `out` must be valid, non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn lppl_ensemble_rmse(
    ensemble: *const LpplEnsemble,
    index: usize,
    out: *mut f64,
) -> LpplStatus {
    guard(|| {
        if ensemble.is_null() || out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        let results = &(*ensemble).inner.results;
        match results.get(index) {
            Some(result) => {
                *out = result.rmse;
                LpplStatus::Ok
            }
            None => {
                set_error("fit index out of range");
                LpplStatus::InvalidArgument
            }
        }
    })
}

/// Whether the fit at `index` passes all enforced qualification criteria.
///
/// # Safety
/// `ensemble` and `out` must be valid, non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn lppl_ensemble_qualified(
    ensemble: *const LpplEnsemble,
    index: usize,
    out: *mut bool,
) -> LpplStatus {
    guard(|| {
        if ensemble.is_null() || out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        let results = &(*ensemble).inner.results;
        match results.get(index) {
            Some(result) => {
                *out = result.qualification.passed;
                LpplStatus::Ok
            }
            None => {
                set_error("fit index out of range");
                LpplStatus::InvalidArgument
            }
        }
    })
}

/// Free an ensemble handle. Null is a no-op.
///
/// # Safety
/// `ensemble` must be null or a pointer previously returned by this library
/// and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lppl_ensemble_free(ensemble: *mut LpplEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Kernel density of the retained critical times on a `points`-node grid.
/// `grid_out` and `density_out` must each hold `points` doubles; the
/// trapezoidal integral of the density over the grid is one.
///
/// # Safety
/// All pointers must be valid; the output buffers must hold `points`
/// doubles each.
#[no_mangle]
pub unsafe extern "C" fn lppl_tc_density(
    ensemble: *const LpplEnsemble,
    points: usize,
    grid_out: *mut f64,
    density_out: *mut f64,
    summary_out: *mut LpplDensitySummary,
) -> LpplStatus {
    guard(|| {
        if ensemble.is_null() || grid_out.is_null() || density_out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        let config = DensityConfig {
            points,
            ..DensityConfig::default()
        };
        match tc_density(&(*ensemble).inner, &config) {
            Ok(density) => {
                ptr::copy_nonoverlapping(density.grid.as_ptr(), grid_out, points);
                ptr::copy_nonoverlapping(density.density.as_ptr(), density_out, points);
                if !summary_out.is_null() {
                    *summary_out = LpplDensitySummary {
                        mean: density.summary.mean,
                        std: density.summary.std,
                        median: density.summary.median,
                        q05: density.summary.q05,
                        q95: density.summary.q95,
                        count: density.summary.count,
                        bandwidth: density.bandwidth,
                        degenerate: density.degenerate,
                    };
                }
                LpplStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Kernel density of caller-provided samples; same contract as
/// [`lppl_tc_density`].
///
/// # Safety
/// `samples` must point to `len` readable doubles; the output buffers must
/// hold `points` doubles each.
#[no_mangle]
pub unsafe extern "C" fn lppl_sample_density(
    samples: *const f64,
    len: usize,
    points: usize,
    grid_out: *mut f64,
    density_out: *mut f64,
    summary_out: *mut LpplDensitySummary,
) -> LpplStatus {
    guard(|| {
        if samples.is_null() || grid_out.is_null() || density_out.is_null() {
            set_error("null pointer");
            return LpplStatus::NullPointer;
        }
        let slice = std::slice::from_raw_parts(samples, len);
        let config = DensityConfig {
            points,
            ..DensityConfig::default()
        };
        match density_of_samples(slice, &config) {
            Ok(density) => {
                ptr::copy_nonoverlapping(density.grid.as_ptr(), grid_out, points);
                ptr::copy_nonoverlapping(density.density.as_ptr(), density_out, points);
                if !summary_out.is_null() {
                    *summary_out = LpplDensitySummary {
                        mean: density.summary.mean,
                        std: density.summary.std,
                        median: density.summary.median,
                        q05: density.summary.q05,
                        q95: density.summary.q95,
                        count: density.summary.count,
                        bandwidth: density.bandwidth,
                        degenerate: density.degenerate,
                    };
                }
                LpplStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
