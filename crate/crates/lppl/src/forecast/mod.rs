//! Probabilistic forecasting of the critical time: multi-window scans,
//! residual-based replica series (block bootstrap and AR(1)), and kernel
//! density estimates over the pooled fit parameters.

pub mod density;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use density::{
    density_of_samples, quantile_type1, BandwidthMode, DensityConfig, ParamStats, TcDensity,
};

use crate::calibrate::{fit, FitConfig, FitEnsemble, FitResult, WindowFailure, MIN_WINDOW_POINTS};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use crate::simulate::{PriceSeries, Scale};

/// A multi-window fitting plan: several window starts sharing a common end,
/// all calibrated with the same configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub t1_list: Vec<f64>,
    pub t2: f64,
    pub config: FitConfig,
}

impl ScanPlan {
    pub fn validate(&self) -> Result<()> {
        if self.t1_list.is_empty() {
            return Err(Error::InvalidConfig(
                "scan needs at least one window".into(),
            ));
        }
        if self.t1_list.iter().any(|&t1| !(t1 < self.t2)) {
            return Err(Error::InvalidConfig(format!(
                "every t1 must precede t2 = {}",
                self.t2
            )));
        }
        Ok(())
    }
}

/// Fit every window of the plan and pool the retained fits. Windows are
/// distinct evidence: results stay grouped per window and are never
/// deduplicated across windows. Individual window failures are recorded;
/// only a fully failed scan is an error.
pub fn scan_windows(series: &PriceSeries, plan: &ScanPlan) -> Result<FitEnsemble> {
    plan.validate()?;
    let mut results: Vec<FitResult> = Vec::new();
    let mut failures: Vec<WindowFailure> = Vec::new();
    let mut distinct = 0;
    let mut short = false;

    for &t1 in &plan.t1_list {
        let window = match series.window(t1, plan.t2) {
            Ok(w) => w,
            Err(e) => {
                failures.push(WindowFailure {
                    t1,
                    t2: plan.t2,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if window.len() < MIN_WINDOW_POINTS {
            failures.push(WindowFailure {
                t1,
                t2: plan.t2,
                reason: format!(
                    "window has {} points, fewer than the minimum of {MIN_WINDOW_POINTS}",
                    window.len()
                ),
            });
            continue;
        }
        match fit(&window, &plan.config) {
            Ok(ensemble) => {
                distinct += ensemble.distinct_found;
                short |= ensemble.short;
                results.extend(ensemble.results);
            }
            Err(e) => failures.push(WindowFailure {
                t1,
                t2: plan.t2,
                reason: e.to_string(),
            }),
        }
    }

    if results.is_empty() {
        let reasons = failures
            .iter()
            .map(|f| format!("[{} .. {}]: {}", f.t1, f.t2, f.reason))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::AllWindowsFailed(reasons));
    }

    let mut ensemble = FitEnsemble::from_results(results, plan.config.top_k, distinct);
    ensemble.short = short;
    ensemble.failures = failures;
    Ok(ensemble)
}

/// Replica-generation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicaMethod {
    /// Permute contiguous blocks of residuals; preserves the residual
    /// multiset exactly and the dependence structure up to the block length,
    /// with no distributional assumption.
    BlockBootstrap,
    /// Fitted curve plus AR(1) noise calibrated to the residuals.
    Ar1,
}

/// Replica series specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSpec {
    pub method: ReplicaMethod,
    pub count: usize,
    /// Block length in days (block bootstrap only).
    pub block_len: usize,
    pub seed: u64,
}

impl ReplicaSpec {
    pub fn validate(&self, window_len: usize) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidConfig("replica count must be >= 1".into()));
        }
        if self.method == ReplicaMethod::BlockBootstrap {
            if self.block_len == 0 {
                return Err(Error::InvalidConfig("block length must be >= 1".into()));
            }
            if self.block_len > window_len {
                return Err(Error::BlockTooLong {
                    block_len: self.block_len,
                    window: window_len,
                });
            }
        }
        Ok(())
    }
}

fn fitted_curve(series: &PriceSeries, fit: &FitResult) -> Result<Vec<f64>> {
    if fit.residuals.len() != series.len() {
        return Err(Error::InvalidConfig(format!(
            "fit residuals ({}) are not aligned to the series ({})",
            fit.residuals.len(),
            series.len()
        )));
    }
    let y = series.log_values()?;
    Ok(y.iter()
        .zip(fit.residuals.iter())
        .map(|(yi, ri)| yi - ri)
        .collect())
}

fn replica_series(template: &PriceSeries, values: Vec<f64>) -> PriceSeries {
    PriceSeries {
        t0: template.t0,
        step: template.step,
        values,
        scale: Scale::Log,
        crash_times: Vec::new(),
    }
}

/// The permuted residual vector of one bootstrap replica: contiguous blocks
/// of `block_len` (a final short block is kept) shuffled without
/// replacement. The returned values are bit-exact copies of the originals,
/// so the residual multiset is preserved exactly.
pub fn permute_residual_blocks(
    residuals: &[f64],
    block_len: usize,
    seed: u64,
    replica_index: u64,
) -> Vec<f64> {
    let blocks: Vec<&[f64]> = residuals.chunks(block_len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, replica_index));
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.shuffle(&mut rng);
    let mut out = Vec::with_capacity(residuals.len());
    for &b in &order {
        out.extend_from_slice(blocks[b]);
    }
    out
}

/// Block-bootstrap replicas: the permuted residuals of
/// [`permute_residual_blocks`] added back onto the fitted curve. Every
/// replica has the original length.
pub fn bootstrap_replicas(
    series: &PriceSeries,
    fit: &FitResult,
    spec: &ReplicaSpec,
) -> Result<Vec<PriceSeries>> {
    if spec.method != ReplicaMethod::BlockBootstrap {
        return Err(Error::InvalidConfig(
            "bootstrap_replicas requires the block_bootstrap method".into(),
        ));
    }
    spec.validate(series.len())?;
    let fitted = fitted_curve(series, fit)?;

    let mut replicas = Vec::with_capacity(spec.count);
    for r in 0..spec.count {
        let mut values =
            permute_residual_blocks(&fit.residuals, spec.block_len, spec.seed, r as u64);
        for (v, f) in values.iter_mut().zip(fitted.iter()) {
            *v += f;
        }
        replicas.push(replica_series(series, values));
    }
    Ok(replicas)
}

/// Least-squares AR(1) estimate from residuals: the lag-one coefficient of
/// `r_t` on `r_(t-1)` and the innovation standard deviation.
pub fn ar1_estimate(residuals: &[f64]) -> (f64, f64) {
    if residuals.len() < 2 {
        return (0.0, 0.0);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for w in residuals.windows(2) {
        num += w[1] * w[0];
        den += w[0] * w[0];
    }
    let rho = if den > 0.0 { num / den } else { 0.0 };
    let sse: f64 = residuals
        .windows(2)
        .map(|w| (w[1] - rho * w[0]).powi(2))
        .sum();
    let sigma = (sse / (residuals.len() - 1) as f64).sqrt();
    (rho, sigma)
}

/// AR(1) replicas: stationary AR(1) noise calibrated to the fit residuals is
/// added to the fitted curve. Refuses non-stationary residuals.
pub fn ar1_replicas(
    series: &PriceSeries,
    fit: &FitResult,
    spec: &ReplicaSpec,
) -> Result<Vec<PriceSeries>> {
    if spec.method != ReplicaMethod::Ar1 {
        return Err(Error::InvalidConfig(
            "ar1_replicas requires the ar1 method".into(),
        ));
    }
    spec.validate(series.len())?;
    let fitted = fitted_curve(series, fit)?;
    let (rho, sigma) = ar1_estimate(&fit.residuals);
    if rho.abs() >= 1.0 {
        return Err(Error::NonStationaryResiduals { rho });
    }

    let burn_in = 100 + (20.0 / (1.0 - rho.abs())).ceil() as usize;
    let mut replicas = Vec::with_capacity(spec.count);
    for r in 0..spec.count {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, r as u64));
        let mut x = 0.0f64;
        for _ in 0..burn_in {
            let z: f64 = StandardNormal.sample(&mut rng);
            x = rho * x + sigma * z;
        }
        let values: Vec<f64> = fitted
            .iter()
            .map(|f| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + sigma * z;
                f + x
            })
            .collect();
        replicas.push(replica_series(series, values));
    }
    Ok(replicas)
}

/// Which fitted parameter a density is estimated over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    Tc,
    M,
    Omega,
}

/// Samples of one parameter pooled over all retained fits, uniform weight.
pub fn param_samples(ensemble: &FitEnsemble, param: FitParam) -> Vec<f64> {
    ensemble
        .results
        .iter()
        .map(|r| match param {
            FitParam::Tc => r.params.tc,
            FitParam::M => r.params.m,
            FitParam::Omega => r.params.omega,
        })
        .collect()
}

/// Kernel density over one fitted parameter across the ensemble.
pub fn param_density(
    ensemble: &FitEnsemble,
    param: FitParam,
    config: &DensityConfig,
) -> Result<TcDensity> {
    let samples = param_samples(ensemble, param);
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    density_of_samples(&samples, config)
}

/// Kernel density over the pooled critical-time samples.
pub fn tc_density(ensemble: &FitEnsemble, config: &DensityConfig) -> Result<TcDensity> {
    param_density(ensemble, FitParam::Tc, config)
}

/// Per-parameter summary of an ensemble, uniform weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tc: ParamStats,
    pub m: ParamStats,
    pub omega: ParamStats,
}

/// Mean, standard deviation and quantiles of tc, m and omega over all
/// retained fits.
pub fn summarize(ensemble: &FitEnsemble) -> Result<Summary> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    Ok(Summary {
        tc: density::stats_of(&param_samples(ensemble, FitParam::Tc)),
        m: density::stats_of(&param_samples(ensemble, FitParam::M)),
        omega: density::stats_of(&param_samples(ensemble, FitParam::Omega)),
    })
}
