//! Calibration of the LPPL curve to a price series: slaved objective,
//! taboo-search exploration, damped least-squares refinement, and retention
//! of the best distinct fits.

pub mod refine;
pub mod slaving;
pub mod taboo;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use refine::{lm_refine, RefineTol, Termination};
pub use slaving::{slave_linear, NonlinearPoint, ObjectiveKind, SlavedLinear, SlavingMode};
pub use taboo::{taboo_search, Candidate, TabooConfig};

use crate::error::{Error, Result};
use crate::model::{FitBounds, LpplParams, Qualification};
use crate::seeds::derive_seed;
use crate::simulate::PriceSeries;

/// Minimum number of observations in a fitting window. Seven parameters need
/// comfortable overdetermination.
pub const MIN_WINDOW_POINTS: usize = 30;

/// Retained fits with a qualification pass rate below this fraction flag the
/// ensemble as low confidence.
pub const LOW_CONFIDENCE_FLOOR: f64 = 0.2;

// Two optima closer than all of these are numerical clones of one minimum.
const DUP_TC: f64 = 0.5;
const DUP_M: f64 = 0.005;
const DUP_OMEGA: f64 = 0.05;
const DUP_REL_RMSE: f64 = 1e-6;
// Below this both objectives count as exactly converged.
const RMSE_FLOOR: f64 = 1e-10;

/// Everything a calibration run needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub bounds: FitBounds,
    pub slaving: SlavingMode,
    pub objective: ObjectiveKind,
    pub taboo: TabooConfig,
    pub refine: RefineTol,
    /// Number of distinct fits retained.
    pub top_k: usize,
    /// Independent taboo searches pooled before refinement.
    pub restarts: usize,
}

impl FitConfig {
    /// Defaults for a window `[t1, t2]`: four-linear slaving, log RMSE,
    /// ten retained fits, one taboo restart.
    pub fn for_window(t1: f64, t2: f64) -> Self {
        FitConfig {
            bounds: FitBounds::for_window(t1, t2),
            slaving: SlavingMode::FourLinear,
            objective: ObjectiveKind::LogRmse,
            taboo: TabooConfig::default(),
            refine: RefineTol::default(),
            top_k: 10,
            restarts: 1,
        }
    }

    pub fn validate(&self, series: &PriceSeries) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        self.taboo.validate()?;
        self.refine.validate()?;
        self.bounds.validate(series.t_end())?;
        Ok(())
    }
}

/// Objective value of a nonlinear point against a series; domain failures
/// and degenerate linear systems map to `+inf`.
pub fn objective(point: &NonlinearPoint, series: &PriceSeries, config: &FitConfig) -> f64 {
    match slaving::prepare(series) {
        Ok(prep) => slaving::eval_objective(&prep, point, config.slaving, config.objective),
        Err(_) => f64::INFINITY,
    }
}

/// Where a fit came from and how its refinement ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Window start.
    pub t1: f64,
    /// Window end.
    pub t2: f64,
    /// Base seed of the calibration run.
    pub seed: u64,
    /// Index of the taboo candidate that seeded the refinement.
    pub candidate: usize,
    /// The taboo starting point (nonlinear coordinates).
    pub start: Vec<f64>,
    /// Accepted refinement steps.
    pub iterations: usize,
    pub termination: Termination,
}

/// One calibration outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: LpplParams,
    /// Root-mean-square of `residuals` under the configured objective.
    pub rmse: f64,
    /// Per-point residuals under the configured objective.
    pub residuals: Vec<f64>,
    pub qualification: Qualification,
    pub provenance: Provenance,
}

/// A window that failed to calibrate during a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub t1: f64,
    pub t2: f64,
    pub reason: String,
}

/// Retained fits across restarts, replicas or windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEnsemble {
    /// Fits sorted by objective, best first.
    pub results: Vec<FitResult>,
    pub requested_top_k: usize,
    /// Distinct optima found before truncation to `top_k`.
    pub distinct_found: usize,
    /// Fewer than `top_k` distinct optima were available.
    pub short: bool,
    /// Fewer than [`LOW_CONFIDENCE_FLOOR`] of the retained fits qualify.
    pub low_confidence: bool,
    /// Refinements discarded because they ended pinned to a search bound;
    /// such points are constraint artifacts, not model optima.
    #[serde(default)]
    pub boundary_discards: usize,
    /// All distinct optima rested on a bound, so the retained fits are
    /// boundary artifacts kept as a fallback.
    #[serde(default)]
    pub boundary_only: bool,
    /// Per-window failures recorded by scans; empty for single-window fits.
    pub failures: Vec<WindowFailure>,
}

impl FitEnsemble {
    pub(crate) fn from_results(
        results: Vec<FitResult>,
        requested_top_k: usize,
        distinct: usize,
    ) -> Self {
        let qualified = results.iter().filter(|r| r.qualification.passed).count();
        let low_confidence =
            results.is_empty() || (qualified as f64) < LOW_CONFIDENCE_FLOOR * results.len() as f64;
        FitEnsemble {
            requested_top_k,
            distinct_found: distinct,
            short: distinct < requested_top_k,
            low_confidence,
            boundary_discards: 0,
            boundary_only: false,
            results,
            failures: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    pub fn best(&self) -> Option<&FitResult> {
        self.results.first()
    }

    /// Critical-time samples of all retained fits, in retention order.
    pub fn tc_samples(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.params.tc).collect()
    }
}

fn rmse_close(a: f64, b: f64) -> bool {
    let max = a.max(b);
    max < RMSE_FLOOR || (a - b).abs() <= DUP_REL_RMSE * max
}

fn is_duplicate(a: &FitResult, b: &FitResult) -> bool {
    (a.params.tc - b.params.tc).abs() < DUP_TC
        && (a.params.m - b.params.m).abs() < DUP_M
        && (a.params.omega - b.params.omega).abs() < DUP_OMEGA
        && rmse_close(a.rmse, b.rmse)
}

/// Total order on fits: objective ascending; equal objectives prefer the
/// larger hazard margin, then the exponent closer to 0.5, then the earlier
/// candidate (lexicographic, so the order is total and deterministic).
fn fit_order(a: &FitResult, b: &FitResult) -> std::cmp::Ordering {
    a.rmse
        .total_cmp(&b.rmse)
        .then_with(|| {
            b.params
                .hazard_margin()
                .total_cmp(&a.params.hazard_margin())
        })
        .then_with(|| {
            (a.params.m - 0.5)
                .abs()
                .total_cmp(&(b.params.m - 0.5).abs())
        })
        .then_with(|| a.provenance.candidate.cmp(&b.provenance.candidate))
}

/// Calibrate a series: taboo exploration, refinement of every candidate,
/// deduplication of cloned optima, and retention of the `top_k` best fits
/// with full provenance.
pub fn fit(series: &PriceSeries, config: &FitConfig) -> Result<FitEnsemble> {
    if series.len() < MIN_WINDOW_POINTS {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: MIN_WINDOW_POINTS,
        });
    }
    config.validate(series)?;
    let prep = slaving::prepare(series)?;

    let mut candidates = Vec::new();
    for restart in 0..config.restarts {
        let seed = derive_seed(config.taboo.seed, restart as u64);
        candidates.extend(taboo::search_prepared(&prep, config, seed)?);
    }

    let refined: Vec<(usize, Refinement)> = candidates
        .par_iter()
        .enumerate()
        .map(|(index, candidate)| {
            let outcome = refine::refine_prepared(&prep, &candidate.point, config)
                .map(|r| (candidate.point, r));
            (index, outcome)
        })
        .collect();

    let t1 = series.t0;
    let t2 = series.t_end();
    let fits: Vec<FitResult> = refined
        .into_iter()
        .filter_map(|(candidate, outcome)| outcome.ok().map(|v| (candidate, v)))
        .map(|(candidate, (start, refined))| {
            let params = slaving::assemble_params(&refined.point, &refined.slaved);
            FitResult {
                qualification: config.bounds.qualify(&params),
                params,
                rmse: refined.rmse,
                residuals: refined.residuals,
                provenance: Provenance {
                    t1,
                    t2,
                    seed: config.taboo.seed,
                    candidate,
                    start: start.to_vec(),
                    iterations: refined.iterations,
                    termination: refined.termination,
                },
            }
        })
        .collect();
    if fits.is_empty() {
        return Err(Error::AllWindowsFailed(format!(
            "no refinement succeeded on window [{t1}, {t2}]"
        )));
    }

    // A refinement that comes to rest on a search bound is a constraint
    // artifact (the data is pulling the parameter out of its admissible
    // range), not a genuine optimum of the model; such fits are only kept
    // when nothing interior exists.
    let (interior, pegged): (Vec<FitResult>, Vec<FitResult>) = fits
        .into_iter()
        .partition(|f| is_interior(&f.params, &config.bounds));
    let boundary_discards = pegged.len();
    let boundary_only = interior.is_empty();
    let mut fits = if boundary_only { pegged } else { interior };

    fits.sort_by(fit_order);
    let mut distinct: Vec<FitResult> = Vec::with_capacity(fits.len());
    for fit in fits {
        if !distinct.iter().any(|kept| is_duplicate(kept, &fit)) {
            distinct.push(fit);
        }
    }
    let found = distinct.len();
    distinct.truncate(config.top_k);
    let mut ensemble = FitEnsemble::from_results(distinct, config.top_k, found);
    ensemble.boundary_discards = if boundary_only { 0 } else { boundary_discards };
    ensemble.boundary_only = boundary_only;
    Ok(ensemble)
}

/// True when none of the fitted nonlinear parameters rests on its bound.
fn is_interior(params: &LpplParams, bounds: &FitBounds) -> bool {
    let clear = |x: f64, iv: &crate::model::Interval| {
        let margin = 1e-6 * iv.width();
        x > iv.lo + margin && x < iv.hi - margin
    };
    clear(params.tc, &bounds.tc) && clear(params.m, &bounds.m) && clear(params.omega, &bounds.omega)
}

type Refinement = std::result::Result<(NonlinearPoint, refine::Refined), Error>;
