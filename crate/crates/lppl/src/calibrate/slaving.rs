//! Slaving of the linear parameters: for fixed nonlinear parameters the LPPL
//! curve is linear in (A, B, C) or (A, B, C1, C2), so the optimal linear
//! parameters come from an exact least-squares solve. This reduces the
//! nonlinear search space from seven dimensions to four (three with the
//! cosine expanded).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{wrap_phase, LpplParams};
use crate::simulate::PriceSeries;

/// Which linear parameters are slaved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlavingMode {
    /// Solve (A, B, C) with the phase held fixed; four nonlinear parameters.
    ThreeLinear,
    /// Expand `C cos(w ln tau - phi) = C1 cos(w ln tau) + C2 sin(w ln tau)`
    /// and solve (A, B, C1, C2); three nonlinear parameters.
    FourLinear,
}

impl SlavingMode {
    /// Number of nonlinear parameters searched under this mode.
    pub fn nonlinear_dim(&self) -> usize {
        match self {
            SlavingMode::ThreeLinear => 4,
            SlavingMode::FourLinear => 3,
        }
    }
}

/// Objective metric computed on the slaved residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// RMSE of `ln p - model`.
    LogRmse,
    /// RMSE of `(p - exp(model)) / p`, so each observation contributes
    /// roughly equally when fitting raw prices.
    NormalizedPriceRmse,
}

/// A point in the nonlinear parameter space. `phi` is present only in
/// three-linear mode; in four-linear mode the phase is slaved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearPoint {
    pub tc: f64,
    pub m: f64,
    pub omega: f64,
    pub phi: Option<f64>,
}

impl NonlinearPoint {
    pub fn dim(&self) -> usize {
        if self.phi.is_some() {
            4
        } else {
            3
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        let mut v = vec![self.tc, self.m, self.omega];
        if let Some(phi) = self.phi {
            v.push(phi);
        }
        v
    }

    pub fn from_slice(mode: SlavingMode, x: &[f64]) -> Self {
        NonlinearPoint {
            tc: x[0],
            m: x[1],
            omega: x[2],
            phi: match mode {
                SlavingMode::ThreeLinear => Some(x[3]),
                SlavingMode::FourLinear => None,
            },
        }
    }
}

/// Result of the linear solve: the slaved parameters and the exact
/// log-space sum of squared errors they attain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlavedLinear {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub phi: f64,
    pub sse: f64,
}

/// Observation times and log-prices extracted once per series.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub t_end: f64,
}

pub(crate) fn prepare(series: &PriceSeries) -> Result<Prepared> {
    let y = series.log_values()?;
    let times = (0..series.len()).map(|i| series.time(i)).collect();
    Ok(Prepared {
        times,
        y,
        t_end: series.t_end(),
    })
}

/// Solve the slaved linear least squares for fixed nonlinear parameters.
/// Returns the exact minimizer of the log-space sum of squared errors.
pub fn slave_linear(
    point: &NonlinearPoint,
    series: &PriceSeries,
    mode: SlavingMode,
) -> Result<SlavedLinear> {
    let prep = prepare(series)?;
    let (slaved, _residuals) = solve_prepared(&prep, point, mode)?;
    Ok(slaved)
}

/// Linear solve plus the per-point log-space residuals `y - model`.
pub(crate) fn solve_prepared(
    prep: &Prepared,
    point: &NonlinearPoint,
    mode: SlavingMode,
) -> Result<(SlavedLinear, Vec<f64>)> {
    let n = prep.times.len();
    if !(point.tc > prep.t_end) {
        return Err(Error::TimeNotBeforeCritical {
            t: prep.t_end,
            tc: point.tc,
        });
    }
    let k = match mode {
        SlavingMode::ThreeLinear => 3,
        SlavingMode::FourLinear => 4,
    };
    if n < k {
        return Err(Error::SeriesTooShort { len: n, min: k });
    }

    let mut design = DMatrix::zeros(n, k);
    for (i, &t) in prep.times.iter().enumerate() {
        let tau = point.tc - t;
        let ln_tau = tau.ln();
        let g = (point.m * ln_tau).exp();
        let theta = point.omega * ln_tau;
        design[(i, 0)] = 1.0;
        design[(i, 1)] = g;
        match mode {
            SlavingMode::ThreeLinear => {
                let phi = point.phi.unwrap_or(0.0);
                design[(i, 2)] = g * (theta - phi).cos();
            }
            SlavingMode::FourLinear => {
                design[(i, 2)] = g * theta.cos();
                design[(i, 3)] = g * theta.sin();
            }
        }
    }
    if design.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSystem);
    }

    let y = DVector::from_column_slice(&prep.y);
    let qr = design.clone().qr();
    let r = qr.r();
    let mut max_diag: f64 = 0.0;
    let mut min_diag = f64::MAX;
    for i in 0..k {
        let d = r[(i, i)].abs();
        max_diag = max_diag.max(d);
        min_diag = min_diag.min(d);
    }
    if !(max_diag > 0.0) || min_diag <= 1e-12 * max_diag {
        return Err(Error::DegenerateSystem);
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::DegenerateSystem)?;

    let fitted = design * &beta;
    let residuals: Vec<f64> = prep
        .y
        .iter()
        .zip(fitted.iter())
        .map(|(yi, fi)| yi - fi)
        .collect();
    let sse = residuals.iter().map(|r| r * r).sum::<f64>();
    if !sse.is_finite() {
        return Err(Error::DegenerateSystem);
    }

    let slaved = match mode {
        SlavingMode::ThreeLinear => SlavedLinear {
            a: beta[0],
            b: beta[1],
            c: beta[2],
            phi: point.phi.unwrap_or(0.0),
            sse,
        },
        SlavingMode::FourLinear => {
            let (c1, c2) = (beta[2], beta[3]);
            SlavedLinear {
                a: beta[0],
                b: beta[1],
                c: c1.hypot(c2),
                phi: wrap_phase(c2.atan2(c1)),
                sse,
            }
        }
    };
    Ok((slaved, residuals))
}

/// Residuals under the configured objective metric, derived from the
/// log-space residuals: the normalized price residual is
/// `(p - exp(model))/p = 1 - exp(-(ln p - model))`.
pub(crate) fn objective_residuals(kind: ObjectiveKind, log_residuals: &[f64]) -> Vec<f64> {
    match kind {
        ObjectiveKind::LogRmse => log_residuals.to_vec(),
        ObjectiveKind::NormalizedPriceRmse => {
            log_residuals.iter().map(|r| 1.0 - (-r).exp()).collect()
        }
    }
}

pub(crate) fn rmse_of(residuals: &[f64]) -> f64 {
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

/// Objective value at a nonlinear point; any domain or degeneracy failure
/// maps to `+inf` so search algorithms can treat it as a worst case.
pub(crate) fn eval_objective(
    prep: &Prepared,
    point: &NonlinearPoint,
    mode: SlavingMode,
    kind: ObjectiveKind,
) -> f64 {
    match solve_prepared(prep, point, mode) {
        Ok((_, log_residuals)) => rmse_of(&objective_residuals(kind, &log_residuals)),
        Err(_) => f64::INFINITY,
    }
}

/// Full parameter set from a nonlinear point and its slaved linear part.
pub(crate) fn assemble_params(point: &NonlinearPoint, slaved: &SlavedLinear) -> LpplParams {
    LpplParams {
        tc: point.tc,
        m: point.m,
        omega: point.omega,
        phi: slaved.phi,
        a: slaved.a,
        b: slaved.b,
        c: slaved.c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::generate_reference;
    use approx::assert_relative_eq;

    fn reference() -> LpplParams {
        LpplParams {
            tc: 300.0,
            m: 0.7,
            omega: 10.0,
            phi: 1.0,
            a: 10.0,
            b: -0.1,
            c: 0.02,
        }
    }

    fn true_point(mode: SlavingMode) -> NonlinearPoint {
        let p = reference();
        NonlinearPoint {
            tc: p.tc,
            m: p.m,
            omega: p.omega,
            phi: match mode {
                SlavingMode::ThreeLinear => Some(p.phi),
                SlavingMode::FourLinear => None,
            },
        }
    }

    #[test]
    fn recovers_linear_parameters_on_noiseless_data() {
        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        for mode in [SlavingMode::FourLinear, SlavingMode::ThreeLinear] {
            let slaved = slave_linear(&true_point(mode), &series, mode).unwrap();
            assert_relative_eq!(slaved.a, 10.0, epsilon = 1e-8);
            assert_relative_eq!(slaved.b, -0.1, epsilon = 1e-8);
            assert_relative_eq!(slaved.c, 0.02, epsilon = 1e-8);
            assert_relative_eq!(slaved.phi, 1.0, epsilon = 1e-6);
            assert!(slaved.sse < 1e-16, "sse = {}", slaved.sse);
        }
    }

    #[test]
    fn constant_series_gives_zero_amplitudes() {
        let series =
            PriceSeries::new(1.0, 1.0, vec![10.0; 60], crate::simulate::Scale::Log).unwrap();
        let point = NonlinearPoint {
            tc: 100.0,
            m: 0.5,
            omega: 8.0,
            phi: None,
        };
        let slaved = slave_linear(&point, &series, SlavingMode::FourLinear).unwrap();
        assert_relative_eq!(slaved.a, 10.0, epsilon = 1e-9);
        assert!(slaved.b.abs() < 1e-9);
        assert!(slaved.c.abs() < 1e-9);
    }

    #[test]
    fn slaved_solution_is_a_local_sse_minimum() {
        // Perturbing any slaved linear parameter strictly increases the sse.
        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        let noisy = crate::simulate::add_noise(
            &series,
            &crate::simulate::NoiseSpec {
                kind: crate::simulate::NoiseKind::Gaussian,
                relative_std: 0.05,
                seed: 5,
            },
        )
        .unwrap();
        let prep = prepare(&noisy).unwrap();
        let point = true_point(SlavingMode::FourLinear);
        let (slaved, _) = solve_prepared(&prep, &point, SlavingMode::FourLinear).unwrap();

        let sse_for = |a: f64, b: f64, c1: f64, c2: f64| {
            prep.times
                .iter()
                .zip(prep.y.iter())
                .map(|(&t, &y)| {
                    let ln_tau = (point.tc - t).ln();
                    let g = (point.m * ln_tau).exp();
                    let theta = point.omega * ln_tau;
                    let model = a + b * g + g * (c1 * theta.cos() + c2 * theta.sin());
                    (y - model).powi(2)
                })
                .sum::<f64>()
        };
        let c1 = slaved.c * slaved.phi.cos();
        let c2 = slaved.c * slaved.phi.sin();
        let base = sse_for(slaved.a, slaved.b, c1, c2);
        assert_relative_eq!(base, slaved.sse, max_relative = 1e-10);
        for delta in [-1e-3, 1e-3] {
            assert!(sse_for(slaved.a * (1.0 + delta), slaved.b, c1, c2) > base);
            assert!(sse_for(slaved.a, slaved.b * (1.0 + delta), c1, c2) > base);
            assert!(sse_for(slaved.a, slaved.b, c1 + delta.abs(), c2) > base);
            assert!(sse_for(slaved.a, slaved.b, c1, c2 + delta.abs()) > base);
        }
    }

    #[test]
    fn near_zero_exponent_is_degenerate() {
        // m ~ 0 makes the power column collinear with the intercept.
        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        let point = NonlinearPoint {
            tc: 300.0,
            m: 1e-14,
            omega: 10.0,
            phi: None,
        };
        assert!(matches!(
            slave_linear(&point, &series, SlavingMode::FourLinear),
            Err(Error::DegenerateSystem)
        ));
    }

    #[test]
    fn objective_zero_at_truth_and_infinite_inside_window() {
        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        let prep = prepare(&series).unwrap();
        let kind = ObjectiveKind::LogRmse;
        let at_truth = eval_objective(
            &prep,
            &true_point(SlavingMode::FourLinear),
            SlavingMode::FourLinear,
            kind,
        );
        assert!(at_truth < 1e-10, "objective at truth = {at_truth}");

        let inside = NonlinearPoint {
            tc: 200.0,
            m: 0.7,
            omega: 10.0,
            phi: None,
        };
        assert!(eval_objective(&prep, &inside, SlavingMode::FourLinear, kind).is_infinite());
    }

    #[test]
    fn normalized_objective_agrees_with_log_to_first_order() {
        // For small residuals 1 - exp(-r) = r + O(r^2).
        let residuals: Vec<f64> = (0..100).map(|i| 1e-4 * ((i as f64 * 0.37).sin())).collect();
        let log_rmse = rmse_of(&objective_residuals(ObjectiveKind::LogRmse, &residuals));
        let norm_rmse = rmse_of(&objective_residuals(
            ObjectiveKind::NormalizedPriceRmse,
            &residuals,
        ));
        assert_relative_eq!(log_rmse, norm_rmse, max_relative = 1e-3);
    }
}
