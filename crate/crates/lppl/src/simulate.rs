//! Synthetic data generation: pure LPPL reference series, noisy benchmark
//! series, and Monte-Carlo jump-diffusion paths driven by the crash hazard.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HazardParams, LpplParams};

/// Whether series values are log-prices or raw prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Log,
    Raw,
}

/// A uniformly spaced price series. `values[i]` is observed at
/// `t0 + i * step`; daily data has `step = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub t0: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub scale: Scale,
    /// Crash times recorded by the jump-diffusion simulator, empty otherwise.
    #[serde(default)]
    pub crash_times: Vec<f64>,
}

impl PriceSeries {
    pub fn new(t0: f64, step: f64, values: Vec<f64>, scale: Scale) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("series must be nonempty".into()));
        }
        if !(step > 0.0 && step.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "invalid series frame: t0 = {t0}, step = {step}"
            )));
        }
        Ok(Self {
            t0,
            step,
            values,
            scale,
            crash_times: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of the i-th observation.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.step
    }

    /// Time of the last observation.
    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Values as log-prices, taking logs of a raw series.
    pub fn log_values(&self) -> Result<Vec<f64>> {
        match self.scale {
            Scale::Log => Ok(self.values.clone()),
            Scale::Raw => self
                .values
                .iter()
                .enumerate()
                .map(|(index, &value)| {
                    if value > 0.0 {
                        Ok(value.ln())
                    } else {
                        Err(Error::NonPositiveValue { index, value })
                    }
                })
                .collect(),
        }
    }

    /// Sub-series covering observation times within `[t1, t2]`.
    pub fn window(&self, t1: f64, t2: f64) -> Result<PriceSeries> {
        if !(t1 < t2) {
            return Err(Error::InvalidConfig(format!(
                "window start {t1} must precede end {t2}"
            )));
        }
        let first = ((t1 - self.t0) / self.step).ceil().max(0.0) as usize;
        let last = ((t2 - self.t0) / self.step).floor() as isize;
        if last < first as isize || first >= self.len() {
            return Err(Error::InvalidConfig(format!(
                "window [{t1}, {t2}] does not overlap the series"
            )));
        }
        let last = (last as usize).min(self.len() - 1);
        let mut sub = PriceSeries::new(
            self.time(first),
            self.step,
            self.values[first..=last].to_vec(),
            self.scale,
        )?;
        sub.crash_times = self
            .crash_times
            .iter()
            .copied()
            .filter(|&t| t >= t1 && t <= t2)
            .collect();
        Ok(sub)
    }
}

/// Noise distribution for the synthetic benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// Student t with four degrees of freedom, rescaled to unit variance.
    StudentT4,
}

/// Additive noise specification. The standard deviation is
/// `relative_std * max(log-price)` over the reference window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub relative_std: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_std > 0.0 && self.relative_std.is_finite()) {
            return Err(Error::InvalidNoise(format!(
                "relative_std must be positive, got {}",
                self.relative_std
            )));
        }
        Ok(())
    }
}

/// Jump-diffusion inputs: hazard-driven drift `kappa h(t)`, diffusion
/// volatility, crash loss fraction, integration step and initial price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeParams {
    pub hazard: HazardParams,
    /// Diffusion volatility per sqrt-day.
    pub sigma: f64,
    /// Crash loss fraction in (0, 1).
    pub kappa: f64,
    /// Integration step (days).
    pub dt: f64,
    /// Initial price (raw, positive).
    pub p0: f64,
}

impl SdeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidSde(format!("sigma = {}", self.sigma)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSde(format!("dt = {}", self.dt)));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::InvalidKappa(self.kappa));
        }
        if !(self.p0 > 0.0 && self.p0.is_finite()) {
            return Err(Error::InvalidSde(format!("p0 = {}", self.p0)));
        }
        Ok(())
    }
}

/// Noise-free LPPL log-price series of `n` daily points starting at `t0`.
pub fn generate_reference(params: &LpplParams, n: usize, t0: f64) -> Result<PriceSeries> {
    if n == 0 {
        return Err(Error::InvalidConfig("series must be nonempty".into()));
    }
    let t_end = t0 + (n - 1) as f64;
    if !(t_end < params.tc) {
        return Err(Error::WindowTouchesCritical {
            t0,
            t_end,
            tc: params.tc,
        });
    }
    let values = (0..n)
        .map(|i| params.log_price(t0 + i as f64))
        .collect::<Result<Vec<_>>>()?;
    PriceSeries::new(t0, 1.0, values, Scale::Log)
}

/// Add i.i.d. noise to a log-scale series. The target standard deviation is
/// `spec.relative_std` times the largest log-price in the series; Student-t
/// draws are rescaled by 1/sqrt(2) so the target is met exactly (the raw t4
/// variance is 2).
pub fn add_noise(series: &PriceSeries, spec: &NoiseSpec) -> Result<PriceSeries> {
    spec.validate()?;
    if series.scale != Scale::Log {
        return Err(Error::NotLogScale);
    }
    let max = series.values.iter().cloned().fold(f64::MIN, f64::max);
    let std = spec.relative_std * max;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = series.clone();
    match spec.kind {
        NoiseKind::Gaussian => {
            for v in &mut out.values {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += std * z;
            }
        }
        NoiseKind::StudentT4 => {
            let t4 = StudentT::new(4.0).expect("valid dof");
            let unit = std::f64::consts::FRAC_1_SQRT_2;
            for v in &mut out.values {
                let z: f64 = t4.sample(&mut rng);
                *v += std * unit * z;
            }
        }
    }
    Ok(out)
}

/// Euler path of the jump-diffusion in log space, starting at `t = 0`:
/// `d ln p = (kappa h(t) - sigma^2/2) dt + sigma sqrt(dt) Z + ln(1 - kappa) dj`.
///
/// At each step a crash fires with probability `h(t) dt`, multiplying the
/// price by `(1 - kappa)`; the path continues after a crash and every crash
/// time is recorded. Fails if `h(t) dt > 1` at any step.
pub fn simulate_jls(sde: &SdeParams, n: usize, seed: u64) -> Result<PriceSeries> {
    simulate_path(sde, n, seed, true)
}

/// Same dynamics conditioned on no crash occurring: the jump term is removed
/// while drift and diffusion are kept. Useful as the expected-price path and
/// for convergence checks against the closed-form curve.
pub fn simulate_jls_conditioned(sde: &SdeParams, n: usize, seed: u64) -> Result<PriceSeries> {
    simulate_path(sde, n, seed, false)
}

fn simulate_path(sde: &SdeParams, n: usize, seed: u64, with_jumps: bool) -> Result<PriceSeries> {
    sde.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("path must be nonempty".into()));
    }
    let horizon = (n - 1) as f64 * sde.dt;
    if !(horizon < sde.hazard.tc) {
        return Err(Error::WindowTouchesCritical {
            t0: 0.0,
            t_end: horizon,
            tc: sde.hazard.tc,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_dt = sde.dt.sqrt();
    let log_loss = (1.0 - sde.kappa).ln();
    let mut ln_p = sde.p0.ln();
    let mut values = Vec::with_capacity(n);
    let mut crash_times = Vec::new();
    values.push(sde.p0);

    for k in 0..n - 1 {
        let t = k as f64 * sde.dt;
        let h = sde.hazard.rate(t)?;
        let hdt = h * sde.dt;
        if hdt > 1.0 {
            return Err(Error::StepTooCoarse { t, hdt });
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        ln_p += (sde.kappa * h - 0.5 * sde.sigma * sde.sigma) * sde.dt + sde.sigma * sqrt_dt * z;
        if with_jumps {
            let u: f64 = rng.random();
            if u < hdt.max(0.0) {
                ln_p += log_loss;
                crash_times.push(t + sde.dt);
            }
        }
        values.push(ln_p.exp());
    }

    let mut series = PriceSeries::new(0.0, sde.dt, values, Scale::Raw)?;
    series.crash_times = crash_times;
    Ok(series)
}

/// Probability of at least one crash in `[t1, t2]`:
/// `1 - exp(-int h dt)`, with the hazard integrated numerically.
///
/// For `m > 0` the substitution `u = (tc - t)^m` removes the integrable
/// singularity at `tc`, so `t2 = tc` is allowed; for `m <= 0` the integral
/// only exists for `t2 < tc` and is computed in log-time-to-critical.
pub fn crash_probability(hazard: &HazardParams, t1: f64, t2: f64) -> Result<f64> {
    if !(t1 < t2 && t2 <= hazard.tc) {
        return Err(Error::InvalidIntegrationInterval {
            t1,
            t2,
            tc: hazard.tc,
        });
    }
    let tau1 = hazard.tc - t1;
    let tau2 = hazard.tc - t2;

    let integral = if hazard.m > 0.0 {
        // u = tau^m: int tau^(m-1) g(ln tau) dtau = (1/m) int g(ln(u)/m) du.
        let m = hazard.m;
        let u1 = tau1.powf(m);
        let u2 = tau2.powf(m);
        let f = |u: f64| {
            if u <= 0.0 {
                // The integrand is bounded; the u = 0 endpoint contributes
                // its power-law part only.
                return hazard.b_prime;
            }
            let ln_tau = u.ln() / m;
            hazard.b_prime + hazard.c_prime * (hazard.omega * ln_tau - hazard.phi_prime).cos()
        };
        adaptive_simpson(&f, u2, u1, 1e-12, 60) / m
    } else {
        if tau2 <= 0.0 {
            return Err(Error::InvalidIntegrationInterval {
                t1,
                t2,
                tc: hazard.tc,
            });
        }
        // v = ln tau: int tau^(m-1) g dtau = int e^(m v) g(v) dv.
        let f = |v: f64| {
            (hazard.m * v).exp()
                * (hazard.b_prime + hazard.c_prime * (hazard.omega * v - hazard.phi_prime).cos())
        };
        adaptive_simpson(&f, tau2.ln(), tau1.ln(), 1e-12, 60)
    };

    Ok(1.0 - (-integral).exp())
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if a == b {
        return 0.0;
    }
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1)
            + simpson_step(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn constant_hazard(rate: f64, tc: f64) -> HazardParams {
        HazardParams {
            tc,
            m: 1.0,
            omega: 10.0,
            b_prime: rate,
            c_prime: 0.0,
            phi_prime: 0.0,
            kappa: 0.2,
        }
    }

    #[test]
    fn reference_series_last_value_and_shape() {
        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        assert_eq!(series.len(), 240);
        assert_eq!(series.scale, Scale::Log);
        assert_relative_eq!(
            series.values[239],
            8.02411233553149827,
            max_relative = 1e-12
        );
        // Grid scan of the curve: the oscillation peaks above the endpoint,
        // so the window maximum sits at t = 213, not at the last point.
        let (argmax, max) = series
            .values
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |acc, (i, &v)| {
                    if v > acc.1 {
                        (i, v)
                    } else {
                        acc
                    }
                },
            );
        assert_eq!(argmax, 212);
        assert_relative_eq!(max, 8.15354193290304785, max_relative = 1e-12);
        assert!(max > series.values[239]);
    }

    #[test]
    fn reference_series_constant_without_amplitudes() {
        let params = LpplParams {
            b: 0.0,
            c: 0.0,
            ..reference()
        };
        let series = generate_reference(&params, 5, 0.0).unwrap();
        assert!(series.values.iter().all(|&v| v == 10.0));
    }

    #[test]
    fn reference_series_rejects_window_touching_tc() {
        assert!(matches!(
            generate_reference(&reference(), 300, 1.0),
            Err(Error::WindowTouchesCritical { .. })
        ));
        assert!(generate_reference(&reference(), 299, 1.0).is_ok());
    }

    #[test]
    fn noise_is_deterministic_under_seed() {
        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        let spec = NoiseSpec {
            kind: NoiseKind::Gaussian,
            relative_std: 0.05,
            seed: 9,
        };
        let a = add_noise(&series, &spec).unwrap();
        let b = add_noise(&series, &spec).unwrap();
        assert_eq!(a, b);
        let c = add_noise(&series, &NoiseSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_noise_matches_target_std() {
        let n = 1_000_000;
        let flat = PriceSeries::new(0.0, 1.0, vec![1.0; n], Scale::Log).unwrap();
        let spec = NoiseSpec {
            kind: NoiseKind::Gaussian,
            relative_std: 0.05,
            seed: 4242,
        };
        let noisy = add_noise(&flat, &spec).unwrap();
        let target = 0.05;
        let mean = noisy.values.iter().map(|v| v - 1.0).sum::<f64>() / n as f64;
        let var = noisy
            .values
            .iter()
            .map(|v| (v - 1.0 - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((var.sqrt() / target - 1.0).abs() < 0.005);
    }

    #[test]
    fn student_t4_noise_std_and_tails() {
        let n = 1_000_000;
        let flat = PriceSeries::new(0.0, 1.0, vec![1.0; n], Scale::Log).unwrap();
        let spec = NoiseSpec {
            kind: NoiseKind::StudentT4,
            relative_std: 0.05,
            seed: 77,
        };
        let noisy = add_noise(&flat, &spec).unwrap();
        let draws: Vec<f64> = noisy.values.iter().map(|v| v - 1.0).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var.sqrt() / 0.05 - 1.0).abs() < 0.01);
        let m4 = draws.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
        let excess_kurtosis = m4 / (var * var) - 3.0;
        assert!(
            excess_kurtosis > 3.0,
            "kurtosis too light: {excess_kurtosis}"
        );
    }

    #[test]
    fn jls_path_flat_without_drivers() {
        let sde = SdeParams {
            hazard: HazardParams {
                b_prime: 0.0,
                c_prime: 0.0,
                ..constant_hazard(0.0, 1e6)
            },
            sigma: 0.0,
            kappa: 0.2,
            dt: 1.0,
            p0: 100.0,
        };
        let path = simulate_jls(&sde, 50, 1).unwrap();
        assert!(path.crash_times.is_empty());
        for &v in &path.values {
            assert_relative_eq!(v, 100.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn jls_crash_fraction_matches_survival_function() {
        // Constant hazard h over horizon T: P(crash) = 1 - exp(-hT).
        let h = 0.01;
        let t_span = 100.0;
        let dt = 0.05;
        let n = (t_span / dt) as usize + 1;
        let sde = SdeParams {
            hazard: constant_hazard(h, 1e9),
            sigma: 0.0,
            kappa: 0.2,
            dt,
            p0: 1.0,
        };
        let paths = 2000;
        let crashed = (0..paths)
            .filter(|&i| {
                !simulate_jls(&sde, n, crate::seeds::derive_seed(11, i))
                    .unwrap()
                    .crash_times
                    .is_empty()
            })
            .count();
        let expected = 1.0 - (-h * t_span).exp();
        let se = (expected * (1.0 - expected) / paths as f64).sqrt();
        let observed = crashed as f64 / paths as f64;
        assert!(
            (observed - expected).abs() < 4.0 * se,
            "observed {observed}, expected {expected} (se {se})"
        );
    }

    #[test]
    fn jls_drift_only_path_is_nondecreasing_when_margin_passes() {
        let params = LpplParams {
            c: 0.002,
            ..reference()
        };
        assert!(params.hazard_margin() >= 0.0);
        let sde = SdeParams {
            hazard: params.to_hazard(0.2).unwrap(),
            sigma: 0.0,
            kappa: 0.2,
            dt: 0.1,
            p0: params.log_price(0.0).unwrap().exp(),
        };
        let path = simulate_jls_conditioned(&sde, 2000, 3).unwrap();
        for w in path.values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn jls_converges_to_curve_linearly_in_dt() {
        let params = reference();
        let hazard = params.to_hazard(0.25).unwrap();
        let p0 = params.log_price(0.0).unwrap().exp();
        let horizon = 240.0;
        let mut errors = Vec::new();
        for dt in [1.0, 0.1, 0.01] {
            let n = (horizon / dt) as usize + 1;
            let sde = SdeParams {
                hazard,
                sigma: 0.0,
                kappa: 0.25,
                dt,
                p0,
            };
            let path = simulate_jls_conditioned(&sde, n, 0).unwrap();
            let mut max_err: f64 = 0.0;
            for (i, &v) in path.values.iter().enumerate() {
                let t = i as f64 * dt;
                let exact = params.log_price(t).unwrap();
                max_err = max_err.max((v.ln() - exact).abs());
            }
            errors.push(max_err);
        }
        assert!(errors[1] < errors[0] / 5.0, "{errors:?}");
        assert!(errors[2] < errors[1] / 5.0, "{errors:?}");
    }

    #[test]
    fn jls_rejects_coarse_steps() {
        let sde = SdeParams {
            hazard: constant_hazard(2.0, 1e6),
            sigma: 0.0,
            kappa: 0.2,
            dt: 1.0,
            p0: 1.0,
        };
        assert!(matches!(
            simulate_jls(&sde, 10, 0),
            Err(Error::StepTooCoarse { .. })
        ));
    }

    #[test]
    fn crash_probability_zero_without_hazard() {
        let hazard = HazardParams {
            b_prime: 0.0,
            c_prime: 0.0,
            ..constant_hazard(0.0, 300.0)
        };
        assert_eq!(crash_probability(&hazard, 0.0, 300.0).unwrap(), 0.0);
    }

    #[test]
    fn crash_probability_constant_hazard_closed_form() {
        let hazard = constant_hazard(0.01, 1e6);
        let p = crash_probability(&hazard, 0.0, 100.0).unwrap();
        assert_relative_eq!(p, 1.0 - (-1.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn crash_probability_integrable_singularity() {
        // B' tau^(m-1) integrates to B' tau1^m / m; finite and below one for
        // a small amplitude even with t2 = tc.
        let hazard = HazardParams {
            tc: 300.0,
            m: 0.5,
            omega: 10.0,
            b_prime: 0.01,
            c_prime: 0.0,
            phi_prime: 0.0,
            kappa: 0.2,
        };
        let p = crash_probability(&hazard, 200.0, 300.0).unwrap();
        assert_relative_eq!(p, 0.181269246922018179, max_relative = 1e-9);
        assert!(p < 1.0);
    }

    #[test]
    fn crash_probability_matches_antiderivative_oracle() {
        // Independent closed form: the hazard antiderivative in tau is
        // B' tau^m / m + C' tau^m (m cos(theta) + w sin(theta)) / (m^2 + w^2)
        // with theta = w ln tau - phi'.
        let hazard = HazardParams {
            tc: 300.0,
            m: 0.7,
            omega: 10.0,
            b_prime: 0.35,
            c_prime: 0.2,
            phi_prime: 0.4,
            kappa: 0.2,
        };
        let anti = |tau: f64| {
            let theta = hazard.omega * tau.ln() - hazard.phi_prime;
            let tau_m = tau.powf(hazard.m);
            hazard.b_prime * tau_m / hazard.m
                + hazard.c_prime * tau_m * (hazard.m * theta.cos() + hazard.omega * theta.sin())
                    / (hazard.m * hazard.m + hazard.omega * hazard.omega)
        };
        for (t1, t2) in [(1.0, 240.0), (100.0, 299.5), (250.0, 299.999)] {
            let integral = anti(hazard.tc - t1) - anti(hazard.tc - t2);
            let expected = 1.0 - (-integral).exp();
            let got = crash_probability(&hazard, t1, t2).unwrap();
            assert_relative_eq!(got, expected, max_relative = 1e-8);
        }
    }

    #[test]
    fn crash_probability_monotone_and_bounded() {
        let params = LpplParams {
            c: 0.002,
            ..reference()
        };
        let hazard = params.to_hazard(0.2).unwrap();
        let mut prev = 0.0;
        for i in 1..=50 {
            let t2 = 1.0 + (hazard.tc - 1.0) * i as f64 / 50.0;
            let p = crash_probability(&hazard, 1.0, t2).unwrap();
            assert!(p >= prev - 1e-12, "not monotone at t2 = {t2}");
            assert!((0.0..1.0).contains(&p), "p = {p} out of range");
            prev = p;
        }
    }

    #[test]
    fn crash_probability_rejects_bad_interval() {
        let hazard = constant_hazard(0.01, 300.0);
        assert!(crash_probability(&hazard, 100.0, 100.0).is_err());
        assert!(crash_probability(&hazard, 100.0, 301.0).is_err());
    }

    #[test]
    fn window_extraction() {
        let series = generate_reference(&reference(), 240, 1.0).unwrap();
        let sub = series.window(21.0, 240.0).unwrap();
        assert_eq!(sub.t0, 21.0);
        assert_eq!(sub.len(), 220);
        assert_eq!(sub.values[0], series.values[20]);
        assert!(series.window(250.0, 240.0).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn crash_probability_bounded_and_monotone(
                b_prime in 0.0..0.05f64,
                m in 0.1..0.95f64,
                split in 0.1..0.9f64,
            ) {
                let hazard = HazardParams {
                    tc: 300.0,
                    m,
                    omega: 10.0,
                    b_prime,
                    c_prime: 0.0,
                    phi_prime: 0.0,
                    kappa: 0.2,
                };
                let mid = 1.0 + split * 299.0;
                let partial = crash_probability(&hazard, 1.0, mid).unwrap();
                let full = crash_probability(&hazard, 1.0, 300.0).unwrap();
                prop_assert!((0.0..1.0).contains(&partial));
                prop_assert!((0.0..1.0).contains(&full));
                prop_assert!(full >= partial - 1e-12);
            }

            #[test]
            fn seeded_paths_are_reproducible(seed: u64, sigma in 0.0..0.1f64) {
                let sde = SdeParams {
                    hazard: constant_hazard(0.005, 1e6),
                    sigma,
                    kappa: 0.2,
                    dt: 1.0,
                    p0: 1.0,
                };
                let a = simulate_jls(&sde, 50, seed).unwrap();
                let b = simulate_jls(&sde, 50, seed).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
