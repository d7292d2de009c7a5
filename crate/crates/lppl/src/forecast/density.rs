//! Kernel density estimation over fit-parameter samples.
//!
//! Default is a two-stage adaptive Gaussian kernel: a Silverman pilot fixes
//! the global bandwidth, then each sample gets a local bandwidth scaled by
//! the inverse square root of the pilot density at that sample. A plain
//! fixed-bandwidth Silverman estimate is available for comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bandwidth selection mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    Adaptive,
    FixedSilverman,
}

/// Grid and bandwidth configuration for a density estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityConfig {
    /// Grid range; when absent the grid covers the samples plus four
    /// bandwidths on each side.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: usize,
    pub mode: BandwidthMode,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            lo: None,
            hi: None,
            points: 512,
            mode: BandwidthMode::Adaptive,
        }
    }
}

/// Summary statistics of a sample; quantiles use the inverse-ECDF
/// definition, which is invariant under sample duplication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub count: usize,
}

/// A gridded probability density over candidate parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcDensity {
    pub grid: Vec<f64>,
    /// Non-negative density values; trapezoidal integral over the grid is 1.
    pub density: Vec<f64>,
    /// Pilot (or fixed) bandwidth.
    pub bandwidth: f64,
    /// Statistics of the underlying sample, not of the gridded density.
    pub summary: ParamStats,
    /// Set for single-sample or zero-spread inputs.
    pub degenerate: bool,
}

impl TcDensity {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// Mean and standard deviation of the gridded density.
    pub fn grid_moments(&self) -> (f64, f64) {
        let weighted: Vec<f64> = self
            .grid
            .iter()
            .zip(self.density.iter())
            .map(|(x, d)| x * d)
            .collect();
        let mean = trapezoid(&self.grid, &weighted);
        let second: Vec<f64> = self
            .grid
            .iter()
            .zip(self.density.iter())
            .map(|(x, d)| (x - mean) * (x - mean) * d)
            .collect();
        (mean, trapezoid(&self.grid, &second).max(0.0).sqrt())
    }

    /// Central interval [q_lo, q_hi] of the gridded density via the
    /// trapezoidal CDF.
    pub fn central_interval(&self, mass: f64) -> (f64, f64) {
        let tail = 0.5 * (1.0 - mass);
        (self.grid_quantile(tail), self.grid_quantile(1.0 - tail))
    }

    fn grid_quantile(&self, p: f64) -> f64 {
        let mut cum = 0.0;
        for i in 1..self.grid.len() {
            let dx = self.grid[i] - self.grid[i - 1];
            let slice = 0.5 * (self.density[i] + self.density[i - 1]) * dx;
            if cum + slice >= p {
                let need = p - cum;
                let frac = if slice > 0.0 { need / slice } else { 0.0 };
                return self.grid[i - 1] + frac * dx;
            }
            cum += slice;
        }
        *self.grid.last().expect("nonempty grid")
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (ys[0] + ys[1]) * (xs[1] - xs[0]))
        .sum()
}

pub(crate) fn stats_of(samples: &[f64]) -> ParamStats {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    ParamStats {
        mean,
        std: var.sqrt(),
        median: quantile_type1(&sorted, 0.5),
        q05: quantile_type1(&sorted, 0.05),
        q95: quantile_type1(&sorted, 0.95),
        count: n,
    }
}

/// Inverse-ECDF quantile of an ascending sample.
pub fn quantile_type1(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let idx = ((n as f64 * p).ceil() as usize).clamp(1, n);
    sorted[idx - 1]
}

const SQRT_TAU: f64 = 2.506_628_274_631_000_5;

/// Local bandwidth factors are clamped to this, keeping far outliers from
/// blowing up the tails.
const MAX_LOCAL_FACTOR: f64 = 10.0;

/// The pilot density is evaluated on this many nodes and interpolated at the
/// samples, keeping the adaptive pass O(n) instead of O(n^2).
const PILOT_NODES: usize = 512;

/// Gaussian-kernel density of a sample on a grid, normalized so the
/// trapezoidal integral over the grid is one.
pub fn density_of_samples(samples: &[f64], config: &DensityConfig) -> Result<TcDensity> {
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if config.points < 2 {
        return Err(Error::InvalidConfig(
            "density grid needs >= 2 points".into(),
        ));
    }
    let summary = stats_of(samples);
    let n = samples.len();
    let min = samples.iter().cloned().fold(f64::MAX, f64::min);
    let max = samples.iter().cloned().fold(f64::MIN, f64::max);

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_type1(&sorted, 0.75) - quantile_type1(&sorted, 0.25);
    let spread_scale = if iqr > 0.0 {
        summary.std.min(iqr / 1.349)
    } else {
        summary.std
    };
    let mut h0 = 0.9 * spread_scale * (n as f64).powf(-0.2);
    let degenerate = n == 1 || !(h0 > 0.0);
    if degenerate {
        h0 = match (config.lo, config.hi) {
            (Some(lo), Some(hi)) => (hi - lo) / (config.points - 1) as f64,
            _ => 1e-6 * summary.mean.abs().max(1.0),
        };
    }

    let local: Vec<f64> = match config.mode {
        BandwidthMode::FixedSilverman => vec![h0; n],
        BandwidthMode::Adaptive if degenerate => vec![h0; n],
        BandwidthMode::Adaptive => {
            // Pilot estimate on a coarse grid, interpolated at the samples.
            let lo = min - 4.0 * h0;
            let hi = max + 4.0 * h0;
            let dx = (hi - lo) / (PILOT_NODES - 1) as f64;
            let mut pilot = vec![0.0f64; PILOT_NODES];
            for (k, p) in pilot.iter_mut().enumerate() {
                let x = lo + k as f64 * dx;
                let mut acc = 0.0;
                for &s in samples {
                    let z = (x - s) / h0;
                    acc += (-0.5 * z * z).exp();
                }
                *p = acc / (n as f64 * h0 * SQRT_TAU);
            }
            let pilot_at = |x: f64| -> f64 {
                let pos = ((x - lo) / dx).clamp(0.0, (PILOT_NODES - 1) as f64);
                let k = (pos.floor() as usize).min(PILOT_NODES - 2);
                let frac = pos - k as f64;
                (pilot[k] * (1.0 - frac) + pilot[k + 1] * frac).max(1e-300)
            };
            let log_mean = samples.iter().map(|&s| pilot_at(s).ln()).sum::<f64>() / n as f64;
            let geo_mean = log_mean.exp();
            samples
                .iter()
                .map(|&s| {
                    let factor = (geo_mean / pilot_at(s)).sqrt().min(MAX_LOCAL_FACTOR);
                    h0 * factor
                })
                .collect()
        }
    };

    let h_max = local.iter().cloned().fold(0.0f64, f64::max);
    let lo = config.lo.unwrap_or(min - 4.0 * h_max);
    let hi = config.hi.unwrap_or(max + 4.0 * h_max);
    if !(lo < hi) {
        return Err(Error::InvalidConfig(format!(
            "density grid [{lo}, {hi}] is empty"
        )));
    }

    let dx = (hi - lo) / (config.points - 1) as f64;
    let grid: Vec<f64> = (0..config.points).map(|k| lo + k as f64 * dx).collect();
    let mut density = vec![0.0f64; config.points];
    for (&s, &h) in samples.iter().zip(local.iter()) {
        let weight = 1.0 / (n as f64 * h * SQRT_TAU);
        // A Gaussian kernel is negligible past eight bandwidths.
        let first = (((s - 8.0 * h) - lo) / dx).floor().max(0.0) as usize;
        let last = ((((s + 8.0 * h) - lo) / dx).ceil() as usize).min(config.points - 1);
        for k in first..=last {
            let z = (grid[k] - s) / h;
            density[k] += weight * (-0.5 * z * z).exp();
        }
    }

    let integral = trapezoid(&grid, &density);
    if !(integral > 0.0) {
        return Err(Error::InvalidConfig(
            "density mass does not overlap the requested grid".into(),
        ));
    }
    for d in &mut density {
        *d /= integral;
    }

    Ok(TcDensity {
        grid,
        density,
        bandwidth: h0,
        summary,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn quantiles_are_duplication_invariant() {
        let base = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let mut doubled = base.clone();
        doubled.extend_from_slice(&base);
        doubled.sort_by(f64::total_cmp);
        for p in [0.05, 0.25, 0.5, 0.75, 0.95] {
            assert_eq!(quantile_type1(&base, p), quantile_type1(&doubled, p));
        }
    }

    #[test]
    fn identical_samples_give_concentrated_density() {
        let samples = vec![300.0; 50];
        let d = density_of_samples(&samples, &DensityConfig::default()).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.summary.mean, 300.0);
        assert_eq!(d.summary.std, 0.0);
        assert_relative_eq!(d.integral(), 1.0, epsilon = 1e-6);
        let (mean, std) = d.grid_moments();
        assert_relative_eq!(mean, 300.0, epsilon = 1e-3);
        assert!(std < 1e-3);
    }

    #[test]
    fn single_sample_is_degenerate_but_summarized() {
        let d = density_of_samples(&[42.0], &DensityConfig::default()).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.summary.count, 1);
        assert_eq!(d.summary.mean, 42.0);
        assert_relative_eq!(d.integral(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn normal_samples_recover_moments() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let samples: Vec<f64> = (0..20_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        for mode in [BandwidthMode::Adaptive, BandwidthMode::FixedSilverman] {
            let cfg = DensityConfig {
                mode,
                ..DensityConfig::default()
            };
            let d = density_of_samples(&samples, &cfg).unwrap();
            assert!(d.density.iter().all(|&v| v >= 0.0));
            assert_relative_eq!(d.integral(), 1.0, epsilon = 1e-6);
            let (mean, std) = d.grid_moments();
            assert!(
                (mean - d.summary.mean).abs() < 0.02,
                "{mode:?}: mean {mean}"
            );
            assert!((std - d.summary.std).abs() < 0.02, "{mode:?}: std {std}");
        }
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(matches!(
            density_of_samples(&[], &DensityConfig::default()),
            Err(Error::EmptyEnsemble)
        ));
    }

    #[test]
    fn central_interval_brackets_the_mass() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let samples: Vec<f64> = (0..5000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                10.0 + 2.0 * z
            })
            .collect();
        let d = density_of_samples(&samples, &DensityConfig::default()).unwrap();
        let (lo, hi) = d.central_interval(0.9);
        assert!(lo < 10.0 && 10.0 < hi);
        // Roughly mean +/- 1.64 sd for a normal.
        assert!((lo - (10.0 - 1.645 * 2.0)).abs() < 0.3, "lo = {lo}");
        assert!((hi - (10.0 + 1.645 * 2.0)).abs() < 0.3, "hi = {hi}");
    }
}
