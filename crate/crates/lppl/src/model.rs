//! Deterministic first-order LPPL mathematics: the log-price curve, the crash
//! hazard rate it derives from, conversions between the two parameterizations,
//! and the constraint checks used to qualify a fit as a bubble.
//!
//! All operations here are pure functions of their inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven parameters of the log-price curve
/// `ln p(t) = A + B (tc-t)^m + C (tc-t)^m cos(omega ln(tc-t) - phi)`.
///
/// `tc` is the critical time in the same day unit as the series index; the
/// curve is only defined for `t < tc`. No range restrictions are enforced
/// here: fitting restrictions and bubble qualification live in [`FitBounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplParams {
    /// Critical time (days).
    pub tc: f64,
    /// Power-law exponent.
    pub m: f64,
    /// Angular log-frequency.
    pub omega: f64,
    /// Phase (radians).
    pub phi: f64,
    /// Asymptotic log-price level.
    pub a: f64,
    /// Power-law amplitude (log-price units, negative in a bubble).
    pub b: f64,
    /// Oscillation amplitude (log-price units).
    pub c: f64,
}

impl LpplParams {
    /// Log-price at time `t`. Errors for `t >= tc`.
    pub fn log_price(&self, t: f64) -> Result<f64> {
        let tau = self.tc - t;
        if !(tau > 0.0) {
            return Err(Error::TimeNotBeforeCritical { t, tc: self.tc });
        }
        let ln_tau = tau.ln();
        let tau_m = (self.m * ln_tau).exp();
        Ok(self.a + tau_m * (self.b + self.c * (self.omega * ln_tau - self.phi).cos()))
    }

    /// The non-negative-hazard margin `b := -B m - |C| sqrt(m^2 + omega^2)`.
    ///
    /// `b >= 0` is equivalent to a non-negative crash hazard rate and to a
    /// non-decreasing expected log-price before `tc`.
    pub fn hazard_margin(&self) -> f64 {
        -self.b * self.m - self.c.abs() * (self.m * self.m + self.omega * self.omega).sqrt()
    }

    /// Convert to the hazard-rate parameterization for a crash loss fraction
    /// `kappa` in (0, 1). Inverse of [`HazardParams::to_lppl`].
    ///
    /// Integrating `d ln E[p]/dt = kappa h(t)` with the hazard form gives
    /// `int tau^(m-1) cos(w ln tau - phi') dtau
    ///    = tau^m cos(w ln tau - phi' - atan2(w, m)) / sqrt(m^2 + w^2)`,
    /// so the log-price phase is `phi = phi' + atan2(w, m)` while the
    /// amplitudes pick up the factors `B = -kappa B'/m` and
    /// `C = -kappa C'/sqrt(m^2 + w^2)`.
    pub fn to_hazard(&self, kappa: f64) -> Result<HazardParams> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidKappa(kappa));
        }
        if self.m == 0.0 {
            return Err(Error::ZeroExponent);
        }
        let root = (self.m * self.m + self.omega * self.omega).sqrt();
        Ok(HazardParams {
            tc: self.tc,
            m: self.m,
            omega: self.omega,
            b_prime: -self.m * self.b / kappa,
            c_prime: -self.c * root / kappa,
            phi_prime: self.phi - self.omega.atan2(self.m),
            kappa,
        })
    }
}

/// Crash hazard rate parameters:
/// `h(t) = B' (tc-t)^(m-1) + C' (tc-t)^(m-1) cos(omega ln(tc-t) - phi')`.
///
/// An accelerating hazard requires `m < 1` and `B' > 0`; neither is enforced
/// at the type level so that non-qualifying parameter sets stay representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardParams {
    pub tc: f64,
    pub m: f64,
    pub omega: f64,
    /// Hazard power-law amplitude (1/day).
    pub b_prime: f64,
    /// Hazard oscillation amplitude (1/day).
    pub c_prime: f64,
    /// Hazard phase (radians).
    pub phi_prime: f64,
    /// Crash loss fraction in (0, 1).
    pub kappa: f64,
}

impl HazardParams {
    /// Hazard rate at time `t` (1/day). Diverges as `t -> tc` for `m < 1`;
    /// errors for `t >= tc`.
    pub fn rate(&self, t: f64) -> Result<f64> {
        let tau = self.tc - t;
        if !(tau > 0.0) {
            return Err(Error::TimeNotBeforeCritical { t, tc: self.tc });
        }
        let ln_tau = tau.ln();
        let tau_m1 = ((self.m - 1.0) * ln_tau).exp();
        Ok(tau_m1 * (self.b_prime + self.c_prime * (self.omega * ln_tau - self.phi_prime).cos()))
    }

    /// Convert back to the log-price parameterization. Inverse of
    /// [`LpplParams::to_hazard`].
    pub fn to_lppl(&self) -> Result<LpplParams> {
        if self.m == 0.0 {
            return Err(Error::ZeroExponent);
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::InvalidKappa(self.kappa));
        }
        let root = (self.m * self.m + self.omega * self.omega).sqrt();
        Ok(LpplParams {
            tc: self.tc,
            m: self.m,
            omega: self.omega,
            phi: self.phi_prime + self.omega.atan2(self.m),
            a: 0.0,
            b: -self.kappa * self.b_prime / self.m,
            c: -self.kappa * self.c_prime / root,
        })
    }
}

/// A closed interval used for parameter bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(name: &'static str, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInterval { name, lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Map a normalized coordinate in [0, 1] into the interval.
    pub fn denormalize(&self, u: f64) -> f64 {
        self.lo + u * self.width()
    }
}

/// Fitting restrictions for the nonlinear parameters plus the qualification
/// switches. Restricting the search and qualifying a bubble are distinct
/// concerns: a fit may be produced under loose bounds and then rejected by
/// the qualification filters, or vice versa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub tc: Interval,
    pub m: Interval,
    pub omega: Interval,
    pub phi: Interval,
    /// Qualification: require m in (0, 1).
    pub enforce_m_range: bool,
    /// Qualification: require B < 0.
    pub enforce_b_negative: bool,
    /// Qualification: require the hazard margin to be non-negative.
    pub enforce_hazard: bool,
}

impl FitBounds {
    /// Default bounds for a fitting window `[t1, t2]`:
    /// `tc` in `(t2, t2 + (t2 - t1)]`, `m` in `[0.01, 0.99]`, `omega` in
    /// `[2, 25]` (the fundamental log-frequency range), `phi` in `[0, 2pi)`.
    pub fn for_window(t1: f64, t2: f64) -> Self {
        let window = t2 - t1;
        FitBounds {
            // The lower bound must strictly exceed t2; half a day keeps the
            // power-law singularity clear of the last observation.
            tc: Interval {
                lo: t2 + 0.5,
                hi: t2 + window,
            },
            m: Interval { lo: 0.01, hi: 0.99 },
            omega: Interval { lo: 2.0, hi: 25.0 },
            phi: Interval {
                lo: 0.0,
                hi: std::f64::consts::TAU - 1e-9,
            },
            enforce_m_range: true,
            enforce_b_negative: true,
            enforce_hazard: true,
        }
    }

    /// Variant with the exponent unconstrained in `[-5, 5]`, for diagnostic
    /// fits where an out-of-range m is itself the signal of interest.
    pub fn diagnostic_for_window(t1: f64, t2: f64) -> Self {
        let mut bounds = Self::for_window(t1, t2);
        bounds.m = Interval { lo: -5.0, hi: 5.0 };
        bounds.enforce_m_range = false;
        bounds
    }

    /// Nonlinear parameter interval by index: tc, m, omega, phi.
    pub fn interval(&self, index: usize) -> Interval {
        match index {
            0 => self.tc,
            1 => self.m,
            2 => self.omega,
            3 => self.phi,
            _ => panic!("nonlinear parameter index out of range: {index}"),
        }
    }

    /// Check interval sanity and that the tc bound clears the window end.
    pub fn validate(&self, t2: f64) -> Result<()> {
        for (name, iv) in [
            ("tc", self.tc),
            ("m", self.m),
            ("omega", self.omega),
            ("phi", self.phi),
        ] {
            Interval::new(name, iv.lo, iv.hi)?;
        }
        if self.tc.lo <= t2 {
            return Err(Error::TcBoundInsideWindow { lo: self.tc.lo, t2 });
        }
        Ok(())
    }

    /// Evaluate the qualification criteria for a parameter set. Never fails;
    /// criteria not enforced by the bounds are reported as skipped.
    pub fn qualify(&self, params: &LpplParams) -> Qualification {
        let mut checks = Vec::with_capacity(4);

        let m_ok = params.m > 0.0 && params.m < 1.0;
        checks.push(Check {
            name: "m_range".into(),
            enforced: self.enforce_m_range,
            passed: m_ok,
            detail: if m_ok {
                format!("m = {} in (0,1)", params.m)
            } else {
                "m outside (0,1)".into()
            },
        });

        let b_ok = params.b < 0.0;
        checks.push(Check {
            name: "b_negative".into(),
            enforced: self.enforce_b_negative,
            passed: b_ok,
            detail: if b_ok {
                format!("B = {} < 0", params.b)
            } else {
                format!("B = {} not negative", params.b)
            },
        });

        let margin = params.hazard_margin();
        checks.push(Check {
            name: "hazard_margin".into(),
            enforced: self.enforce_hazard,
            passed: margin >= 0.0,
            detail: format!("b = {margin}"),
        });

        let mut range_failures = Vec::new();
        if !self.tc.contains(params.tc) {
            range_failures.push("tc");
        }
        if !self.m.contains(params.m) {
            range_failures.push("m");
        }
        if !self.omega.contains(params.omega) {
            range_failures.push("omega");
        }
        if !self.phi.contains(wrap_phase(params.phi)) {
            range_failures.push("phi");
        }
        checks.push(Check {
            name: "parameter_ranges".into(),
            enforced: true,
            passed: range_failures.is_empty(),
            detail: if range_failures.is_empty() {
                "all parameters within bounds".into()
            } else {
                format!("outside bounds: {}", range_failures.join(", "))
            },
        });

        let passed = checks.iter().all(|c| !c.enforced || c.passed);
        Qualification { checks, passed }
    }
}

/// Wrap a phase into [0, 2pi).
pub fn wrap_phase(phi: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let wrapped = phi.rem_euclid(tau);
    if wrapped.is_nan() {
        phi
    } else {
        wrapped
    }
}

/// One qualification criterion outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Whether this criterion counts toward the overall verdict.
    pub enforced: bool,
    pub passed: bool,
    pub detail: String,
}

/// Per-criterion outcomes plus the overall verdict (over enforced criteria).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qualification {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Qualification {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}
