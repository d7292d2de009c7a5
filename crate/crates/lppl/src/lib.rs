//! Log-periodic power law (LPPL) bubble diagnostics.
//!
//! The crate covers the full pipeline: the deterministic LPPL curve and its
//! crash hazard rate ([`model`]), synthetic reference/noisy/jump-diffusion
//! series ([`simulate`]), robust calibration via linear-parameter slaving,
//! taboo search and damped least squares ([`calibrate`]), and probabilistic
//! forecasting of the critical time through window scans, residual replicas
//! and kernel density estimation ([`forecast`]).

// Guards like `!(tau > 0.0)` are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod benchmark;
pub mod calibrate;
pub mod error;
pub mod forecast;
pub mod ingest;
pub mod model;
pub mod run;
pub mod seeds;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{FitBounds, HazardParams, Interval, LpplParams, Qualification};
pub use simulate::{NoiseKind, NoiseSpec, PriceSeries, Scale, SdeParams};
