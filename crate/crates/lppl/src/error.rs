use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} is not before the critical time {tc}")]
    TimeNotBeforeCritical { t: f64, tc: f64 },

    #[error("crash loss fraction must lie in (0, 1), got {0}")]
    InvalidKappa(f64),

    #[error("power-law exponent m must be nonzero for amplitude conversion")]
    ZeroExponent,

    #[error("interval {name} is empty or not finite: [{lo}, {hi}]")]
    InvalidInterval {
        name: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("t_c lower bound {lo} must strictly exceed the window end {t2}")]
    TcBoundInsideWindow { lo: f64, t2: f64 },

    #[error("window [{t0}, {t_end}] touches the critical time {tc}")]
    WindowTouchesCritical { t0: f64, t_end: f64, tc: f64 },

    #[error("operation requires a log-scale series")]
    NotLogScale,

    #[error("series values must be positive to take logs (index {index}, value {value})")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),

    #[error("invalid SDE parameters: {0}")]
    InvalidSde(String),

    #[error("integration step too coarse: h(t)*dt = {hdt} > 1 at t = {t}")]
    StepTooCoarse { t: f64, hdt: f64 },

    #[error("invalid integration interval [{t1}, {t2}] for critical time {tc}")]
    InvalidIntegrationInterval { t1: f64, t2: f64, tc: f64 },

    #[error("series has {len} points, fewer than the minimum window of {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear subsystem is degenerate for the given nonlinear parameters")]
    DegenerateSystem,

    #[error("residual AR(1) coefficient {rho} is non-stationary (|rho| >= 1)")]
    NonStationaryResiduals { rho: f64 },

    #[error("block length {block_len} exceeds the window length {window}")]
    BlockTooLong { block_len: usize, window: usize },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("every window failed to calibrate: {0}")]
    AllWindowsFailed(String),

    #[error("row {line}: {msg}")]
    MalformedRow { line: u64, msg: String },

    #[error("row {line}: non-positive price {value}")]
    NonPositivePrice { line: u64, value: f64 },

    #[error("row {line}: dates/indices out of order")]
    UnorderedDates { line: u64 },

    #[error("column {0:?} not found in CSV header")]
    MissingColumn(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable numeric code, shared with the C API.
    pub fn code(&self) -> i32 {
        match self {
            Error::TimeNotBeforeCritical { .. } => 1,
            Error::InvalidKappa(_) => 2,
            Error::ZeroExponent => 3,
            Error::InvalidInterval { .. } => 4,
            Error::TcBoundInsideWindow { .. } => 5,
            Error::WindowTouchesCritical { .. } => 6,
            Error::NotLogScale => 7,
            Error::NonPositiveValue { .. } => 8,
            Error::InvalidNoise(_) => 9,
            Error::InvalidSde(_) => 10,
            Error::StepTooCoarse { .. } => 11,
            Error::InvalidIntegrationInterval { .. } => 12,
            Error::SeriesTooShort { .. } => 13,
            Error::InvalidConfig(_) => 14,
            Error::DegenerateSystem => 15,
            Error::NonStationaryResiduals { .. } => 16,
            Error::BlockTooLong { .. } => 17,
            Error::EmptyEnsemble => 18,
            Error::AllWindowsFailed(_) => 19,
            Error::MalformedRow { .. } => 20,
            Error::NonPositivePrice { .. } => 21,
            Error::UnorderedDates { .. } => 22,
            Error::MissingColumn(_) => 23,
            Error::Io { .. } => 24,
            Error::Json(_) => 25,
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::AllWindowsFailed(_)
                | Error::DegenerateSystem
                | Error::Io { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
