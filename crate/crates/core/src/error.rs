//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by path operations, differentiation, and pricing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("negative duration {dt}")]
    NegativeDuration { dt: f64 },

    #[error("horizon exceeded: path of length {t_end} cannot grow past {horizon}")]
    HorizonExceeded { t_end: f64, horizon: f64 },

    #[error("{op} requires a continuous path (jump stamps present)")]
    JumpsUnsupported { op: &'static str },

    #[error("jump inside the reversed window [{s}, {t}]")]
    JumpInWindow { s: f64, t: f64 },

    #[error("window [{t}, {end}] exceeds the path length {t_end}")]
    WindowExceedsPath { t: f64, end: f64, t_end: f64 },

    #[error("restriction bounds [{s}, {t}] outside [0, {t_end}]")]
    BadRestriction { s: f64, t: f64, t_end: f64 },

    #[error("signature depth mismatch: {left} vs {right}")]
    DepthMismatch { left: usize, right: usize },

    #[error("signature depth {depth} above hard cap {max}")]
    DepthTooLarge { depth: usize, max: usize },

    #[error("partition level {level} outside configured range {min}..={max}")]
    LevelOutOfRange { level: u32, min: u32, max: u32 },

    #[error("derivative order {order} above configured maximum {max} for finite differences")]
    OrderTooHigh { order: usize, max: usize },

    #[error("Malliavin order {k} above configured maximum {max}")]
    MalliavinOrder { k: usize, max: usize },

    #[error("finite-difference step underflow (step {step})")]
    StepUnderflow { step: f64 },

    #[error("evaluation times must be sorted within [0, {horizon}]")]
    UnorderedTimes { horizon: f64 },

    #[error("nested quadrature supports order <= {max}, got {k}")]
    QuadratureOrder { k: usize, max: usize },

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("running maximum {m} below spot {x}")]
    RunningMaxBelowSpot { m: f64, x: f64 },

    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
