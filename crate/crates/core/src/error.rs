use thiserror::Error;

/// Errors raised when inputs violate a model or protocol contract.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("charging axis must be a unit vector (|x| = {norm})")]
    AxisNotUnit { norm: f64 },
    #[error("control bounds are inverted: lambda_min = {min} > lambda_max = {max}")]
    InvertedBounds { min: f64, max: f64 },
    #[error("Bloch vector has norm {norm} > 1")]
    NotAState { norm: f64 },
    #[error("protocol duration must be non-negative and finite, got {tau}")]
    BadDuration { tau: f64 },
    #[error("protocol needs {expected} levels for {switches} switch times, got {got}")]
    LevelCount {
        switches: usize,
        expected: usize,
        got: usize,
    },
    #[error("switch time {time} at index {index} is outside (0, tau) or not strictly increasing")]
    SwitchOrder { index: usize, time: f64 },
    #[error("level {level} at segment {index} lies outside [{min}, {max}]")]
    LevelOutOfBounds {
        index: usize,
        level: f64,
        min: f64,
        max: f64,
    },
    #[error("infeasible optimization spec: {0}")]
    Infeasible(&'static str),
    #[error("target norm {target} does not match initial norm {initial}")]
    NormMismatch { initial: f64, target: f64 },
    #[error("target not reached within tau cap {cap}")]
    Unreachable { cap: f64 },
    #[error("spectra have different lengths ({rho} vs {h})")]
    SpectrumLength { rho: usize, h: usize },
    #[error("populations do not form a probability vector (sum {sum})")]
    NotProbability { sum: f64 },
    #[error("invalid parameter {name}: {reason}")]
    Parameter {
        name: &'static str,
        reason: &'static str,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
