use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Trace,
    Solver,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{source_name}: row {row}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        message: String,
    },

    #[error("trace error: {0}")]
    Trace(String),

    #[error("state (p = {p} Pa, T = {t} K) is out of table")]
    OutOfTable { p: f64, t: f64 },

    #[error("undefined exponent: {0}")]
    UndefinedExponent(String),

    #[error("segment balance singular in pipe segment {segment}; use finer segmentation")]
    SegmentBalanceSingular { segment: char },

    #[error("no discharge event: valve lift never exceeds {threshold:e} m")]
    NoDischargeEvent { threshold: f64 },

    #[error("cannot phase-align: vane signal span {span:e} m is below the noise floor {floor:e} m")]
    CannotAlign { span: f64, floor: f64 },

    #[error(
        "chamber solver did not converge at step {step} (alpha = {alpha_deg:.3} deg) \
         after {iterations} iterations; worst residual {residual:.3e}"
    )]
    NonConvergence {
        step: usize,
        alpha_deg: f64,
        iterations: usize,
        residual: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain(_)
            | Error::Config(_)
            | Error::OutOfTable { .. }
            | Error::UndefinedExponent(_)
            | Error::SegmentBalanceSingular { .. } => ErrorCategory::Config,
            Error::Parse { .. }
            | Error::Trace(_)
            | Error::NoDischargeEvent { .. }
            | Error::CannotAlign { .. }
            | Error::Csv(_) => ErrorCategory::Trace,
            Error::NonConvergence { .. } => ErrorCategory::Solver,
            Error::Io(_) | Error::Json(_) => ErrorCategory::Io,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
