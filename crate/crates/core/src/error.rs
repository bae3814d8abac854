use thiserror::Error;

/// Errors raised by the library. Every variant records the `module::operation`
/// that produced it so batch front ends can report where a run failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: domain error: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("{op}: singularity: {detail}")]
    Singularity { op: &'static str, detail: String },

    #[error("{op}: invalid configuration: {detail}")]
    Config { op: &'static str, detail: String },

    #[error("{op}: image outside target annulus: {detail}")]
    Range { op: &'static str, detail: String },

    #[error("{op}: turning point reached at radius {radius}")]
    TurningPoint { op: &'static str, radius: f64 },

    #[error("{op}: boundary value problem infeasible: {detail}")]
    InfeasibleBvp { op: &'static str, detail: String },

    #[error("{op}: metric regime error: {detail}")]
    Regime { op: &'static str, detail: String },

    #[error("{op}: invalid initialization: {detail}")]
    Initialization { op: &'static str, detail: String },

    #[error("{op}: precondition violated: {detail}")]
    Precondition { op: &'static str, detail: String },

    #[error("{op}: parse error: {detail}")]
    Parse { op: &'static str, detail: String },

    #[error("{op}: i/o error: {source}")]
    Io {
        op: &'static str,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { op, detail: detail.into() }
    }

    pub(crate) fn config(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Config { op, detail: detail.into() }
    }

    pub(crate) fn regime(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Regime { op, detail: detail.into() }
    }

    pub(crate) fn precondition(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Precondition { op, detail: detail.into() }
    }

    pub(crate) fn parse(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Parse { op, detail: detail.into() }
    }

    /// The `module::operation` tag of the failing call.
    pub fn operation(&self) -> &'static str {
        match self {
            Error::Domain { op, .. }
            | Error::Singularity { op, .. }
            | Error::Config { op, .. }
            | Error::Range { op, .. }
            | Error::TurningPoint { op, .. }
            | Error::InfeasibleBvp { op, .. }
            | Error::Regime { op, .. }
            | Error::Initialization { op, .. }
            | Error::Precondition { op, .. }
            | Error::Parse { op, .. }
            | Error::Io { op, .. } => op,
        }
    }

    /// Process exit code used by the command line front end:
    /// 2 for configuration problems, 3 for numeric failures, 4 for regime errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Domain { .. }
            | Error::Range { .. }
            | Error::Precondition { .. }
            | Error::Parse { .. }
            | Error::Io { .. } => 2,
            Error::Singularity { .. } | Error::Initialization { .. } => 3,
            Error::TurningPoint { .. } | Error::InfeasibleBvp { .. } | Error::Regime { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
