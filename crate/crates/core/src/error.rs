//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("parametric divergence at omega = {omega}: |{quantity}| = {magnitude:e}")]
    ParametricDivergence {
        omega: f64,
        quantity: &'static str,
        magnitude: f64,
    },

    #[error("singular linear system at omega = {omega}")]
    SingularSystem { omega: f64 },

    #[error("integration window expansion failed at half-width {window:e}")]
    WindowExpansion { window: f64 },

    #[error("quadrature did not reach tolerance: estimated relative error {estimate:e}")]
    QuadratureTolerance { estimate: f64 },

    #[error("singular network between {lo} and {hi} rad/s")]
    SingularNetwork { lo: f64, hi: f64 },

    #[error("unresolved mode pair between {lo} and {hi} rad/s")]
    UnresolvedPair { lo: f64, hi: f64 },

    #[error("no cavity mode in band [{lo}, {hi}] rad/s")]
    NoCavityMode { lo: f64, hi: f64 },

    #[error("cavity mode at an avoided crossing (self-participation {p_a:.4})")]
    AvoidedCrossing { p_a: f64 },

    #[error("target unreachable: {0}")]
    TargetUnreachable(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter { .. } => 1,
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
