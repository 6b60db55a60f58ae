use thiserror::Error;

/// Errors raised by the analysis library. Each variant names the module that
/// produced it so CLI messages stay traceable.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: domain error: {message}")]
    Domain {
        module: &'static str,
        message: String,
    },

    #[error("{module}: resource limit exceeded: {message}")]
    ResourceLimit {
        module: &'static str,
        message: String,
    },

    #[error("cocycle: numeric overflow after {steps} factors; use the log-scaled profile operations instead")]
    NumericOverflow { steps: usize },

    #[error("{module}: singular restriction (smallest singular value {sigma_min:e})")]
    Singular {
        module: &'static str,
        sigma_min: f64,
    },

    #[error("certifier: ill-conditioned subspace selection (relative singular gap {gap:e} at index {k})")]
    IllConditioned { k: usize, gap: f64 },

    #[error("certifier: injectivity violation: {0}")]
    Injectivity(String),

    #[error("periodic_data: eigen-solver did not converge on orbit {word}")]
    EigenNonConvergence { word: String },

    #[error("certifier: conflicting diagnostics at index {k}: {message}")]
    DiagnosticsConflict { k: usize, message: String },

    #[error("sft_base: internal invariant violated: {0}")]
    Invariant(String),

    #[error("config: {key}: {message}")]
    Config { key: String, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(module: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
