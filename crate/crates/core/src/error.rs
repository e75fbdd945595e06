use thiserror::Error;

/// Errors raised by the chart calculus, the transforms and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rank error: {0}")]
    Rank(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("grid resolution too small: {0}")]
    Resolution(String),

    #[error("metric ill-conditioned at point {index} {coords:?}: {detail}")]
    Conditioning {
        index: usize,
        coords: Vec<f64>,
        detail: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("coefficient not symmetric with respect to the metric at point {index} {coords:?} (defect {defect:.3e})")]
    Symmetry {
        index: usize,
        coords: Vec<f64>,
        defect: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("transform inconsistency: {0}")]
    TransformInconsistency(String),

    #[error("singular linear system at pivot {pivot}: conditioning estimate {estimate:.3e}")]
    SingularSystem { pivot: usize, estimate: f64 },

    #[error("instability: non-finite solution at time step {step}")]
    Instability { step: usize },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("mode error: {0}")]
    Mode(String),

    #[error("excluded exponent p = {0}")]
    ExcludedExponent(f64),

    #[error("compatibility violated: {0}")]
    Compatibility(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("invalid spec at `{path}`: {message}")]
    Schema { path: String, message: String },
}

impl Error {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
