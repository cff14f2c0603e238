use thiserror::Error;

/// Errors produced by the model, test-function, generator, simulation and
/// estimation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(
        "quadrature did not converge: estimate {estimate:e}, error estimate {error:e} \
         after {subdivisions} subdivisions"
    )]
    Quadrature {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("no jump mass above {0}")]
    NoJump(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

