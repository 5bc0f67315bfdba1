use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("eigensolver did not converge after {restarts} restarts (worst residual {residual:.3e} eV)")]
    NoConvergence { restarts: usize, residual: f64 },

    #[error("training configuration {config}: {source}")]
    Training {
        config: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
