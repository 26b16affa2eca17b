use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("derivative of order {order} is not supported for {kind} potentials")]
    UnsupportedDerivative { order: usize, kind: &'static str },

    #[error("multi-cut equilibrium not supported: {0}")]
    MultiCutUnsupported(String),

    #[error("quadrature resolution insufficient at k = {k}: {detail}")]
    Resolution { k: usize, detail: String },

    #[error("potential failed validation: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
