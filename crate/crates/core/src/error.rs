use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented invariant.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A negative moment met an empty box.
    #[error("order {order} is undefined: weight at index {index} is zero")]
    ZeroWeight { order: f64, index: usize },

    #[error("root solve did not converge for order {order} (residual {residual:e})")]
    NonConvergence { order: f64, residual: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("power-law fit failed: {0}")]
    Fit(String),

    #[error("no scaling range found: {0}")]
    Detection(String),

    #[error("inversion failed: {0}")]
    Inversion(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short name used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::ZeroWeight { .. } => "domain",
            Error::NonConvergence { .. } => "numerical",
            Error::Resource(_) => "resource",
            Error::Fit(_) => "fit",
            Error::Detection(_) => "detection",
            Error::Inversion(_) => "inversion",
            Error::Degenerate(_) => "degenerate",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
