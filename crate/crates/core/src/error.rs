use thiserror::Error;

/// Errors raised by the solvers, simulator and optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {quantity} at grid point {index}")]
    Numerical {
        quantity: &'static str,
        index: usize,
    },

    #[error("invalid bracket: {0}")]
    Bracket(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
