use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("stencil error: {0}")]
    Stencil(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("tail tolerance violated: {0}")]
    Tail(String),
    #[error("not a diffeomorphism: {0}")]
    NotDiffeo(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("warp too large: {0}")]
    WarpTooLarge(String),
    #[error("no admissible perturbation site: {0}")]
    NoSite(String),
    #[error("order constraint violated: {0}")]
    OrderConstraint(String),
    #[error("bad bump choice: {0}")]
    BadBumpChoice(String),
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("zero length path")]
    ZeroLength,
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
