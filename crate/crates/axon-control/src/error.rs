use thiserror::Error;

/// Errors produced by the model, kernel, and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate characteristic roots (a^2 + 4*D*g ~ 0): {0}")]
    DegenerateRoots(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("kernel series did not converge within {depth} terms (last term norm {last_term_norm})")]
    KernelNonConvergence { depth: usize, last_term_norm: f64 },

    #[error("domain exceeded: l = {l} is beyond the kernel table cap l_bar = {l_bar}")]
    DomainExceeded { l: f64, l_bar: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
