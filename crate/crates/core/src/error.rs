use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument {value} is outside the domain of {what} (requires {requirement})")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        requirement: String,
    },

    #[error("integral does not converge: {0}")]
    NonIntegrable(String),

    #[error("target mean {target} is not above the base mean {base_mean}")]
    BelowMean { target: f64, base_mean: f64 },

    #[error("root finder failed: {0}")]
    RootNotFound(String),

    #[error("gibbs chain infeasible at step {step}: conditional mean {mean} is not above the base mean {base_mean}")]
    InfeasibleChain {
        step: usize,
        mean: f64,
        base_mean: f64,
    },

    #[error("fourier oracle failed: {0}")]
    OracleFailure(String),

    #[error("slab acceptance rate {rate:.3e} is below {minimum:.1e}; raise delta or the sample count")]
    InsufficientAcceptance { rate: f64, minimum: f64 },

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
