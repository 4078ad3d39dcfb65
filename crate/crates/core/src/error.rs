use thiserror::Error;

/// Errors raised by the numerical routines and experiment drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("power-law fit needs at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("power-law fit sample at n = {n} is zero or non-finite")]
    DegenerateSample { n: usize },

    #[error("sample indices must be strictly increasing")]
    UnorderedSamples,

    #[error("hypergeometric denominator parameter {c} hits a pole at term {k}")]
    HypergeometricPole { c: f64, k: usize },

    #[error("tridiagonal eigen-solve did not converge for a {size}-point rule")]
    EigenSolve { size: usize },

    #[error("non-finite sample f({x}) = {value}")]
    NonFinite { x: f64, value: f64 },

    #[error("Sobolev norm of B_{n} is not positive ({value})")]
    NonPositiveNorm { n: usize, value: f64 },

    #[error("degree {n} exceeds the basis capacity {n_max}")]
    DegreeOutOfRange { n: usize, n_max: usize },

    #[error("unknown test function '{0}'")]
    UnknownFunction(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}

pub type Result<T> = std::result::Result<T, Error>;
