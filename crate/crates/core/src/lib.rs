//! Gegenbauer-Sobolev orthonormal polynomials and their Fourier partial sums.
//!
//! The crate builds the orthonormal family `Q_n^α` for the inner product
//!
//! ```text
//! <f, g>_S = ∫ f g dμ_α + M (f(1)g(1) + f(-1)g(-1)) + N (f'(1)g'(1) + f'(-1)g'(-1))
//! ```
//!
//! from closed-form connection coefficients against classical Gegenbauer
//! polynomials, and provides partial sums, reproducing kernels, `W_p^α`
//! norms, operator-norm probes and the experiment drivers used by the
//! `gsobolev` command-line tool.

pub mod dd;
pub mod error;
pub mod experiments;
pub mod gegenbauer;
pub mod numerics;
pub mod operators;
pub mod probe;
pub mod quadrature;
pub mod reference;
pub mod sobolev;

pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, ExperimentReport, OutputFormat, Record, TestFunction};
pub use numerics::AsymptoticFit;
pub use quadrature::{build_rule, QuadRule};
pub use sobolev::{
    BoundaryData, ConnectionCoeffs, MassRegime, SobolevBasis, SobolevFunction, SobolevParams,
};
