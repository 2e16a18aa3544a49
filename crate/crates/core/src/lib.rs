//! Spectral diagnostics and constructive shadowing for invertible operators.
//!
//! Two operator families are supported: dense matrices on `C^d` and weighted
//! bilateral shifts on `l^2(Z)` with a single weight crossover. For both the
//! crate decides hyperbolicity, uniform expansivity and the shadowing
//! property, and for dense hyperbolic matrices it builds shadowing orbits from
//! the Riesz projector onto the spectrum inside the unit disc.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod projector;
pub mod random;
pub mod shadowing;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{Matrix, C64};
pub use operators::{
    DenseOperator, Direction, Operator, OperatorSpec, ShiftOperator, SupportedVector, Vector,
};
pub use projector::{ContourConfig, LaurentTable};
pub use spectral::{SpectralReport, Verdicts};
