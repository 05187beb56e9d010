//! Numerical laboratory for fractional Fokker-Planck equations
//! `d_t f = Delta^{alpha/2} f + div(E f)` with polynomially confining drift.

pub mod error;
pub mod evolution;
pub mod fft;
pub mod functionals;
pub mod grid;
pub mod linalg;
pub mod operators;
pub mod rates;
pub mod special;
pub mod steady;

pub use error::{Error, Result};
pub use grid::{build_grid, integrate, weight_field, Field, Grid, Weight};
pub use operators::{Exterior, ForceField, GeneratorMatrix, Method, OperatorConfig, Which};
