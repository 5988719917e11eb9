//! Tilt stability of stationary points of `φ(X) + θ(λ(X))` on symmetric matrices,
//! where φ is smooth and θ is a symmetric polyhedral function.

pub mod bundle;
pub mod cli;
pub mod cone;
pub mod error;
pub mod ext_real;
pub mod linalg;
pub mod polyfun;
pub mod sampling;
pub mod spectral;
pub mod tilt;

pub use error::{Error, Result};
pub use linalg::SymMatrix;
