//! Numerical laboratory for the cone-coordinate construction of singular
//! solutions to the incompressible Euler equations.
//!
//! The numerical core is generic over [`Real`] (`f32`/`f64`); the aliases at
//! the crate root fix `f64`, which every tolerance in the test suite assumes.

pub mod cli;
pub mod dual;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod interp;
pub mod kernels;
pub mod limits;
pub mod optimize;
pub mod quad;
pub mod scalar;
pub mod scheme;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ConeChart = geometry::ConeChart<f64>;
