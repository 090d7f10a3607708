pub mod dyson;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod quadrature;
pub mod resolvent;
pub mod selftest;
pub mod spectra;
pub mod streaming;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Closed-form phase-space function `(x, v) -> value`.
pub type PhaseFn<'a> = &'a (dyn Fn(geometry::Vec2, geometry::Vec2) -> C64 + Sync);
