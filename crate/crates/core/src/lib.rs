//! Numerical laboratory for restricted projections in three dimensions: Frenet frames of
//! non-degenerate spherical curves, Cantor fixtures and covering numbers, frequency planks,
//! wave-packet fields with high-low splits, and decoupling measurements.

pub mod curve;
pub mod decoupling;
pub mod error;
pub mod field;
pub mod fractal;
pub mod nets;
pub mod lab;
pub mod planks;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
