//! Second moments of stochastic wave and heat equations driven by Gaussian
//! noise that is fractional in time and homogeneous in space.
//!
//! Two independent estimators are provided: a truncated Wiener-chaos series
//! ([`chaos`]) and a Feynman–Kac estimator over planar Poisson configurations
//! ([`fkmc`]). [`bounds`] evaluates the explicit moment bounds and constants.

pub mod error;
pub mod equation;
pub mod estimate;
pub mod fkmc;
pub mod chaos;
pub mod bounds;
pub mod green;
pub mod noise;
pub mod quad;
pub mod rng;
pub mod special;
pub mod stats;

pub use equation::{EquationKind, InitialData};
pub use error::{Error, Result};
pub use noise::{NoiseSpec, SpatialKernel};
