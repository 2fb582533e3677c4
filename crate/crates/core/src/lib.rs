//! Finite-dimensional Malliavin calculus for truncated jump SDEs whose jump
//! rate depends on the state.
//!
//! The random coordinates of a simulated path (the jump amplitudes and a
//! Gaussian regularizer) are lifted into forward-mode [`jet::Jet`]s, so every
//! path functional carries its exact partial derivatives. On top of that the
//! crate builds the weighted derivative, divergence and integration-by-parts
//! weights, Monte Carlo verification harnesses, Poisson functional tools and
//! the density-regularity calculator.

pub mod error;
pub mod estimators;
pub mod jet;
pub mod malliavin;
pub mod poisson;
pub mod quadrature;
pub mod regularity;
pub mod sde;

pub use error::{Error, Result};
