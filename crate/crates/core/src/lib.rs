//! Simulation and bound-checking toolkit for dissipative stochastic
//! reaction-diffusion equations on `(0, 1)` driven by Gaussian and
//! compensated Poisson noise.
//!
//! The crate is split into a spectral layer ([`spectral`]), noise
//! primitives ([`noise`]), the Galerkin time stepper ([`integrator`]),
//! closed-form and numerically evaluated rate functions ([`rates`]),
//! empirical transport and concentration statistics ([`transport`]) and an
//! experiment harness ([`harness`]) used by the command-line tool.

pub mod error;
pub mod harness;
pub mod integrator;
pub mod noise;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
