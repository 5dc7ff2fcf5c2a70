//! Tomographic forward models and filtered back projection when the
//! attenuation coefficient carries a Gaussian Markov stochastic component.
//!
//! The crate covers:
//! - parallel-beam geometry on a disk domain and deterministic line
//!   integrals ([`geometry`]);
//! - the colored-noise attenuation model, exact path sampling and the
//!   closed-form exponential averages behind the effective coefficient
//!   `mu* = mubar - h` ([`noise`]);
//! - SPECT / PET / X-ray projectors, their noise averages, the projection
//!   correction and Monte Carlo validation ([`forward`]);
//! - the first-order scattering correction ([`scatter`]);
//! - inversion of the exponential Radon transform by filtered back
//!   projection ([`recon`]);
//! - the analytic point-source distortion theory: G-factor, K_n integral
//!   family and the predicted reconstruction ([`pointsrc`]).

pub mod bessel;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod noise;
pub mod pointsrc;
pub mod quad;
pub mod recon;
pub mod scatter;
pub mod sinogram;

pub use error::{Error, Result};
