//! Spectral toolkit for the two-dimensional stochastic MHD system on the torus
//! driven by space-time white noise.
//!
//! The crate is organized bottom-up:
//! - [`spectral`]: Fourier fields, dealiased products, Leray projection.
//! - [`besov`]: Littlewood-Paley blocks, Besov norms, Bony paraproducts.
//! - [`noise`]: exact Ornstein-Uhlenbeck stochastic convolution.
//! - [`renorm`]: enhanced noise and the renormalization constant.
//! - [`dynamics`]: the decomposed solver with stopping-time frequency cutoffs.
//! - [`identities`]: numerical checks of algebraic identities.
//! - [`inequalities`]: empirical constants of Besov and paraproduct bounds.
//! - [`harness`]: configuration, experiment runners and output manifests.

pub mod besov;
pub mod checkpoint;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod identities;
pub mod inequalities;
pub mod noise;
pub mod renorm;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
