//! Numerical kernels for abstract semilinear parabolic systems whose
//! attractors resist regular finite-dimensional projections.
//!
//! The crate is `no_std` + `alloc` by default-off of the `std` feature. It
//! contains no IO: configuration, file formats and the command line live in
//! the companion `manelab` crate.
//!
//! Layout:
//!
//! * [`spectral`]: eigenvalue sequences, Sobolev norms, spectral gaps and the
//!   two-site linearization spectra.
//! * [`cutoffs`]: mollifier-based bump functions, cut-off families, the
//!   periodic drive and the planar cone system.
//! * [`floquet`]: the time-periodic rotation operator, its Poincaré map as a
//!   weighted shift, and the log-space iterate bookkeeping built on it.
//! * [`sim`]: coupled planar/parabolic integration, kicks, analytic point
//!   clouds and the log-Lipschitz modulus.
//! * [`geometry`]: covering numbers, box-counting and (log-)doubling
//!   estimates on log-coordinate point clouds.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
pub mod eigen;
pub mod fit;
pub mod logreal;
pub mod modevec;
pub mod quad;

pub mod cutoffs;
pub mod floquet;
pub mod geometry;
pub mod integrate;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use logreal::LogReal;
pub use modevec::LogModeVector;
