//! Laplace spectra of closed surfaces, thin cross-cap and handle surgery,
//! and first-eigenvalue maximization in a conformal class.
//!
//! Metrics are intrinsic: a [`geometry::SurfaceMesh`] carries the
//! combinatorics and a [`geometry::DiscreteMetric`] the edge lengths, so
//! non-orientable quotients and cone points need no embedding.

pub mod analytic;
pub mod error;
pub mod geometry;
pub mod maximize;
pub mod spectral;
pub mod surgery;
pub mod verify;

pub use error::{Error, Result};
