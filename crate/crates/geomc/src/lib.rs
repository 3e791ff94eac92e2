//! Monte Carlo sampling on embedded manifolds.
//!
//! Proposals alternate half-step velocity kicks with exact geodesic flow, so
//! trajectories stay on the constraint surface to machine precision and the
//! accept/reject step only has to correct for integration error in the
//! potential. The supported geometries are spheres, orthonormal frames,
//! rotations stored as unit quaternions, and the simplex and open unit ball
//! through sphere reparameterizations.
//!
//! Module map:
//!
//! - [`manifold`]: geometry primitives — geodesic flow, tangent projection,
//!   constraint checks, tangent-space Gaussians.
//! - [`targets`]: unnormalized log-densities with ambient-space gradients.
//! - [`sampler`]: the geodesic sampler itself, plus parallel tempering.
//! - [`baseline`]: independence and rejection samplers used as references.
//! - [`diagnostics`]: effective sample size, Kolmogorov-Smirnov tests, and
//!   moment comparisons for validating chains.

pub mod baseline;
pub mod diagnostics;
pub mod error;
pub mod manifold;
pub mod sampler;
pub mod targets;

pub use error::GmcError;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, GmcError>;
