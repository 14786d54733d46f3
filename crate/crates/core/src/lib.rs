//! Goursat-Volterra kernels and Wiener-measure-preserving Volterra transforms.
//!
//! A Goursat kernel factorizes as `k(t,s) = phi*(t) . f(s)` on `s <= t`, where
//! `f` is a vector of n locally square-integrable functions on `(0, inf)` and
//! `phi(t) = alpha_t . f(t)` with `alpha_t` the inverse of the Gramian
//! `m_t = int_0^t f f* ds`. Such kernels are self-reproducing, which is
//! equivalent to the associated Volterra transform
//!
//! ```text
//! Sigma(X)_t = X_t - int_0^t int_0^u k(u,v) dX_v du
//! ```
//!
//! mapping Brownian motion to Brownian motion. This crate provides
//!
//! - [`basis`]: reproducing bases, Gramians, their inverses, the limit
//!   `alpha_inf`, and orthonormal systems;
//! - [`kernel`]: kernel construction (generic, Muntz, order one) and numerical
//!   checks of the reproduction identities;
//! - [`paths`]: singularity-aware time grids, seeded Brownian sampling,
//!   Wiener-integral sums, and adaptive quadrature;
//! - [`transform`]: the Volterra transform, its iterates, the Laguerre closed
//!   form, the anticipative particular solution of the singular SDE, and
//!   recovery of the attached random vector;
//! - [`bridge`]: f-generalized bridges and the full solution family of the
//!   singular SDE;
//! - [`harmonic`]: space-time harmonic functions and tilted-measure sampling;
//! - [`stats`]: Monte Carlo estimators and the statistical surrogate tests;
//! - [`suite`]: the end-to-end verification suite with one result per claim.

pub mod basis;
pub mod bridge;
pub mod error;
pub mod harmonic;
pub mod kernel;
mod linalg;
pub mod paths;
pub mod stats;
pub mod suite;
pub mod transform;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
