//! Time grids, seeded Brownian paths, Wiener-integral sums, and quadrature.
//!
//! Grids cluster geometrically toward zero (the transform drift integrand is
//! singular there) and run with a uniform step over the body. The origin is
//! implicit: every path starts at `X_0 = 0` and the first grid time is
//! `eps0 > 0`. Randomness is counter-based: one master seed plus a path index
//! select an independent ChaCha stream, so ensembles are bit-reproducible
//! under any thread schedule.

pub mod quad;

mod grid;
mod ito;
pub(crate) mod sample;

pub use grid::TimeGrid;
pub use ito::{ito_integral, ito_with_weights, RunningIntegral, WienerWeights};
pub use sample::{ensemble, sample_brownian, sample_brownian_from, PathRole, RngSpec, SamplePath};
