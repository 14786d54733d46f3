//! Grid sums for Wiener integrals `int f dX` with deterministic integrands.
//!
//! Increments attach at the left (non-anticipating), while the deterministic
//! integrand is evaluated at interval midpoints: for a deterministic `f`
//! there is no Stratonovich correction, and midpoint evaluation removes the
//! O(delta) bias that left evaluation would feed into the transform drift.
//! The first interval is `(0, eps0)`, so its integrand value is `f(eps0/2)`,
//! a midpoint surrogate for the singular origin.

use std::sync::Arc;

use nalgebra::DVector;

use super::grid::TimeGrid;
use super::sample::SamplePath;
use crate::basis::FunctionBasis;

/// Integrand values at the midpoints of a grid, ready to sum against any
/// path on that grid. Build once per (integrand, grid) and share across an
/// ensemble.
#[derive(Debug, Clone)]
pub struct WienerWeights {
    n: usize,
    /// Point-major: `vals[k * n + i]` is component `i` at midpoint `k`.
    vals: Vec<f64>,
}

impl WienerWeights {
    /// Basis functions evaluated at every interval midpoint.
    pub fn for_basis(basis: &FunctionBasis, grid: &TimeGrid) -> Self {
        Self::from_fn(grid, basis.n(), |u| basis.eval_vector(u))
    }

    /// Arbitrary vector integrand evaluated at every interval midpoint.
    pub fn from_fn<F>(grid: &TimeGrid, n: usize, f: F) -> Self
    where
        F: Fn(f64) -> DVector<f64>,
    {
        let mut vals = Vec::with_capacity(grid.len() * n);
        for k in 0..grid.len() {
            let v = f(grid.midpoint(k));
            debug_assert_eq!(v.len(), n);
            vals.extend_from_slice(v.as_slice());
        }
        WienerWeights { n, vals }
    }

    /// Weights from already evaluated point-major values.
    pub fn from_values(n: usize, vals: Vec<f64>) -> Self {
        assert_eq!(vals.len() % n, 0);
        WienerWeights { n, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.vals[k * self.n..(k + 1) * self.n]
    }
}

/// The running vector `I_{t_k} = int_0^{t_k} f dX` on a grid.
#[derive(Debug, Clone)]
pub struct RunningIntegral {
    pub grid: Arc<TimeGrid>,
    n: usize,
    /// Point-major cumulative sums.
    vals: Vec<f64>,
}

impl RunningIntegral {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.vals[k * self.n..(k + 1) * self.n]
    }

    pub fn vector_at(&self, k: usize) -> DVector<f64> {
        DVector::from_column_slice(self.at(k))
    }

    /// Value at a grid time.
    pub fn at_time(&self, t: f64) -> Option<DVector<f64>> {
        self.grid.index_of(t).map(|k| self.vector_at(k))
    }

    pub fn final_vector(&self) -> DVector<f64> {
        self.vector_at(self.grid.len() - 1)
    }
}

/// Wiener sums of precomputed midpoint weights against a path's increments.
pub fn ito_with_weights(weights: &WienerWeights, path: &SamplePath) -> RunningIntegral {
    let n = weights.n();
    let m = path.len();
    let mut vals = Vec::with_capacity(n * m);
    let mut acc = vec![0.0f64; n];
    let mut prev = 0.0f64;
    for k in 0..m {
        let dx = path.values[k] - prev;
        prev = path.values[k];
        let w = weights.at(k);
        for i in 0..n {
            acc[i] += w[i] * dx;
        }
        vals.extend_from_slice(&acc);
    }
    RunningIntegral {
        grid: path.grid.clone(),
        n,
        vals,
    }
}

/// `int_0^{t_k} f dX` for every `k`, with `f` the given basis.
pub fn ito_integral(basis: &FunctionBasis, path: &SamplePath) -> RunningIntegral {
    let weights = WienerWeights::for_basis(basis, &path.grid);
    ito_with_weights(&weights, path)
}
