//! Sample paths and counter-based random streams.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::grid::TimeGrid;

/// What a discretized path represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathRole {
    Brownian,
    Transformed,
    Bridge,
    SdeSolution,
}

/// A process sampled on a grid; the value at time 0 is 0 by convention.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub grid: Arc<TimeGrid>,
    pub values: Vec<f64>,
    pub role: PathRole,
}

impl SamplePath {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>, role: PathRole) -> Self {
        assert_eq!(grid.len(), values.len(), "grid/value length mismatch");
        SamplePath { grid, values, role }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a grid time (panics if `t` is off-grid; use
    /// `grid.index_of` for fallible lookup).
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self
            .grid
            .index_of(t)
            .unwrap_or_else(|| panic!("time {t} is not a grid point"));
        self.values[idx]
    }

    /// Restriction to the coarse grid this path's refined grid came from.
    /// The refined grid interleaves midpoints, so the coarse values sit at
    /// odd indices.
    pub fn restrict_to(&self, coarse: &Arc<TimeGrid>) -> SamplePath {
        assert_eq!(
            self.grid.len(),
            2 * coarse.len(),
            "not a midpoint refinement"
        );
        let values: Vec<f64> = (0..coarse.len()).map(|k| self.values[2 * k + 1]).collect();
        for (k, &t) in coarse.times().iter().enumerate() {
            debug_assert_eq!(self.grid.times()[2 * k + 1], t);
        }
        SamplePath::new(coarse.clone(), values, self.role)
    }

    /// Restriction to times `<= t` (a grid point).
    pub fn truncated(&self, t: f64) -> crate::Result<SamplePath> {
        let grid = self.grid.truncated(t)?;
        let values = self.values[..grid.len()].to_vec();
        Ok(SamplePath::new(grid, values, self.role))
    }
}

/// Master seed plus the path-index stream derivation. Identical
/// `(seed, index)` pairs produce bit-identical streams on any thread.
#[derive(Debug, Clone, Copy)]
pub struct RngSpec {
    pub master_seed: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64) -> Self {
        RngSpec { master_seed }
    }

    /// Independent substream for one path.
    pub fn stream(&self, path_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(path_index);
        rng
    }
}

/// Draw one Brownian path: independent centered Gaussian increments with
/// variance equal to each interval width (the first interval is `(0, eps0)`).
pub fn sample_brownian(grid: &Arc<TimeGrid>, spec: &RngSpec, path_index: u64) -> SamplePath {
    let mut rng = spec.stream(path_index);
    sample_brownian_from(grid, &mut rng)
}

/// As [`sample_brownian`] but drawing from an already positioned stream.
pub fn sample_brownian_from(grid: &Arc<TimeGrid>, rng: &mut ChaCha8Rng) -> SamplePath {
    let mut values = Vec::with_capacity(grid.len());
    let mut x = 0.0;
    for k in 0..grid.len() {
        let z: f64 = StandardNormal.sample(rng);
        x += z * grid.width(k).sqrt();
        values.push(x);
    }
    SamplePath::new(grid.clone(), values, PathRole::Brownian)
}

/// Map path indices `0..n` through `f` in parallel, preserving order, so the
/// result is independent of the thread schedule.
pub fn ensemble<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}
