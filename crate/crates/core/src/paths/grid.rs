//! Singularity-aware time grids.

use std::sync::Arc;

use crate::error::Error;
use crate::Result;

/// A strictly increasing grid `eps0 = t_1 < ... < t_M` with a geometric
/// segment toward zero and an aligned uniform body. Time `0` is represented
/// implicitly (path value `0`). A grid may carry a coarser far section beyond
/// `t_end` up to `horizon` for anticipative integrals.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    times: Vec<f64>,
    eps0: f64,
    ratio: f64,
    delta: f64,
    t_end: f64,
    horizon: f64,
}

impl TimeGrid {
    /// Build a grid on `(0, t_end]`: the geometric section starts at `eps0`
    /// and grows by `ratio` until `0.01 t_end`, after which points sit at
    /// integer multiples of `delta` so common sampling times land exactly on
    /// the grid.
    pub fn singularity_aware(eps0: f64, ratio: f64, delta: f64, t_end: f64) -> Result<Arc<Self>> {
        if !(t_end > 0.0 && eps0 > 0.0 && eps0 < t_end) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < eps0 < t_end, got eps0 = {eps0}, t_end = {t_end}"
            )));
        }
        if !(ratio > 1.0) {
            return Err(Error::InvalidGrid(format!(
                "geometric ratio must exceed 1, got {ratio}"
            )));
        }
        if !(delta > 0.0 && delta < t_end) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < delta < t_end, got {delta}"
            )));
        }

        let geo_end = 0.01 * t_end;
        let mut times = vec![eps0];
        let mut t = eps0;
        while t * ratio < geo_end {
            t *= ratio;
            times.push(t);
        }

        let last_geo = *times.last().unwrap();
        let mut k = (last_geo / delta).floor() as u64 + 1;
        loop {
            let u = k as f64 * delta;
            if u >= t_end - 0.5 * delta {
                break;
            }
            if u > last_geo {
                times.push(u);
            }
            k += 1;
        }
        times.push(t_end);

        debug_assert!(times.windows(2).all(|w| w[1] > w[0]));
        Ok(Arc::new(TimeGrid {
            times,
            eps0,
            ratio,
            delta,
            t_end,
            horizon: t_end,
        }))
    }

    /// Default layout for a given end time: `eps0 = 1e-4 t_end`, ratio 1.2,
    /// `delta = t_end / 2000`.
    pub fn default_for(t_end: f64) -> Result<Arc<Self>> {
        TimeGrid::singularity_aware(1e-4 * t_end, 1.2, t_end / 2000.0, t_end)
    }

    /// Extend the grid past `t_end` with a coarser uniform step, up to
    /// `t_max`. Used for the anticipative integrals that need a long driver.
    pub fn extend_to(&self, t_max: f64, far_delta: f64) -> Result<Arc<Self>> {
        if !(t_max > self.t_end) {
            return Err(Error::InvalidGrid(format!(
                "horizon {t_max} must exceed the body end {}",
                self.t_end
            )));
        }
        if !(far_delta > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "far step must be positive, got {far_delta}"
            )));
        }
        let mut times = self.times.clone();
        let mut t = self.t_end + far_delta;
        while t < t_max - 0.5 * far_delta {
            times.push(t);
            t += far_delta;
        }
        times.push(t_max);
        Ok(Arc::new(TimeGrid {
            times,
            eps0: self.eps0,
            ratio: self.ratio,
            delta: self.delta,
            t_end: self.t_end,
            horizon: t_max,
        }))
    }

    /// Insert the midpoint of every interval, including `(0, eps0)`, halving
    /// both the uniform step and the first time. Original points survive
    /// exactly, so a path sampled on the refined grid restricts to this one.
    pub fn refined(&self) -> Arc<Self> {
        let mut times = Vec::with_capacity(2 * self.times.len());
        let mut prev = 0.0;
        for &t in &self.times {
            times.push(0.5 * (prev + t));
            times.push(t);
            prev = t;
        }
        Arc::new(TimeGrid {
            times,
            eps0: 0.5 * self.eps0,
            ratio: self.ratio,
            delta: 0.5 * self.delta,
            t_end: self.t_end,
            horizon: self.horizon,
        })
    }

    /// Grid restricted to times `<= t`, which must itself be a grid point.
    pub fn truncated(&self, t: f64) -> Result<Arc<Self>> {
        let idx = self.index_of(t).ok_or_else(|| {
            Error::InvalidGrid(format!("time {t} is not on the grid; cannot truncate"))
        })?;
        Ok(Arc::new(TimeGrid {
            times: self.times[..=idx].to_vec(),
            eps0: self.eps0,
            ratio: self.ratio,
            delta: self.delta,
            t_end: t,
            horizon: t,
        }))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// End of the fine body.
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Last grid time (equals `t_end` unless extended).
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Index of a grid point matching `t` to within `1e-9 max(1, |t|)`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let i = self.times.partition_point(|&x| x < t - tol);
        if i < self.times.len() && (self.times[i] - t).abs() <= tol {
            Some(i)
        } else {
            None
        }
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&x| x < t);
        if i == 0 {
            return 0;
        }
        if i >= self.times.len() {
            return self.times.len() - 1;
        }
        if (self.times[i] - t).abs() < (t - self.times[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    /// Midpoint of interval `k`, counting the implicit origin: interval 0 is
    /// `(0, t_1)`, interval `k` is `(t_k, t_{k+1})`.
    pub fn midpoint(&self, k: usize) -> f64 {
        let prev = if k == 0 { 0.0 } else { self.times[k - 1] };
        0.5 * (prev + self.times[k])
    }

    /// Width of interval `k` (same indexing as [`TimeGrid::midpoint`]).
    pub fn width(&self, k: usize) -> f64 {
        let prev = if k == 0 { 0.0 } else { self.times[k - 1] };
        self.times[k] - prev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_contains_round_times() {
        let g = TimeGrid::singularity_aware(1e-4, 1.2, 5e-4, 1.0).unwrap();
        for t in [0.25, 0.5, 0.75, 1.0] {
            assert!(g.index_of(t).is_some(), "missing {t}");
        }
        assert!(g.times().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.times()[0], 1e-4);
        assert_eq!(*g.times().last().unwrap(), 1.0);
    }

    #[test]
    fn refinement_keeps_original_points() {
        let g = TimeGrid::singularity_aware(1e-3, 1.3, 1e-2, 1.0).unwrap();
        let f = g.refined();
        assert_eq!(f.len(), 2 * g.len());
        for (k, &t) in g.times().iter().enumerate() {
            assert_eq!(f.times()[2 * k + 1], t);
        }
        assert_eq!(f.eps0(), 5e-4);
    }

    #[test]
    fn extension_reaches_horizon() {
        let g = TimeGrid::singularity_aware(1e-4, 1.2, 5e-4, 1.0).unwrap();
        let e = g.extend_to(10.0, 0.01).unwrap();
        assert_eq!(e.horizon(), 10.0);
        assert_eq!(e.t_end(), 1.0);
        assert!(e.index_of(1.0).is_some());
        assert_eq!(*e.times().last().unwrap(), 10.0);
    }

    #[test]
    fn truncation_requires_grid_point() {
        let g = TimeGrid::singularity_aware(1e-4, 1.2, 5e-4, 1.0).unwrap();
        assert!(g.truncated(0.5).is_ok());
        assert!(g.truncated(0.50012).is_err());
    }
}
