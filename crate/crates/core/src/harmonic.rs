//! Space-time harmonic functions and tilted-measure sampling.
//!
//! For an endpoint law `nu` on `R^n`,
//!
//! ```text
//! h(t, x) = int exp( y*.x - (1/2) y*.m_t.y ) nu(dy)
//! ```
//!
//! makes `h(t, int_0^t f* dB)` a positive martingale with expectation one
//! whenever `alpha_inf = 0`. Discrete laws evaluate as an exact log-sum-exp;
//! Gaussian laws use the closed form
//! `det(I + m_t C)^{-1/2} exp( (1/2) x*.(m_t + C^{-1})^{-1}.x )` carried
//! through a reduced-rank factor of `C`, so singular covariances work
//! unchanged. All evaluation is in log space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::FunctionBasis;
use crate::error::Error;
use crate::linalg::psd_factor;
use crate::paths::{
    ito_with_weights, sample_brownian, PathRole, RngSpec, SamplePath, TimeGrid, WienerWeights,
};
use crate::stats::{mean_estimate, McEstimate};
use crate::Result;

/// Distribution of the endpoint vector.
#[derive(Debug, Clone)]
pub enum EndpointLaw {
    /// Finitely supported: points `y_k` with positive weights summing to one.
    Discrete {
        points: Vec<DVector<f64>>,
        weights: Vec<f64>,
    },
    /// Gaussian with the given mean and symmetric PSD covariance.
    Gaussian {
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    },
}

impl EndpointLaw {
    pub fn point_mass(y: DVector<f64>) -> Self {
        EndpointLaw::Discrete {
            points: vec![y],
            weights: vec![1.0],
        }
    }

    pub fn discrete(points: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidArgument(
                "discrete law needs matching, nonempty points and weights".into(),
            ));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidArgument(
                "discrete law points must share a dimension".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "discrete law weights must be positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(EndpointLaw::Discrete { points, weights })
    }

    pub fn gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::InvalidArgument(
                "covariance shape must match the mean".into(),
            ));
        }
        if (&cov - cov.transpose()).abs().max() > 1e-10 * cov.abs().max().max(1.0) {
            return Err(Error::InvalidArgument(
                "covariance must be symmetric".into(),
            ));
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        let min_eig = sym
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 * sym.abs().max().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "covariance must be positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(EndpointLaw::Gaussian { mean, cov: sym })
    }

    pub fn dim(&self) -> usize {
        match self {
            EndpointLaw::Discrete { points, .. } => points[0].len(),
            EndpointLaw::Gaussian { mean, .. } => mean.len(),
        }
    }

    /// Draw one endpoint vector.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        match self {
            EndpointLaw::Discrete { points, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (p, &w) in points.iter().zip(weights) {
                    acc += w;
                    if u <= acc {
                        return p.clone();
                    }
                }
                points.last().unwrap().clone()
            }
            EndpointLaw::Gaussian { mean, cov } => {
                let a = psd_factor(cov, None);
                let z = DVector::from_iterator(
                    a.ncols(),
                    (0..a.ncols()).map(|_| StandardNormal.sample(rng)),
                );
                mean + a * z
            }
        }
    }
}

/// `h(t, .)` prepared once: the Gramian and the law-specific pieces are
/// precomputed so ensembles evaluate cheaply.
#[derive(Debug, Clone)]
pub struct HarmonicFn {
    t: f64,
    prepared: Prepared,
}

#[derive(Debug, Clone)]
enum Prepared {
    Discrete {
        points: Vec<DVector<f64>>,
        /// `ln w_k - (1/2) y_k* m_t y_k`.
        offsets: Vec<f64>,
    },
    Gaussian {
        factor: DMatrix<f64>,
        /// Cholesky factor of `I + A* m_t A`.
        chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
        log_det_half: f64,
        mean: DVector<f64>,
        m_mean: DVector<f64>,
        /// `mean* m_t mean / 2`.
        mean_quad_half: f64,
    },
}

/// Prepare the space-time harmonic function for a basis and law at time `t`.
pub fn harmonic_fn(basis: &FunctionBasis, law: &EndpointLaw, t: f64) -> Result<HarmonicFn> {
    if law.dim() != basis.n() {
        return Err(Error::InvalidArgument(format!(
            "law dimension {} does not match basis order {}",
            law.dim(),
            basis.n()
        )));
    }
    let m = basis.gramian(t)?;
    let prepared = match law {
        EndpointLaw::Discrete { points, weights } => {
            let offsets = points
                .iter()
                .zip(weights)
                .map(|(y, &w)| w.ln() - 0.5 * (y.transpose() * &m * y)[(0, 0)])
                .collect();
            Prepared::Discrete {
                points: points.clone(),
                offsets,
            }
        }
        EndpointLaw::Gaussian { mean, cov } => {
            let factor = psd_factor(cov, None);
            let r = factor.ncols();
            let inner = DMatrix::identity(r, r) + factor.transpose() * &m * &factor;
            let chol = inner.clone().cholesky().ok_or_else(|| {
                Error::InvalidArgument("I + A* m A is not positive definite".into())
            })?;
            let log_det_half: f64 = (0..r).map(|i| chol.l()[(i, i)].ln()).sum();
            let m_mean = &m * mean;
            let mean_quad_half = 0.5 * mean.dot(&m_mean);
            Prepared::Gaussian {
                factor,
                chol,
                log_det_half,
                mean: mean.clone(),
                m_mean,
                mean_quad_half,
            }
        }
    };
    Ok(HarmonicFn { t, prepared })
}

impl HarmonicFn {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// `ln h(t, x)`.
    pub fn log_eval(&self, x: &DVector<f64>) -> f64 {
        match &self.prepared {
            Prepared::Discrete { points, offsets } => {
                let terms: Vec<f64> = points
                    .iter()
                    .zip(offsets)
                    .map(|(y, off)| off + y.dot(x))
                    .collect();
                log_sum_exp(&terms)
            }
            Prepared::Gaussian {
                factor,
                chol,
                log_det_half,
                mean,
                m_mean,
                mean_quad_half,
            } => {
                let shifted = x - m_mean;
                let z = factor.transpose() * &shifted;
                let w = chol.solve(&z);
                mean.dot(x) - mean_quad_half + 0.5 * z.dot(&w) - log_det_half
            }
        }
    }

    /// `h(t, x)`.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.log_eval(x).exp()
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = terms.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Evaluate `h(t, x)` directly (for one-off use; ensembles should prepare a
/// [`HarmonicFn`] once).
pub fn harmonic_h(
    basis: &FunctionBasis,
    law: &EndpointLaw,
    t: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    Ok(harmonic_fn(basis, law, t)?.eval(x))
}

/// Monte Carlo check that `E[ h(t, I_t(B)) ] = 1`, valid when
/// `alpha_inf = 0` (every basis norm divergent).
pub fn martingale_check(
    basis: &FunctionBasis,
    law: &EndpointLaw,
    t: f64,
    grid: &std::sync::Arc<TimeGrid>,
    spec: &RngSpec,
    n_paths: usize,
) -> Result<McEstimate> {
    let flags = basis.divergent_flags()?;
    if flags.iter().any(|&d| !d) {
        return Err(Error::InvalidArgument(
            "martingale check requires alpha_inf = 0 (all basis norms divergent)".into(),
        ));
    }
    let idx = grid
        .index_of(t)
        .ok_or_else(|| Error::InvalidArgument(format!("time {t} is not a grid point")))?;
    let h = harmonic_fn(basis, law, t)?;
    let weights = WienerWeights::for_basis(basis, grid);
    let values = crate::paths::ensemble(n_paths, |i| {
        let path = sample_brownian(grid, spec, i);
        let running = ito_with_weights(&weights, &path);
        h.eval(&running.vector_at(idx))
    });
    mean_estimate(&values)
}

/// A tilted path together with the endpoint vector it used.
#[derive(Debug, Clone)]
pub struct TiltedPath {
    pub path: SamplePath,
    pub y: DVector<f64>,
}

/// Draw `Y ~ nu` independent of `B` and return `B + Y* . int_0^. f(s) ds`.
/// The endpoint draw comes first in the stream, then the increments, so one
/// `(seed, index)` pair fixes the whole realization.
pub fn tilted_sampler(
    basis: &FunctionBasis,
    law: &EndpointLaw,
    grid: &std::sync::Arc<TimeGrid>,
    spec: &RngSpec,
    path_index: u64,
) -> Result<TiltedPath> {
    if law.dim() != basis.n() {
        return Err(Error::InvalidArgument(format!(
            "law dimension {} does not match basis order {}",
            law.dim(),
            basis.n()
        )));
    }
    let mut rng = spec.stream(path_index);
    let y = law.sample(&mut rng);
    let b = crate::paths::sample::sample_brownian_from(grid, &mut rng);
    let curve = basis.integral_curve(grid.times())?;
    let n = basis.n();
    let values: Vec<f64> = (0..grid.len())
        .map(|k| {
            let f_int = &curve[k * n..(k + 1) * n];
            b.values[k] + f_int.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    Ok(TiltedPath {
        path: SamplePath::new(grid.clone(), values, PathRole::SdeSolution),
        y,
    })
}
