//! f-generalized bridges and the solution family of the singular SDE.
//!
//! The bridge over `[0, t1]` with endpoint vector `y` is
//!
//! ```text
//! B^y_u = B_u - psi*(u) . ( int_0^{t1} f dB - y ),
//! psi(u) = alpha_{t1} . int_0^u f(s) ds,
//! ```
//!
//! so by construction `int_0^{t1} f dB^y = y`. Every solution of the singular
//! SDE driven by `W` has the form `X = X0 + (int_0^. f* du) . Y` for some
//! random vector `Y`; drawing `Y ~ N(0, alpha_inf)` independent of the driver
//! makes `X` a Brownian motion.

use std::sync::Arc;

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::FunctionBasis;
use crate::error::Error;
use crate::kernel::GoursatKernel;
use crate::linalg::psd_factor;
use crate::paths::{ito_integral, PathRole, SamplePath};
use crate::transform::{particular_solution, ParticularSolution};
use crate::Result;

/// A bridge prescription: basis, horizon, endpoint vector.
#[derive(Debug, Clone)]
pub struct BridgeSpec {
    pub basis: FunctionBasis,
    pub t1: f64,
    pub y: DVector<f64>,
}

impl BridgeSpec {
    pub fn new(basis: FunctionBasis, t1: f64, y: DVector<f64>) -> Result<Self> {
        if !(t1 > 0.0) {
            return Err(Error::NonPositiveTime(t1));
        }
        if y.len() != basis.n() {
            return Err(Error::InvalidArgument(format!(
                "endpoint has {} components but the basis has {}",
                y.len(),
                basis.n()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("endpoint must be finite".into()));
        }
        Ok(BridgeSpec { basis, t1, y })
    }
}

/// The deterministic bridge weight `psi(u) = alpha_{t1} . int_0^u f`.
pub fn psi(basis: &FunctionBasis, u: f64, t1: f64) -> Result<DVector<f64>> {
    if !(u > 0.0 && u <= t1) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < u <= t1, got u = {u}, t1 = {t1}"
        )));
    }
    Ok(basis.alpha(t1)? * basis.integral_vector(u)?)
}

/// Build the bridge path on the grid points `<= t1` (which must include
/// `t1`; the value there is the continuous `psi`-form limit).
pub fn generalized_bridge(spec: &BridgeSpec, b: &SamplePath) -> Result<SamplePath> {
    let idx1 = b.grid.index_of(spec.t1).ok_or_else(|| {
        Error::InvalidArgument(format!("bridge horizon {} is not a grid point", spec.t1))
    })?;
    let running = ito_integral(&spec.basis, b);
    let i_t1 = running.vector_at(idx1);
    let c = i_t1 - &spec.y;
    let alpha = spec.basis.alpha(spec.t1)?;
    // psi*(u).c = F(u)*.(alpha c) with F(u) = int_0^u f and alpha symmetric.
    let correction = &alpha * &c;

    let out_grid = b.grid.truncated(spec.t1)?;
    let curve = spec.basis.integral_curve(out_grid.times())?;
    let n = spec.basis.n();
    let mut values = Vec::with_capacity(idx1 + 1);
    for k in 0..=idx1 {
        let f_int = &curve[k * n..(k + 1) * n];
        let shift: f64 = f_int
            .iter()
            .zip(correction.iter())
            .map(|(a, b)| a * b)
            .sum();
        values.push(b.values[k] - shift);
    }
    Ok(SamplePath::new(out_grid, values, PathRole::Bridge))
}

/// How the random vector attached to a solution is produced.
pub enum EndpointSource {
    /// A fixed deterministic vector.
    Fixed(DVector<f64>),
    /// Centered Gaussian with covariance `alpha_inf` (degenerate rows stay
    /// exactly zero through the reduced-rank factor).
    GaussianAlphaInfinity,
    /// Arbitrary user sampler.
    Custom(Arc<dyn Fn(&mut ChaCha8Rng) -> DVector<f64> + Send + Sync>),
}

impl std::fmt::Debug for EndpointSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EndpointSource::Fixed(y) => write!(f, "Fixed({y:?})"),
            EndpointSource::GaussianAlphaInfinity => write!(f, "GaussianAlphaInfinity"),
            EndpointSource::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A solution-family member: kernel plus the source of its random vector.
#[derive(Debug)]
pub struct SolutionSpec {
    pub kernel: GoursatKernel,
    pub source: EndpointSource,
}

/// A realized solution of the singular SDE.
#[derive(Debug, Clone)]
pub struct Solution {
    pub path: SamplePath,
    /// The vector actually used for this realization.
    pub y: DVector<f64>,
    pub truncation_bound: f64,
}

/// `X = X0 + (int_0^. f* du) . Y` on `[0, t_end]`, driven by `w` (which must
/// extend to at least `10 t_end`).
pub fn sde_solution(
    spec: &SolutionSpec,
    w: &SamplePath,
    t_end: f64,
    truncation_tol: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Solution> {
    let ParticularSolution {
        path: x0,
        truncation_bound,
    } = particular_solution(&spec.kernel, w, t_end, truncation_tol)?;
    let basis = spec.kernel.basis();
    let y = draw_endpoint(&spec.source, basis, rng)?;

    let n = basis.n();
    let curve = basis.integral_curve(x0.grid.times())?;
    let mut values = x0.values.clone();
    for (k, value) in values.iter_mut().enumerate() {
        let f_int = &curve[k * n..(k + 1) * n];
        *value += f_int.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(Solution {
        path: SamplePath::new(x0.grid.clone(), values, PathRole::SdeSolution),
        y,
        truncation_bound,
    })
}

fn draw_endpoint(
    source: &EndpointSource,
    basis: &FunctionBasis,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    match source {
        EndpointSource::Fixed(y) => {
            if y.len() != basis.n() {
                return Err(Error::InvalidArgument(format!(
                    "fixed vector has {} components but the basis has {}",
                    y.len(),
                    basis.n()
                )));
            }
            Ok(y.clone())
        }
        EndpointSource::GaussianAlphaInfinity => {
            let alpha_inf = basis.alpha_infinity()?;
            let factor = psd_factor(&alpha_inf.matrix, Some(&alpha_inf.zero_rows));
            let z = DVector::from_iterator(
                factor.ncols(),
                (0..factor.ncols()).map(|_| StandardNormal.sample(rng)),
            );
            Ok(factor * z)
        }
        EndpointSource::Custom(sampler) => Ok(sampler(rng)),
    }
}
