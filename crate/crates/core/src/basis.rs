//! Reproducing bases and their Gramian calculus.
//!
//! A basis is a vector `f = (f_1, ..., f_n)*` of locally square-integrable
//! functions on `(0, inf)`. The Gramian `m_t = int_0^t f f* ds` is assumed
//! invertible for every `t > 0`, with inverse `alpha_t`, and
//! `phi(t) = alpha_t . f(t)` is the left factor of the associated Goursat
//! kernel. `alpha_t` decreases (in the matrix sense) to a finite limit
//! `alpha_inf` whose row `i` vanishes exactly when `||f_i|| = inf`, and
//!
//! ```text
//! alpha_t = int_t^inf phi phi* du + alpha_inf.
//! ```
//!
//! Closed forms are used for constant/power/exponential kinds; everything
//! else falls back to adaptive quadrature at relative tolerance 1e-10 with a
//! power substitution taming the `s^lambda` singularity at zero.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::paths::quad;
use crate::Result;

/// Relative tolerance for all Gramian-related quadrature.
pub const QUAD_TOL: f64 = 1e-10;

/// Condition-number guard for Gramian inversion.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Agreement tolerance for the `alpha_inf` horizon extrapolation.
pub const EXTRAPOLATION_TOL: f64 = 1e-6;

/// Squared L2 norm of a basis function over `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormSquared {
    Finite(f64),
    Divergent,
}

impl NormSquared {
    pub fn is_finite(&self) -> bool {
        matches!(self, NormSquared::Finite(_))
    }
}

/// Monotone-cubic (Fritsch-Carlson) interpolation table on a strictly
/// increasing positive grid. Below the first knot the first value is held;
/// above the last knot the function is zero.
#[derive(Debug)]
pub struct Table {
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Table {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidBasis(format!(
                "table has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidBasis(
                "table needs at least two points".into(),
            ));
        }
        if times[0] <= 0.0 {
            return Err(Error::InvalidBasis(format!(
                "table times must be positive, first is {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidBasis(
                "table times must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBasis("table values must be finite".into()));
        }
        let slopes = fritsch_carlson_slopes(&times, &values);
        Ok(Table {
            times,
            values,
            slopes,
        })
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.times[0] {
            return self.values[0];
        }
        if t > self.last_time() {
            return 0.0;
        }
        let idx = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let h = self.times[idx + 1] - self.times[idx];
        let s = (t - self.times[idx]) / h;
        let (y0, y1) = (self.values[idx], self.values[idx + 1]);
        let (m0, m1) = (self.slopes[idx] * h, self.slopes[idx + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + m0 * (s3 - 2.0 * s2 + s)
            + y1 * (-2.0 * s3 + 3.0 * s2)
            + m1 * (s3 - s2)
    }
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = d[0];
        m[1] = d[0];
        return m;
    }
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    m[0] = endpoint_slope(h[0], h[1], d[0], d[1]);
    m[n - 1] = endpoint_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// One component of a reproducing basis.
#[derive(Debug, Clone)]
pub enum BasisKind {
    Constant,
    Power { exponent: f64 },
    Exponential { rate: f64 },
    Tabulated(Arc<Table>),
}

#[derive(Debug, Clone)]
pub struct BasisFunction {
    kind: BasisKind,
}

impl BasisFunction {
    pub fn constant() -> Self {
        BasisFunction {
            kind: BasisKind::Constant,
        }
    }

    /// `f(s) = s^lambda`; membership in `L2_loc` requires `lambda > -1/2`.
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > -0.5) {
            return Err(Error::InvalidBasis(format!(
                "power exponent must be finite and > -1/2, got {exponent}"
            )));
        }
        Ok(BasisFunction {
            kind: BasisKind::Power { exponent },
        })
    }

    /// `f(s) = exp(-rate s)` with `rate > 0`.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidBasis(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Ok(BasisFunction {
            kind: BasisKind::Exponential { rate },
        })
    }

    pub fn tabulated(table: Table) -> Self {
        BasisFunction {
            kind: BasisKind::Tabulated(Arc::new(table)),
        }
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            BasisKind::Constant => 1.0,
            BasisKind::Power { exponent } => t.powf(*exponent),
            BasisKind::Exponential { rate } => (-rate * t).exp(),
            BasisKind::Tabulated(tab) => tab.eval(t),
        }
    }

    /// Squared L2 norm over `(0, inf)`. Powers and constants diverge;
    /// exponentials have norm `1/(2 rate)`; tabulated functions are zero
    /// beyond their grid, so their norm is a finite quadrature.
    pub fn norm_squared(&self) -> Result<NormSquared> {
        match &self.kind {
            BasisKind::Constant | BasisKind::Power { .. } => Ok(NormSquared::Divergent),
            BasisKind::Exponential { rate } => Ok(NormSquared::Finite(1.0 / (2.0 * rate))),
            BasisKind::Tabulated(tab) => {
                let end = tab.last_time();
                let tab = tab.clone();
                let q = quad::integrate(move |s| tab.eval(s).powi(2), 0.0, end, QUAD_TOL)?;
                Ok(NormSquared::Finite(q.value))
            }
        }
    }

    /// `int_0^t f(s) ds`.
    pub fn integral_to(&self, t: f64) -> Result<f64> {
        match &self.kind {
            BasisKind::Constant => Ok(t),
            BasisKind::Power { exponent } => Ok(t.powf(exponent + 1.0) / (exponent + 1.0)),
            BasisKind::Exponential { rate } => Ok((1.0 - (-rate * t).exp()) / rate),
            BasisKind::Tabulated(tab) => {
                let end = tab.last_time().min(t);
                if end <= 0.0 {
                    return Ok(0.0);
                }
                let tab = tab.clone();
                Ok(quad::integrate(move |s| tab.eval(s), 0.0, end, QUAD_TOL)?.value)
            }
        }
    }

    fn power_exponent(&self) -> Option<f64> {
        match &self.kind {
            BasisKind::Power { exponent } => Some(*exponent),
            BasisKind::Constant => Some(0.0),
            _ => None,
        }
    }

    /// Upper end of the support (tables vanish beyond their grid).
    fn support_end(&self) -> f64 {
        match &self.kind {
            BasisKind::Tabulated(tab) => tab.last_time(),
            _ => f64::INFINITY,
        }
    }

    /// Closed form for `int_0^t f_i f_j ds`, when one exists.
    fn pair_integral_closed(&self, other: &BasisFunction, t: f64) -> Option<f64> {
        use BasisKind::*;
        match (&self.kind, &other.kind) {
            (Constant, Constant) => Some(t),
            (Constant, Power { exponent }) | (Power { exponent }, Constant) => {
                Some(t.powf(exponent + 1.0) / (exponent + 1.0))
            }
            (Power { exponent: a }, Power { exponent: b }) => {
                Some(t.powf(a + b + 1.0) / (a + b + 1.0))
            }
            (Constant, Exponential { rate }) | (Exponential { rate }, Constant) => {
                Some((1.0 - (-rate * t).exp()) / rate)
            }
            (Exponential { rate: a }, Exponential { rate: b }) => {
                Some((1.0 - (-(a + b) * t).exp()) / (a + b))
            }
            _ => None,
        }
    }

    /// Closed form for `int_0^inf f_i f_j ds` (both norms finite), if any.
    fn pair_integral_infinite_closed(&self, other: &BasisFunction) -> Option<f64> {
        use BasisKind::*;
        match (&self.kind, &other.kind) {
            (Exponential { rate: a }, Exponential { rate: b }) => Some(1.0 / (a + b)),
            _ => None,
        }
    }
}

/// The reproducing basis `f`, an ordered finite family of functions.
#[derive(Clone)]
pub struct FunctionBasis {
    funcs: Arc<[BasisFunction]>,
}

impl fmt::Debug for FunctionBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FunctionBasis(n={})", self.funcs.len())
    }
}

/// Gramian, inverse, and kernel left factor at a fixed time.
#[derive(Debug, Clone)]
pub struct GramianState {
    pub t: f64,
    pub m: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
    pub phi: DVector<f64>,
}

/// The limit of the inverse Gramians as `t -> inf`.
#[derive(Debug, Clone)]
pub struct AlphaInfinity {
    pub matrix: DMatrix<f64>,
    /// `true` at index `i` exactly when `||f_i|| = inf` (zero row/column).
    pub zero_rows: Vec<bool>,
    /// Estimated extrapolation error; zero for closed-form paths.
    pub convergence_estimate: f64,
}

/// Orthonormal system over `[0, t]`: `q = b* . f` with `b` upper triangular,
/// positive diagonal, and `b b* = alpha_t`.
#[derive(Debug, Clone)]
pub struct OrthonormalSystem {
    pub t: f64,
    pub b: DMatrix<f64>,
    basis: FunctionBasis,
}

impl OrthonormalSystem {
    /// Evaluate `q_k(u)` (zero-based `k`).
    pub fn q(&self, k: usize, u: f64) -> f64 {
        let f = self.basis.eval_vector(u);
        (0..=k).map(|i| self.b[(i, k)] * f[i]).sum()
    }

    /// All components `q(u) = b* . f(u)`.
    pub fn q_vector(&self, u: f64) -> DVector<f64> {
        self.b.transpose() * self.basis.eval_vector(u)
    }

    /// `b b*`, which must reproduce `alpha_t`.
    pub fn bbt(&self) -> DMatrix<f64> {
        &self.b * self.b.transpose()
    }
}

impl FunctionBasis {
    pub fn new(funcs: Vec<BasisFunction>) -> Result<Self> {
        if funcs.is_empty() {
            return Err(Error::InvalidBasis(
                "basis needs at least one function".into(),
            ));
        }
        Ok(FunctionBasis {
            funcs: funcs.into(),
        })
    }

    /// Convenience constructor for a pure power (Muntz) basis.
    pub fn powers(exponents: &[f64]) -> Result<Self> {
        let funcs = exponents
            .iter()
            .map(|&l| BasisFunction::power(l))
            .collect::<Result<Vec<_>>>()?;
        FunctionBasis::new(funcs)
    }

    pub fn n(&self) -> usize {
        self.funcs.len()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.funcs
    }

    /// `f(t)` as a column vector.
    pub fn eval_vector(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.funcs.iter().map(|f| f.eval(t)))
    }

    /// `int_0^t f(s) ds` componentwise.
    pub fn integral_vector(&self, t: f64) -> Result<DVector<f64>> {
        let vals = self
            .funcs
            .iter()
            .map(|f| f.integral_to(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }

    /// `int_0^t f ds` for every time in `times`, point-major (`n` values per
    /// time). Shared by the bridge, solution-family, and tilted-path code.
    pub fn integral_curve(&self, times: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * times.len());
        for &t in times {
            for f in self.funcs.iter() {
                out.push(f.integral_to(t)?);
            }
        }
        Ok(out)
    }

    /// Substitution exponent regularizing every pair integrand at zero:
    /// `p = 1/(2 lambda_min + 1)` over the power exponents present.
    pub fn singularity_power(&self) -> f64 {
        let min_exp = self
            .funcs
            .iter()
            .filter_map(|f| f.power_exponent())
            .fold(f64::INFINITY, f64::min);
        if min_exp.is_finite() && min_exp < 0.0 {
            1.0 / (2.0 * min_exp + 1.0)
        } else {
            1.0
        }
    }

    fn pair_integral(&self, i: usize, j: usize, t: f64) -> Result<f64> {
        let (fi, fj) = (&self.funcs[i], &self.funcs[j]);
        if let Some(v) = fi.pair_integral_closed(fj, t) {
            return Ok(v);
        }
        let upper = t.min(fi.support_end()).min(fj.support_end());
        if upper <= 0.0 {
            return Ok(0.0);
        }
        let gamma = fi.power_exponent().unwrap_or(0.0) + fj.power_exponent().unwrap_or(0.0);
        let p = if gamma < 0.0 {
            1.0 / (gamma + 1.0)
        } else {
            1.0
        };
        let (fi, fj) = (fi.clone(), fj.clone());
        Ok(
            quad::integrate_left_singular(move |s| fi.eval(s) * fj.eval(s), upper, p, QUAD_TOL)?
                .value,
        )
    }

    /// The Gramian `m_t = int_0^t f f* ds`.
    pub fn gramian(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.pair_integral(i, j, t)?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// `m_inf`, defined when every component has finite norm.
    fn gramian_infinite(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (fi, fj) = (&self.funcs[i], &self.funcs[j]);
                let v = if let Some(v) = fi.pair_integral_infinite_closed(fj) {
                    v
                } else {
                    let upper = fi.support_end().min(fj.support_end());
                    if !upper.is_finite() {
                        return Err(Error::InvalidBasis(
                            "no closed form and unbounded support for an infinite-horizon Gramian entry".into(),
                        ));
                    }
                    self.pair_integral(i, j, upper)?
                };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Inverse Gramian `alpha_t = m_t^{-1}` via Cholesky, with a condition
    /// guard refusing results past `CONDITION_LIMIT`.
    pub fn alpha(&self, t: f64) -> Result<DMatrix<f64>> {
        let m = self.gramian(t)?;
        invert_spd(&m, t)
    }

    /// `phi(t) = alpha_t . f(t)`.
    pub fn phi(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.alpha(t)? * self.eval_vector(t))
    }

    /// Gramian, inverse, and left factor bundled at one time.
    pub fn gramian_state(&self, t: f64) -> Result<GramianState> {
        let m = self.gramian(t)?;
        let alpha = invert_spd(&m, t)?;
        let phi = &alpha * self.eval_vector(t);
        Ok(GramianState { t, m, alpha, phi })
    }

    /// Per-component norm flags (`true` means divergent).
    pub fn divergent_flags(&self) -> Result<Vec<bool>> {
        self.funcs
            .iter()
            .map(|f| Ok(!f.norm_squared()?.is_finite()))
            .collect()
    }

    /// The limit `alpha_inf` with the default extrapolation horizon.
    ///
    /// `alpha_T` approaches its limit at rate `O(1/T)`; the reported
    /// agreement estimate after two Richardson levels scales like `1/T^2`,
    /// so the base horizon must be large enough for the 1e-6 tolerance.
    pub fn alpha_infinity(&self) -> Result<AlphaInfinity> {
        self.alpha_infinity_with(2048.0, EXTRAPOLATION_TOL)
    }

    /// `alpha_inf` by: (a) inverting `m_inf` when every norm is finite;
    /// (b) the zero matrix when every norm diverges; (c) Richardson
    /// extrapolation of `alpha_T` over `T, 2T, 4T` otherwise, with the
    /// divergent rows forced to zero and the last correction reported.
    pub fn alpha_infinity_with(&self, t0: f64, tol: f64) -> Result<AlphaInfinity> {
        let flags = self.divergent_flags()?;
        let n = self.n();

        if flags.iter().all(|&d| !d) {
            let m_inf = self.gramian_infinite()?;
            let matrix = invert_spd(&m_inf, f64::INFINITY)?;
            return Ok(AlphaInfinity {
                matrix,
                zero_rows: flags,
                convergence_estimate: 0.0,
            });
        }
        if flags.iter().all(|&d| d) {
            return Ok(AlphaInfinity {
                matrix: DMatrix::zeros(n, n),
                zero_rows: flags,
                convergence_estimate: 0.0,
            });
        }

        // Mixed norms: alpha_T -> alpha_inf at rate O(1/T); two Richardson
        // levels over geometric horizons knock out 1/T and 1/T^2.
        let horizons = [t0, 2.0 * t0, 4.0 * t0];
        let a1 = self.alpha(horizons[0])?;
        let a2 = self.alpha(horizons[1])?;
        let a4 = self.alpha(horizons[2])?;
        let b1 = 2.0 * &a2 - &a1;
        let b2 = 2.0 * &a4 - &a2;
        let mut c = (4.0 * &b2 - &b1) / 3.0;
        let mut estimate = (&c - &b2).abs().max();

        for i in 0..n {
            if flags[i] {
                for j in 0..n {
                    estimate = estimate.max(c[(i, j)].abs());
                    c[(i, j)] = 0.0;
                    c[(j, i)] = 0.0;
                }
            }
        }
        // Symmetrize away rounding skew.
        c = (&c + &c.transpose()) * 0.5;

        if estimate > tol {
            return Err(Error::ExtrapolationDiverged {
                horizons,
                estimate,
                tol,
            });
        }
        Ok(AlphaInfinity {
            matrix: c,
            zero_rows: flags,
            convergence_estimate: estimate,
        })
    }

    /// Modified Gram-Schmidt over the inner product `int_0^t`, carried on
    /// coefficient vectors against the Gramian. Leading coefficients are
    /// positive; a second pass runs if orthogonality degrades past 1e-8.
    pub fn orthonormalize(&self, t: f64) -> Result<OrthonormalSystem> {
        const ORTHO_TOL: f64 = 1e-8;
        let m = self.gramian(t)?;
        let n = self.n();

        let mut b = DMatrix::<f64>::identity(n, n);
        mgs_pass(&mut b, &m, t)?;
        let defect = orthogonality_defect(&b, &m);
        if defect > ORTHO_TOL {
            mgs_pass(&mut b, &m, t)?;
            let defect = orthogonality_defect(&b, &m);
            if defect > ORTHO_TOL {
                return Err(Error::OrthogonalityLost {
                    defect,
                    tol: ORTHO_TOL,
                });
            }
        }
        Ok(OrthonormalSystem {
            t,
            b,
            basis: self.clone(),
        })
    }

    /// Closed-form `int_T^inf phi phi* du` when available.
    ///
    /// For a pure power/constant family, `phi_i(u) = phi_i(1) u^{-lambda_i-1}`
    /// (the Gramian scales diagonally in `t`), so each tail entry is an
    /// explicit power integral. A single exponential has scalar
    /// `phi(u) = 2 mu e^{-mu u} / (1 - e^{-2 mu u})`, integrable in closed
    /// form. Returns `None` otherwise.
    pub fn phi_tail_outer_closed(&self, horizon: f64) -> Result<Option<DMatrix<f64>>> {
        let n = self.n();
        let exponents: Option<Vec<f64>> = self.funcs.iter().map(|f| f.power_exponent()).collect();
        if let Some(lam) = exponents {
            let phi1 = self.phi(1.0)?;
            let mut tail = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let s = lam[i] + lam[j] + 1.0;
                    tail[(i, j)] = phi1[i] * phi1[j] * horizon.powf(-s) / s;
                }
            }
            return Ok(Some(tail));
        }
        if n == 1 {
            if let BasisKind::Exponential { rate } = &self.funcs[0].kind {
                let w = (-2.0 * rate * horizon).exp();
                let v = 2.0 * rate * w / (1.0 - w);
                return Ok(Some(DMatrix::from_element(1, 1, v)));
            }
        }
        Ok(None)
    }

    /// `int_a^b phi phi* du` by entrywise adaptive quadrature on the honest
    /// (Cholesky) route.
    pub fn phi_outer_integral(&self, a: f64, b: f64, tol: f64) -> Result<DMatrix<f64>> {
        let n = self.n();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let basis = self.clone();
                let q = quad::integrate(
                    move |u| {
                        let phi = basis
                            .phi(u)
                            .unwrap_or_else(|_| DVector::repeat(n, f64::NAN));
                        phi[i] * phi[j]
                    },
                    a,
                    b,
                    tol,
                )?;
                out[(i, j)] = q.value;
                out[(j, i)] = q.value;
            }
        }
        Ok(out)
    }

    /// Residual of the inverse-Gramian identity
    /// `alpha_t - int_t^T phi phi* du - alpha_inf - tail(T)`.
    ///
    /// The middle integral is adaptive quadrature on the Cholesky route; the
    /// tail correction uses the independent closed forms where they exist and
    /// otherwise extends the quadrature to a far horizon, leaving the rest in
    /// the residual.
    pub fn alpha_identity_residual(&self, t: f64, horizon: f64) -> Result<DMatrix<f64>> {
        if !(horizon > t && t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need horizon > t > 0, got t = {t}, horizon = {horizon}"
            )));
        }
        let alpha_t = self.alpha(t)?;
        let alpha_inf = self.alpha_infinity()?.matrix;
        let mid = self.phi_outer_integral(t, horizon, QUAD_TOL)?;
        let tail = match self.phi_tail_outer_closed(horizon)? {
            Some(tail) => tail,
            None => self.phi_outer_integral(horizon, 32.0 * horizon, 1e-9)?,
        };
        Ok(alpha_t - mid - alpha_inf - tail)
    }
}

/// Invert a symmetric positive-definite matrix through its Cholesky factor,
/// guarding the condition number.
pub(crate) fn invert_spd(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let eigen = m.clone().symmetric_eigen();
    let max = eigen
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = eigen
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite { t });
    }
    let cond = max / min;
    if cond > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            t,
            cond,
            limit: CONDITION_LIMIT,
        });
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { t })?;
    let inv = chol.inverse();
    Ok((&inv + &inv.transpose()) * 0.5)
}

fn mgs_pass(b: &mut DMatrix<f64>, m: &DMatrix<f64>, t: f64) -> Result<()> {
    let n = b.nrows();
    for k in 0..n {
        for j in 0..k {
            let r = dot_m(&b.column(j).into_owned(), &b.column(k).into_owned(), m);
            let col_j = b.column(j).into_owned();
            let mut col_k = b.column(k).into_owned();
            col_k -= r * col_j;
            b.set_column(k, &col_k);
        }
        let col_k = b.column(k).into_owned();
        let norm2 = dot_m(&col_k, &col_k, m);
        if !(norm2 > 0.0) {
            return Err(Error::NotPositiveDefinite { t });
        }
        let mut col_k = col_k / norm2.sqrt();
        if col_k[k] < 0.0 {
            col_k = -col_k;
        }
        // Columns live in span{e_0..e_k}; pin the structural zeros.
        for i in k + 1..n {
            col_k[i] = 0.0;
        }
        b.set_column(k, &col_k);
    }
    Ok(())
}

fn dot_m(a: &DVector<f64>, b: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    (a.transpose() * m * b)[(0, 0)]
}

fn orthogonality_defect(b: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let g = b.transpose() * m * b;
    let n = b.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Parse a basis specification: one function per line (or `;`-separated),
/// each `const`, `power lambda=<x>`, `exp rate=<x>`, or `table file=<path>`
/// with a two-column time/value text file.
pub fn parse_basis(text: &str) -> Result<FunctionBasis> {
    let mut funcs = Vec::new();
    for raw in text.split(['\n', ';']) {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        funcs.push(parse_basis_function(line)?);
    }
    FunctionBasis::new(funcs)
}

fn parse_basis_function(line: &str) -> Result<BasisFunction> {
    let mut parts = line.split_whitespace();
    let head = parts.next().unwrap_or_default();
    match head {
        "const" => Ok(BasisFunction::constant()),
        "power" => BasisFunction::power(parse_kv(parts.next(), "lambda")?),
        "exp" => BasisFunction::exponential(parse_kv(parts.next(), "rate")?),
        "table" => {
            let arg = parts
                .next()
                .ok_or_else(|| Error::Config("table needs file=<path>".into()))?;
            let path = arg
                .strip_prefix("file=")
                .ok_or_else(|| Error::Config(format!("expected file=<path>, got '{arg}'")))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read table {path}: {e}")))?;
            let table = parse_table(&text)?;
            Ok(BasisFunction::tabulated(table))
        }
        other => Err(Error::Config(format!(
            "unknown basis function kind '{other}'"
        ))),
    }
}

fn parse_kv(arg: Option<&str>, key: &str) -> Result<f64> {
    let arg = arg.ok_or_else(|| Error::Config(format!("missing {key}=<value>")))?;
    let val = arg
        .strip_prefix(&format!("{key}="))
        .ok_or_else(|| Error::Config(format!("expected {key}=<value>, got '{arg}'")))?;
    val.parse::<f64>()
        .map_err(|e| Error::Config(format!("bad number in '{arg}': {e}")))
}

/// Parse a two-column (time, value) table; separators are whitespace or commas.
pub fn parse_table(text: &str) -> Result<Table> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line
            .split([',', ' ', '\t'])
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(Error::Config(format!(
                "table line needs two columns: '{line}'"
            )));
        }
        let t: f64 = cols[0]
            .parse()
            .map_err(|e| Error::Config(format!("bad time '{}': {e}", cols[0])))?;
        let v: f64 = cols[1]
            .parse()
            .map_err(|e| Error::Config(format!("bad value '{}': {e}", cols[1])))?;
        times.push(t);
        values.push(v);
    }
    Table::new(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::quad;
    use approx::assert_relative_eq;

    fn muntz01() -> FunctionBasis {
        FunctionBasis::powers(&[0.0, 1.0]).unwrap()
    }

    fn exp1() -> FunctionBasis {
        FunctionBasis::new(vec![BasisFunction::exponential(1.0).unwrap()]).unwrap()
    }

    /// Cofactor inversion of a 2x2, the independent oracle for small cases.
    fn invert_2x2(m: &DMatrix<f64>) -> DMatrix<f64> {
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        DMatrix::from_row_slice(2, 2, &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]]) / det
    }

    #[test]
    fn gramian_constant_is_t() {
        let basis = FunctionBasis::new(vec![BasisFunction::constant()]).unwrap();
        let m = basis.gramian(2.0).unwrap();
        assert_eq!(m[(0, 0)], 2.0);
    }

    #[test]
    fn gramian_muntz_is_cauchy_at_one() {
        let m = muntz01().gramian(1.0).unwrap();
        let expected = [1.0, 0.5, 0.5, 1.0 / 3.0];
        for (got, want) in m
            .iter()
            .zip(DMatrix::from_row_slice(2, 2, &expected).iter())
        {
            assert_relative_eq!(got, want, max_relative = 1e-14);
        }
    }

    #[test]
    fn gramian_exponential_closed_form_matches_quadrature() {
        let basis = exp1();
        let t = 20.0;
        let m = basis.gramian(t).unwrap();
        let closed = (1.0 - (-2.0 * t).exp()) / 2.0;
        assert_relative_eq!(m[(0, 0)], closed, max_relative = 1e-14);
        assert_relative_eq!(m[(0, 0)], 0.5, max_relative = 1e-8);
        let q = quad::integrate(|s: f64| (-2.0 * s).exp(), 0.0, t, 1e-12).unwrap();
        assert_relative_eq!(m[(0, 0)], q.value, max_relative = 1e-10);
    }

    #[test]
    fn gramian_rejects_nonpositive_time() {
        assert!(matches!(
            muntz01().gramian(0.0),
            Err(Error::NonPositiveTime(_))
        ));
        assert!(matches!(
            muntz01().gramian(-1.0),
            Err(Error::NonPositiveTime(_))
        ));
    }

    #[test]
    fn alpha_constant_scalar_inverse() {
        let basis = FunctionBasis::new(vec![BasisFunction::constant()]).unwrap();
        assert_relative_eq!(basis.alpha(2.0).unwrap()[(0, 0)], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn alpha_muntz_matches_cofactor_oracle() {
        let basis = muntz01();
        let alpha = basis.alpha(1.0).unwrap();
        let oracle = invert_2x2(&basis.gramian(1.0).unwrap());
        let expected = DMatrix::from_row_slice(2, 2, &[4.0, -6.0, -6.0, 12.0]);
        assert!((&oracle - &expected).abs().max() < 1e-12);
        assert!((&alpha - &expected).abs().max() < 1e-10);
        // m alpha = I within 1e-10 relative.
        let prod = basis.gramian(1.0).unwrap() * &alpha;
        assert!((&prod - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-10);
    }

    #[test]
    fn alpha_muntz_scales_by_power_law() {
        let basis = muntz01();
        let a1 = basis.alpha(1.0).unwrap();
        let a2 = basis.alpha(2.0).unwrap();
        let lam = [0.0, 1.0];
        for i in 0..2 {
            for j in 0..2 {
                let expected = a1[(i, j)] * 2.0f64.powf(-lam[i] - lam[j] - 1.0);
                assert_relative_eq!(a2[(i, j)], expected, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn alpha_refuses_ill_conditioned_gramian() {
        // Nearly repeated exponents make the Cauchy matrix numerically
        // singular: condition number ~ 4/eps^2 here.
        let basis = FunctionBasis::powers(&[0.0, 1e-6]).unwrap();
        match basis.alpha(1.0) {
            Err(Error::IllConditioned { t, .. }) => assert_eq!(t, 1.0),
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }

    #[test]
    fn phi_constant_is_one_over_t() {
        let basis = FunctionBasis::new(vec![BasisFunction::constant()]).unwrap();
        for t in [0.3, 1.0, 7.5] {
            assert_relative_eq!(basis.phi(t).unwrap()[0], 1.0 / t, max_relative = 1e-12);
        }
    }

    #[test]
    fn phi_muntz_at_one_is_minus_two_six() {
        let phi = muntz01().phi(1.0).unwrap();
        assert!((phi[0] - -2.0).abs() < 1e-10);
        assert!((phi[1] - 6.0).abs() < 1e-10);
    }

    #[test]
    fn phi_exponential_closed_form() {
        let basis = exp1();
        for t in [0.25f64, 1.0, 3.0] {
            let expected = 2.0 * (-t).exp() / (1.0 - (-2.0 * t).exp());
            assert_relative_eq!(basis.phi(t).unwrap()[0], expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn gramian_state_invariants() {
        for basis in [muntz01(), exp1()] {
            for t in [0.5, 1.0, 2.0] {
                let st = basis.gramian_state(t).unwrap();
                let n = basis.n();
                let prod = &st.m * &st.alpha;
                assert!((&prod - DMatrix::<f64>::identity(n, n)).abs().max() < 1e-10);
                assert!((&st.alpha - st.alpha.transpose()).abs().max() < 1e-12);
                for i in 0..n {
                    assert!(st.m[(i, i)] > 0.0);
                    assert!(st.alpha[(i, i)] > 0.0);
                    // Diagonal bound from the orthogonal diagonalization.
                    assert!(st.alpha[(i, i)] >= 1.0 / st.m[(i, i)] - 1e-12);
                }
                let phi = &st.alpha * basis.eval_vector(t);
                assert!((&phi - &st.phi).abs().max() < 1e-12);
            }
        }
    }

    #[test]
    fn alpha_derivative_is_minus_phi_outer() {
        // d/dt alpha_t = -phi phi*, by central difference at h = 1e-5.
        let h = 1e-5;
        for basis in [muntz01(), exp1()] {
            for t in [0.5, 1.0, 2.0] {
                let plus = basis.alpha(t + h).unwrap();
                let minus = basis.alpha(t - h).unwrap();
                let deriv = (plus - minus) / (2.0 * h);
                let phi = basis.phi(t).unwrap();
                let outer = -1.0 * &phi * phi.transpose();
                let scale = outer.abs().max().max(1.0);
                assert!(
                    (&deriv - &outer).abs().max() / scale < 1e-5,
                    "basis {basis:?} t {t}"
                );
            }
        }
    }

    #[test]
    fn alpha_diagonal_strictly_decreasing() {
        for basis in [muntz01(), exp1()] {
            let ts = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0];
            for w in ts.windows(2) {
                let a = basis.alpha(w[0]).unwrap();
                let b = basis.alpha(w[1]).unwrap();
                for i in 0..basis.n() {
                    assert!(
                        b[(i, i)] < a[(i, i)],
                        "diagonal {i} not decreasing at {w:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn alpha_infinity_muntz_is_zero() {
        let ainf = muntz01().alpha_infinity().unwrap();
        assert_eq!(ainf.matrix, DMatrix::zeros(2, 2));
        assert_eq!(ainf.zero_rows, vec![true, true]);
    }

    #[test]
    fn alpha_infinity_exponential_inverts_m_inf() {
        let ainf = exp1().alpha_infinity().unwrap();
        assert_relative_eq!(ainf.matrix[(0, 0)], 2.0, max_relative = 1e-12);
        assert_eq!(ainf.zero_rows, vec![false]);
    }

    #[test]
    fn alpha_infinity_mixed_case_matches_remark_structure() {
        // (exp rate 1, const): finite block 1/||f_1||^2 = 2, divergent row zero.
        let basis = FunctionBasis::new(vec![
            BasisFunction::exponential(1.0).unwrap(),
            BasisFunction::constant(),
        ])
        .unwrap();
        let ainf = basis.alpha_infinity().unwrap();
        assert_eq!(ainf.zero_rows, vec![false, true]);
        assert!(
            (ainf.matrix[(0, 0)] - 2.0).abs() < 1e-6,
            "got {}",
            ainf.matrix[(0, 0)]
        );
        assert_eq!(ainf.matrix[(0, 1)], 0.0);
        assert_eq!(ainf.matrix[(1, 0)], 0.0);
        assert_eq!(ainf.matrix[(1, 1)], 0.0);
        assert!(ainf.convergence_estimate <= EXTRAPOLATION_TOL);
    }

    #[test]
    fn alpha_infinity_two_finite_norms_positive_definite() {
        let basis = FunctionBasis::new(vec![
            BasisFunction::exponential(1.0).unwrap(),
            BasisFunction::exponential(2.0).unwrap(),
        ])
        .unwrap();
        let ainf = basis.alpha_infinity().unwrap();
        // m_inf = [[1/2, 1/3], [1/3, 1/4]]; oracle by cofactors.
        let m_inf = DMatrix::from_row_slice(2, 2, &[0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25]);
        let oracle = invert_2x2(&m_inf);
        assert!((&ainf.matrix - &oracle).abs().max() < 1e-10);
        let eigen = ainf.matrix.clone().symmetric_eigen();
        assert!(eigen.eigenvalues.iter().all(|&l| l > 0.0));
        // Cauchy-Schwarz structure of the limit.
        let a = &ainf.matrix;
        assert!(a[(0, 1)].powi(2) <= a[(0, 0)] * a[(1, 1)] + 1e-12);
    }

    #[test]
    fn alpha_infinity_orthogonal_pair_has_zero_off_diagonal() {
        // f1 = e^-s - sqrt(2) e^-2s and f2 = e^-s + sqrt(2) e^-2s have equal
        // norms and int f1 f2 = 0, so the limit matrix is diagonal.
        let r2 = 2.0f64.sqrt();
        let grid: Vec<f64> = (0..4000).map(|k| 1e-6 + 30.0 * k as f64 / 3999.0).collect();
        let f1: Vec<f64> = grid
            .iter()
            .map(|&s| (-s).exp() - r2 * (-2.0 * s).exp())
            .collect();
        let f2: Vec<f64> = grid
            .iter()
            .map(|&s| (-s).exp() + r2 * (-2.0 * s).exp())
            .collect();
        let basis = FunctionBasis::new(vec![
            BasisFunction::tabulated(Table::new(grid.clone(), f1).unwrap()),
            BasisFunction::tabulated(Table::new(grid, f2).unwrap()),
        ])
        .unwrap();
        let ainf = basis.alpha_infinity().unwrap();
        assert_eq!(ainf.zero_rows, vec![false, false]);
        let a = &ainf.matrix;
        // Off-diagonal of m_inf is ~0, so the inverse is ~diagonal.
        assert!(a[(0, 1)].abs() < 1e-3 * a[(0, 0)].abs(), "{a}");
    }

    #[test]
    fn orthonormalize_constant_basis() {
        let basis = FunctionBasis::new(vec![BasisFunction::constant()]).unwrap();
        for t in [0.5, 2.0] {
            let sys = basis.orthonormalize(t).unwrap();
            assert_relative_eq!(sys.b[(0, 0)], t.powf(-0.5), max_relative = 1e-12);
            assert_relative_eq!(sys.q(0, 0.3 * t), t.powf(-0.5), max_relative = 1e-12);
        }
    }

    #[test]
    fn orthonormalize_muntz_gives_shifted_legendre() {
        let sys = muntz01().orthonormalize(1.0).unwrap();
        let s3 = 3.0f64.sqrt();
        for u in [0.1, 0.5, 0.9] {
            assert_relative_eq!(sys.q(0, u), 1.0, max_relative = 1e-10);
            assert_relative_eq!(sys.q(1, u), s3 * (2.0 * u - 1.0), max_relative = 1e-9);
        }
        // Independent oracle: orthonormality re-checked by direct quadrature
        // on the evaluated functions.
        for a in 0..2 {
            for b in 0..2 {
                let sys2 = sys.clone();
                let q =
                    quad::integrate(move |u| sys2.q(a, u) * sys2.q(b, u), 0.0, 1.0, 1e-12).unwrap();
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((q.value - target).abs() < 1e-9, "({a},{b}) -> {}", q.value);
            }
        }
    }

    #[test]
    fn orthonormal_factor_reproduces_alpha_up_to_n4() {
        let basis = FunctionBasis::powers(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let sys = basis.orthonormalize(t).unwrap();
            let alpha = basis.alpha(t).unwrap();
            let scale = alpha.abs().max();
            assert!(
                (sys.bbt() - &alpha).abs().max() <= 1e-8 * scale.max(1.0),
                "t = {t}"
            );
            // b is upper triangular with positive diagonal.
            for i in 0..4 {
                assert!(sys.b[(i, i)] > 0.0);
                for j in 0..i {
                    assert_eq!(sys.b[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn phi_squared_matches_minus_two_bprime_bstar_diagonal() {
        // phi_i(t)^2 = -2 (b_t' b_t*)_{ii}, by central differences on b_t.
        let basis = muntz01();
        let t = 1.3;
        let h = 1e-6;
        let bp = basis.orthonormalize(t + h).unwrap().b;
        let bm = basis.orthonormalize(t - h).unwrap().b;
        let bc = basis.orthonormalize(t).unwrap().b;
        let bprime = (bp - bm) / (2.0 * h);
        let prod = &bprime * bc.transpose();
        let phi = basis.phi(t).unwrap();
        for i in 0..2 {
            assert_relative_eq!(phi[i] * phi[i], -2.0 * prod[(i, i)], max_relative = 1e-4);
        }
    }

    #[test]
    fn alpha_identity_residual_muntz_tail_values() {
        // int_1^inf phi_1^2 = 4 and int_1^inf phi_1 phi_2 = -6 reproduce
        // alpha_1 entrywise; residual small at several (t, T).
        let basis = muntz01();
        let tail = basis.phi_tail_outer_closed(1.0).unwrap().unwrap();
        assert_relative_eq!(tail[(0, 0)], 4.0, max_relative = 1e-10);
        assert_relative_eq!(tail[(0, 1)], -6.0, max_relative = 1e-10);
        for t in [0.5, 1.0, 2.0] {
            let residual = basis.alpha_identity_residual(t, 8.0).unwrap();
            assert!(residual.abs().max() < 1e-6, "t = {t}: {residual}");
        }
    }

    #[test]
    fn alpha_identity_residual_exponential() {
        let basis = exp1();
        for t in [0.5, 1.0, 2.0] {
            let residual = basis.alpha_identity_residual(t, 8.0).unwrap();
            assert!(residual.abs().max() < 1e-8, "t = {t}: {residual}");
        }
    }

    #[test]
    fn tabulated_gramian_approximates_analytic_power() {
        let grid: Vec<f64> = (0..2000).map(|k| 1e-6 + 2.0 * k as f64 / 1999.0).collect();
        let vals: Vec<f64> = grid.clone();
        let basis = FunctionBasis::new(vec![BasisFunction::tabulated(
            Table::new(grid, vals).unwrap(),
        )])
        .unwrap();
        let m = basis.gramian(1.5).unwrap();
        assert_relative_eq!(m[(0, 0)], 1.5f64.powi(3) / 3.0, max_relative = 1e-5);
    }

    #[test]
    fn table_interpolation_hits_knots_and_extends() {
        let table = Table::new(vec![0.5, 1.0, 2.0], vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(table.eval(1.0), 3.0);
        assert_eq!(table.eval(0.1), 1.0); // clamped below
        assert_eq!(table.eval(3.0), 0.0); // zero beyond the grid
        let mid = table.eval(0.75);
        assert!(mid > 1.0 && mid < 3.0);
    }

    #[test]
    fn parse_basis_specifications() {
        let basis = parse_basis("const; power lambda=1; exp rate=0.5").unwrap();
        assert_eq!(basis.n(), 3);
        assert!(parse_basis("power lambda=-0.6").is_err());
        assert!(parse_basis("exp rate=0").is_err());
        assert!(parse_basis("wobble").is_err());
        assert!(parse_basis("").is_err());
    }

    #[test]
    fn norm_flags_follow_kind() {
        assert!(!BasisFunction::constant()
            .norm_squared()
            .unwrap()
            .is_finite());
        assert!(!BasisFunction::power(0.7)
            .unwrap()
            .norm_squared()
            .unwrap()
            .is_finite());
        match BasisFunction::exponential(2.0)
            .unwrap()
            .norm_squared()
            .unwrap()
        {
            NormSquared::Finite(v) => assert_relative_eq!(v, 0.25, max_relative = 1e-14),
            _ => panic!("exponential norm must be finite"),
        }
    }

    #[test]
    fn power_exponent_domain_enforced() {
        assert!(BasisFunction::power(-0.5).is_err());
        assert!(BasisFunction::power(-0.49).is_ok());
        assert!(BasisFunction::exponential(-1.0).is_err());
    }
}

#[cfg(test)]
mod conditioning_tests {
    use super::*;

    #[test]
    fn hilbert_type_gramians_invert_within_the_guard() {
        // powers (0..n) at t = 1 give the n x n Hilbert matrix, the classic
        // conditioning stress case; n = 6 has condition ~ 1.5e7 and must
        // still invert accurately.
        let exps: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let basis = FunctionBasis::powers(&exps).unwrap();
        let st = basis.gramian_state(1.0).unwrap();
        let gap = (&st.m * &st.alpha - DMatrix::<f64>::identity(6, 6))
            .abs()
            .max();
        assert!(gap < 1e-6, "identity gap {gap}");
    }

    #[test]
    fn hilbert_type_gramian_past_the_guard_is_refused() {
        // n = 10 pushes the condition number past 1e12.
        let exps: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let basis = FunctionBasis::powers(&exps).unwrap();
        assert!(matches!(
            basis.alpha(1.0),
            Err(Error::IllConditioned { .. })
        ));
    }
}
