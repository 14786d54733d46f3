//! Goursat-Volterra kernels and their reproduction identities.
//!
//! A Goursat kernel of order `n` factorizes as `k(t,s) = phi*(t) . f(s)` for
//! `0 < s <= t` and vanishes for `s > t`. Every such kernel built from an
//! invertible Gramian is self-reproducing,
//!
//! ```text
//! k(t,s) = int_0^s k(t,u) k(s,u) du,
//! ```
//!
//! and satisfies the tail form
//! `k(t,s) = int_t^inf k(u,t) k(u,s) du + f*(t) alpha_inf f(s)`.
//!
//! For a pure power basis `f_i(s) = s^{lambda_i}` (a Muntz family) the kernel
//! has the closed form `k(t,s) = t^{-1} sum_j a_j (s/t)^{lambda_j}`. The
//! coefficient denominator is fixed against the Gramian-inversion oracle
//! `phi(1) = alpha_1 . f(1)`: the convention implemented here is
//! `a_j = prod_i (lambda_i + lambda_j + 1) / prod_{i != j} (lambda_j - lambda_i)`,
//! which for `lambda = (0, 1)` gives `(-2, 6)`; flipping the denominator to
//! `lambda_i - lambda_j` would give `(2, -6)` and a kernel that fails
//! self-reproduction. Every Muntz construction re-validates against the
//! oracle before returning.

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisFunction, FunctionBasis};
use crate::error::Error;
use crate::paths::quad;
use crate::Result;

/// Closed-form tag carried by a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelForm {
    Muntz,
    Order1,
    Generic,
}

/// A Goursat-Volterra kernel `k(t,s) = phi*(t) . f(s)` on `s <= t`.
#[derive(Debug, Clone)]
pub struct GoursatKernel {
    basis: FunctionBasis,
    form: KernelForm,
    /// Present for Muntz kernels: exponents and oracle-validated coefficients.
    muntz: Option<MuntzClosedForm>,
}

#[derive(Debug, Clone)]
struct MuntzClosedForm {
    lambdas: Vec<f64>,
    coeffs: Vec<f64>,
}

impl GoursatKernel {
    /// Kernel from an arbitrary basis through the Gramian route; the Gramian
    /// is probed at `t = 1` so an unusable basis fails at construction.
    pub fn generic(basis: FunctionBasis) -> Result<Self> {
        basis.alpha(1.0)?;
        Ok(GoursatKernel {
            basis,
            form: KernelForm::Generic,
            muntz: None,
        })
    }

    /// Order-`n` Muntz kernel for distinct exponents `> -1/2`.
    pub fn muntz(lambdas: &[f64]) -> Result<Self> {
        let coeffs = muntz_coefficients(lambdas)?;
        let basis = FunctionBasis::powers(lambdas)?;
        // Validate the sign convention against the Gramian-inversion oracle.
        let oracle = basis.phi(1.0)?;
        for (j, &a) in coeffs.iter().enumerate() {
            let scale = oracle[j].abs().max(1.0);
            if (a - oracle[j]).abs() > 1e-9 * scale {
                return Err(Error::InvalidArgument(format!(
                    "Muntz coefficient {j} = {a} disagrees with the Gramian oracle {}",
                    oracle[j]
                )));
            }
        }
        Ok(GoursatKernel {
            basis,
            form: KernelForm::Muntz,
            muntz: Some(MuntzClosedForm {
                lambdas: lambdas.to_vec(),
                coeffs,
            }),
        })
    }

    /// The order-one kernel `k(t,v) = b(t) b(v) / int_0^t b^2`.
    pub fn order_one(b: BasisFunction) -> Result<Self> {
        let basis = FunctionBasis::new(vec![b])?;
        basis.alpha(1.0)?;
        Ok(GoursatKernel {
            basis,
            form: KernelForm::Order1,
            muntz: None,
        })
    }

    /// Test-only back door: a Muntz kernel with unvalidated coefficients,
    /// used by negative controls that need a deliberately corrupted kernel.
    #[doc(hidden)]
    pub fn muntz_unchecked(lambdas: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        let basis = FunctionBasis::powers(&lambdas)?;
        Ok(GoursatKernel {
            basis,
            form: KernelForm::Muntz,
            muntz: Some(MuntzClosedForm { lambdas, coeffs }),
        })
    }

    pub fn order(&self) -> usize {
        self.basis.n()
    }

    pub fn form(&self) -> KernelForm {
        self.form
    }

    pub fn basis(&self) -> &FunctionBasis {
        &self.basis
    }

    /// `phi(t)`, through the closed form when one exists.
    pub fn phi(&self, t: f64) -> Result<DVector<f64>> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        if let Some(mz) = &self.muntz {
            let v = mz
                .lambdas
                .iter()
                .zip(&mz.coeffs)
                .map(|(&l, &a)| a * t.powf(-l - 1.0))
                .collect::<Vec<_>>();
            return Ok(DVector::from_vec(v));
        }
        self.basis.phi(t)
    }

    /// `k(t,s)`; zero for `s > t`, NaN if the Gramian route fails (callers
    /// inside quadrature surface that as a non-finite-integrand error).
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        if s > t || s <= 0.0 || t <= 0.0 {
            return 0.0;
        }
        match self.phi(t) {
            Ok(phi) => phi.dot(&self.basis.eval_vector(s)),
            Err(_) => f64::NAN,
        }
    }
}

/// Coefficients of the Muntz kernel, with the denominator convention fixed
/// against the oracle `k(t,s) = f*(t) alpha_t f(s)` (see the module docs).
pub fn muntz_coefficients(lambdas: &[f64]) -> Result<Vec<f64>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("need at least one exponent".into()));
    }
    for &l in lambdas {
        if !(l.is_finite() && l > -0.5) {
            return Err(Error::InvalidArgument(format!(
                "Muntz exponents must be finite and > -1/2, got {l}"
            )));
        }
    }
    for i in 0..lambdas.len() {
        for j in i + 1..lambdas.len() {
            if (lambdas[i] - lambdas[j]).abs() < 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "Muntz exponents must be pairwise distinct, got {} twice",
                    lambdas[i]
                )));
            }
        }
    }
    let n = lambdas.len();
    let mut coeffs = Vec::with_capacity(n);
    for j in 0..n {
        let mut num = 1.0;
        let mut den = 1.0;
        for i in 0..n {
            num *= lambdas[i] + lambdas[j] + 1.0;
            if i != j {
                den *= lambdas[j] - lambdas[i];
            }
        }
        coeffs.push(num / den);
    }
    Ok(coeffs)
}

/// The classical kernel system `kappa_t(u,v) = f*(u) alpha_t f(v)` on
/// `(0, t]^2`; symmetric and reproducing over `[0, t]`, with boundary value
/// `kappa_t(t, s) = k(t, s)`.
#[derive(Debug, Clone)]
pub struct KernelSystem {
    pub t: f64,
    alpha: DMatrix<f64>,
    basis: FunctionBasis,
}

impl KernelSystem {
    pub fn eval(&self, u: f64, v: f64) -> Result<f64> {
        if !(u > 0.0 && v > 0.0 && u <= self.t && v <= self.t) {
            return Err(Error::InvalidArgument(format!(
                "kernel-system arguments must lie in (0, {}], got ({u}, {v})",
                self.t
            )));
        }
        let fu = self.basis.eval_vector(u);
        let fv = self.basis.eval_vector(v);
        Ok((fu.transpose() * &self.alpha * fv)[(0, 0)])
    }
}

/// Build the kernel system at time `t`.
pub fn kernel_system(basis: &FunctionBasis, t: f64) -> Result<KernelSystem> {
    let alpha = basis.alpha(t)?;
    Ok(KernelSystem {
        t,
        alpha,
        basis: basis.clone(),
    })
}

/// Residual of the self-reproduction identity
/// `k(t,s) - int_0^s k(t,u) k(s,u) du`, by adaptive quadrature.
pub fn check_self_reproduction(kernel: &GoursatKernel, t: f64, s: f64) -> Result<f64> {
    if !(t > 0.0 && s > 0.0 && s <= t) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < s <= t, got t = {t}, s = {s}"
        )));
    }
    let phi_t = kernel.phi(t)?;
    let phi_s = kernel.phi(s)?;
    let basis = kernel.basis().clone();
    let p = basis.singularity_power();
    let q = quad::integrate_left_singular(
        move |u| {
            let f = basis.eval_vector(u);
            phi_t.dot(&f) * phi_s.dot(&f)
        },
        s,
        p,
        1e-10,
    )?;
    Ok(kernel.eval(t, s) - q.value)
}

/// Residual of the tail reproduction identity
/// `k(t,s) - int_t^T k(u,t) k(u,s) du - f*(t) alpha_inf f(s) - tail(T)`,
/// with the tail in closed form where the basis admits one.
pub fn check_tail_reproduction(
    kernel: &GoursatKernel,
    t: f64,
    s: f64,
    horizon: f64,
) -> Result<f64> {
    if !(t > 0.0 && s > 0.0 && s <= t && horizon > t) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < s <= t < T, got t = {t}, s = {s}, T = {horizon}"
        )));
    }
    let basis = kernel.basis();
    let ft = basis.eval_vector(t);
    let fs = basis.eval_vector(s);

    let k2 = kernel.clone();
    let mid = quad::integrate(move |u| k2.eval(u, t) * k2.eval(u, s), t, horizon, 1e-10)?;

    let alpha_inf = basis.alpha_infinity()?.matrix;
    let inf_term = (ft.transpose() * &alpha_inf * &fs)[(0, 0)];

    let tail_matrix = match basis.phi_tail_outer_closed(horizon)? {
        Some(m) => m,
        None => basis.phi_outer_integral(horizon, 32.0 * horizon, 1e-9)?,
    };
    let tail_term = (ft.transpose() * &tail_matrix * &fs)[(0, 0)];

    Ok(kernel.eval(t, s) - mid.value - inf_term - tail_term)
}

/// Verdict of the square-integrability-style condition
/// `int_0^t ( int_0^u k^2(u,v) dv )^{1/2} du`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrability {
    Finite(f64),
    Divergent,
}

/// Evaluate the integrability condition by geometric shells toward zero.
/// Divergence is declared when the shell contributions stop decaying under
/// refinement (or the evaluation blows up near the origin), convergence when
/// the extrapolated tail falls below tolerance.
pub fn check_integrability(kernel: &GoursatKernel, t: f64) -> Result<Integrability> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    const REL_TOL: f64 = 1e-6;
    const MAX_SHELLS: usize = 200;
    let p = kernel.basis().singularity_power();

    // phi(u) is hoisted out of the inner quadrature: the integrand is
    // k(u,v)^2 = (phi(u).f(v))^2 with u fixed.
    let outer = |u: f64| -> f64 {
        let phi_u = match kernel.phi(u) {
            Ok(v) if v.iter().all(|x| x.is_finite()) => v,
            _ => return f64::NAN,
        };
        let basis = kernel.basis().clone();
        match quad::integrate_left_singular(
            move |v| phi_u.dot(&basis.eval_vector(v)).powi(2),
            u,
            p,
            1e-8,
        ) {
            Ok(q) if q.value.is_finite() && q.value >= 0.0 => q.value.sqrt(),
            _ => f64::NAN,
        }
    };

    let mut shells: Vec<f64> = Vec::new();
    let mut total = 0.0f64;
    let mut hi = t;
    for shell in 0..MAX_SHELLS {
        let lo = 0.5 * hi;
        let contribution = match quad::integrate(&outer, lo, hi, 1e-8) {
            Ok(q) => q.value,
            Err(Error::NonFiniteIntegrand { .. }) => return Ok(Integrability::Divergent),
            Err(_) => return Ok(Integrability::Divergent),
        };
        if !contribution.is_finite() {
            return Ok(Integrability::Divergent);
        }
        shells.push(contribution);
        total += contribution;
        hi = lo;

        if shell >= 11 {
            let recent: f64 = shells[shell - 5..=shell].iter().sum();
            let older: f64 = shells[shell - 11..shell - 5].iter().sum();
            if older > 0.0 && recent >= 0.98 * older {
                return Ok(Integrability::Divergent);
            }
            let head: f64 = shells[..6].iter().sum();
            if head > 0.0 && total > 10.0 * head {
                return Ok(Integrability::Divergent);
            }
        }
        if shell >= 2 {
            let prev = shells[shell - 1];
            if prev > 0.0 {
                let rho = (contribution / prev).min(0.95);
                let tail = contribution * rho / (1.0 - rho);
                if contribution <= REL_TOL * total.abs() && tail <= REL_TOL * total.abs() {
                    return Ok(Integrability::Finite(total + tail));
                }
            } else if contribution <= REL_TOL * total.abs() {
                return Ok(Integrability::Finite(total));
            }
        }
    }
    // Shell budget exhausted without a verdict; decide by the last decay.
    let m = shells.len();
    let recent: f64 = shells[m - 6..].iter().sum();
    let older: f64 = shells[m - 12..m - 6].iter().sum();
    if recent < older {
        Ok(Integrability::Finite(total))
    } else {
        Ok(Integrability::Divergent)
    }
}

/// Result of applying the kernel operator `K_f` to a step function.
#[derive(Debug, Clone)]
pub struct HardyReport {
    /// Grid shared with the input.
    pub times: Vec<f64>,
    /// `(K_f g)(u_j) = int_0^{u_j} k(u_j, r) g(r) dr` by left Riemann sums.
    pub transformed: Vec<f64>,
    pub input_norm: f64,
    pub output_norm: f64,
    /// `||K_f g|| / ||g||`; the generalized Hardy inequality bounds it by 2.
    pub ratio: f64,
}

/// Apply `K_f` to a step function tabulated on a strictly increasing grid in
/// `(0, t]` whose last point is `t`; left-endpoint Riemann sums throughout.
pub fn hardy_apply(
    kernel: &GoursatKernel,
    times: &[f64],
    values: &[f64],
    t: f64,
) -> Result<HardyReport> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::InvalidArgument(
            "step function needs matching times/values, len >= 2".into(),
        ));
    }
    if times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "step-function times must be strictly increasing and positive".into(),
        ));
    }
    if (times[times.len() - 1] - t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "last grid time {} must equal t = {t}",
            times[times.len() - 1]
        )));
    }

    let m = times.len();
    let widths: Vec<f64> = (0..m - 1).map(|i| times[i + 1] - times[i]).collect();

    let mut transformed = vec![0.0; m];
    for j in 0..m {
        let mut acc = 0.0;
        for i in 0..j {
            acc += kernel.eval(times[j], times[i]) * values[i] * widths[i];
        }
        transformed[j] = acc;
    }

    let norm = |vals: &[f64]| -> f64 {
        (0..m - 1)
            .map(|i| vals[i] * vals[i] * widths[i])
            .sum::<f64>()
            .sqrt()
    };
    let input_norm = norm(values);
    let output_norm = norm(&transformed);
    let ratio = if input_norm > 0.0 {
        output_norm / input_norm
    } else {
        0.0
    };

    Ok(HardyReport {
        times: times.to_vec(),
        transformed,
        input_norm,
        output_norm,
        ratio,
    })
}

/// Parse a kernel specification: `muntz <l1,l2,...>`, `order1 <basis fn>`,
/// `constant`, or `generic <basis spec or file>`.
pub fn parse_kernel(spec: &str) -> Result<GoursatKernel> {
    let trimmed = spec.trim();
    if trimmed == "constant" {
        return GoursatKernel::muntz(&[0.0]);
    }
    if let Some(rest) = trimmed.strip_prefix("muntz") {
        let lambdas = rest
            .trim()
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad exponent '{s}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        return GoursatKernel::muntz(&lambdas);
    }
    if let Some(rest) = trimmed.strip_prefix("order1") {
        let basis = crate::basis::parse_basis(rest.trim())?;
        if basis.n() != 1 {
            return Err(Error::Config(
                "order1 takes exactly one basis function".into(),
            ));
        }
        return GoursatKernel::order_one(basis.functions()[0].clone());
    }
    if let Some(rest) = trimmed.strip_prefix("generic") {
        let arg = rest.trim();
        let text = if std::path::Path::new(arg).is_file() {
            std::fs::read_to_string(arg)
                .map_err(|e| Error::Config(format!("cannot read {arg}: {e}")))?
        } else {
            arg.to_string()
        };
        return GoursatKernel::generic(crate::basis::parse_basis(&text)?);
    }
    Err(Error::Config(format!("unknown kernel spec '{spec}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Table;
    use approx::assert_relative_eq;

    #[test]
    fn muntz_coefficients_singleton() {
        // lambda = (0): a = (1), the simplest kernel k(t,s) = 1/t.
        assert_eq!(muntz_coefficients(&[0.0]).unwrap(), vec![1.0]);
        // Any singleton: a = 2 lambda + 1 (empty denominator product).
        for l in [0.5, 1.0, -0.3, 2.5] {
            let a = muntz_coefficients(&[l]).unwrap();
            assert_relative_eq!(a[0], 2.0 * l + 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn muntz_coefficients_pair_fixed_against_oracle() {
        // The oracle k(t,s) = f*(t) alpha_t f(s) forces (-2, 6); the other
        // denominator convention would give (2, -6).
        let a = muntz_coefficients(&[0.0, 1.0]).unwrap();
        assert_eq!(a, vec![-2.0, 6.0]);
        let oracle = FunctionBasis::powers(&[0.0, 1.0])
            .unwrap()
            .phi(1.0)
            .unwrap();
        assert!((a[0] - oracle[0]).abs() < 1e-10);
        assert!((a[1] - oracle[1]).abs() < 1e-10);
    }

    #[test]
    fn muntz_coefficients_triple_match_hilbert_inverse_oracle() {
        // For lambda = (0,1,2), m_1 is the 3x3 Hilbert matrix whose exact
        // inverse has row sums (3, -24, 30) = phi(1).
        let a = muntz_coefficients(&[0.0, 1.0, 2.0]).unwrap();
        assert_relative_eq!(a[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(a[1], -24.0, max_relative = 1e-12);
        assert_relative_eq!(a[2], 30.0, max_relative = 1e-12);
        let oracle = FunctionBasis::powers(&[0.0, 1.0, 2.0])
            .unwrap()
            .phi(1.0)
            .unwrap();
        for j in 0..3 {
            assert_relative_eq!(a[j], oracle[j], max_relative = 1e-8);
        }
    }

    #[test]
    fn muntz_coefficients_reject_bad_exponents() {
        assert!(muntz_coefficients(&[]).is_err());
        assert!(muntz_coefficients(&[0.0, 0.0]).is_err());
        assert!(muntz_coefficients(&[-0.5]).is_err());
        assert!(muntz_coefficients(&[0.2, -0.7]).is_err());
    }

    #[test]
    fn muntz_kernel_values() {
        let k1 = GoursatKernel::muntz(&[0.0]).unwrap();
        assert_relative_eq!(k1.eval(2.0, 1.0), 0.5, max_relative = 1e-14);

        let k01 = GoursatKernel::muntz(&[0.0, 1.0]).unwrap();
        // k(1, s) = -2 + 6s
        assert_relative_eq!(k01.eval(1.0, 0.5), 1.0, max_relative = 1e-12);
        // k(1, 1) = f*(1) alpha_1 f(1) = 4
        assert_relative_eq!(k01.eval(1.0, 1.0), 4.0, max_relative = 1e-12);
        // Volterra: zero above the diagonal.
        assert_eq!(k01.eval(1.0, 1.5), 0.0);
    }

    #[test]
    fn muntz_alpha_entries_closed_form() {
        // (alpha_t)_{ij} = a_i a_j (l_i + l_j + 1)^{-1} t^{-l_i - l_j - 1}.
        let lam = [0.0, 1.0];
        let a = muntz_coefficients(&lam).unwrap();
        let basis = FunctionBasis::powers(&lam).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let alpha = basis.alpha(t).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let s = lam[i] + lam[j] + 1.0;
                    let expected = a[i] * a[j] / s * t.powf(-s);
                    assert_relative_eq!(alpha[(i, j)], expected, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn generic_agrees_with_muntz_closed_form() {
        let muntz = GoursatKernel::muntz(&[0.0, 1.0]).unwrap();
        let generic = GoursatKernel::generic(FunctionBasis::powers(&[0.0, 1.0]).unwrap()).unwrap();
        for ti in 1..=10 {
            let t = 0.2 + 0.2 * ti as f64;
            for si in 1..=10 {
                let s = t * si as f64 / 10.0;
                let a = muntz.eval(t, s);
                let b = generic.eval(t, s);
                assert!(
                    (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                    "({t}, {s}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn order_one_constant_reduces_to_simplest_kernel() {
        let k = GoursatKernel::order_one(BasisFunction::constant()).unwrap();
        for (t, v) in [(1.0, 0.3), (2.5, 1.0)] {
            assert_relative_eq!(k.eval(t, v), 1.0 / t, max_relative = 1e-12);
        }
    }

    #[test]
    fn order_one_linear_matches_muntz_oracle() {
        // b(s) = s: k(t,v) = t v / (t^3/3) = 3 v / t^2 = muntz kernel for (1).
        let k = GoursatKernel::order_one(BasisFunction::power(1.0).unwrap()).unwrap();
        let oracle = GoursatKernel::muntz(&[1.0]).unwrap();
        for (t, v) in [(1.0, 0.4), (2.0, 1.7), (0.5, 0.5)] {
            assert_relative_eq!(k.eval(t, v), 3.0 * v / (t * t), max_relative = 1e-10);
            assert_relative_eq!(k.eval(t, v), oracle.eval(t, v), max_relative = 1e-10);
        }
    }

    #[test]
    fn kernel_system_constant_basis_is_one_over_t() {
        let basis = FunctionBasis::new(vec![BasisFunction::constant()]).unwrap();
        let sys = kernel_system(&basis, 2.0).unwrap();
        for (u, v) in [(0.5, 1.0), (2.0, 0.1)] {
            assert_relative_eq!(sys.eval(u, v).unwrap(), 0.5, max_relative = 1e-12);
        }
        assert!(sys.eval(2.5, 1.0).is_err());
        assert!(sys.eval(0.0, 1.0).is_err());
    }

    #[test]
    fn kernel_system_boundary_identity_and_symmetry() {
        let basis = FunctionBasis::powers(&[0.0, 1.0]).unwrap();
        let kernel = GoursatKernel::muntz(&[0.0, 1.0]).unwrap();
        let sys = kernel_system(&basis, 1.0).unwrap();
        for s in [0.2, 0.5, 0.9, 1.0] {
            assert_relative_eq!(
                sys.eval(1.0, s).unwrap(),
                kernel.eval(1.0, s),
                epsilon = 1e-8
            );
            assert_relative_eq!(sys.eval(1.0, s).unwrap(), -2.0 + 6.0 * s, epsilon = 1e-9);
        }
        let (u, v) = (0.3, 0.7);
        assert_relative_eq!(
            sys.eval(u, v).unwrap(),
            sys.eval(v, u).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn kernel_system_reproduces_itself_under_quadrature() {
        let basis = FunctionBasis::powers(&[0.0, 1.0]).unwrap();
        let sys = kernel_system(&basis, 1.0).unwrap();
        let (u, v) = (0.3, 0.7);
        let sysq = sys.clone();
        let q = crate::paths::quad::integrate(
            move |r| sysq.eval(u, r).unwrap() * sysq.eval(v, r).unwrap(),
            0.0,
            1.0,
            1e-12,
        )
        .unwrap();
        assert!((q.value - sys.eval(u, v).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn self_reproduction_simplest_kernel_is_exact() {
        let k = GoursatKernel::muntz(&[0.0]).unwrap();
        let r = check_self_reproduction(&k, 2.0, 1.0).unwrap();
        assert!(r.abs() < 1e-12, "residual {r}");
    }

    #[test]
    fn self_reproduction_muntz_and_order_one() {
        let k = GoursatKernel::muntz(&[0.0, 1.0]).unwrap();
        let r = check_self_reproduction(&k, 1.0, 0.5).unwrap();
        assert!(r.abs() <= 1e-8, "residual {r}");

        let e = GoursatKernel::order_one(BasisFunction::exponential(1.0).unwrap()).unwrap();
        let r = check_self_reproduction(&e, 2.0, 1.0).unwrap();
        assert!(r.abs() <= 1e-8, "residual {r}");
    }

    #[test]
    fn self_reproduction_with_negative_exponent_singularity() {
        let k = GoursatKernel::muntz(&[-0.4, 0.3]).unwrap();
        let r = check_self_reproduction(&k, 1.0, 0.6).unwrap();
        assert!(r.abs() <= 1e-7, "residual {r}");
    }

    #[test]
    fn tail_reproduction_residuals() {
        // Constant: exact cancellation analytically.
        let k = GoursatKernel::muntz(&[0.0]).unwrap();
        let r = check_tail_reproduction(&k, 1.0, 0.5, 50.0).unwrap();
        assert!(r.abs() <= 1e-9, "constant residual {r}");

        let k = GoursatKernel::muntz(&[0.0, 1.0]).unwrap();
        let r = check_tail_reproduction(&k, 1.0, 0.5, 12.0).unwrap();
        assert!(r.abs() <= 1e-6, "muntz residual {r}");

        // Exponential basis: the alpha_inf term carries the mass.
        let k = GoursatKernel::order_one(BasisFunction::exponential(1.0).unwrap()).unwrap();
        let r = check_tail_reproduction(&k, 1.0, 0.5, 12.0).unwrap();
        assert!(r.abs() <= 1e-6, "exponential residual {r}");
    }

    #[test]
    fn integrability_finite_for_simplest_kernel() {
        // int_0^t u^{-1/2} du = 2 sqrt(t).
        let k = GoursatKernel::muntz(&[0.0]).unwrap();
        for t in [1.0, 2.0] {
            match check_integrability(&k, t).unwrap() {
                Integrability::Finite(v) => {
                    assert_relative_eq!(v, 2.0 * t.sqrt(), max_relative = 1e-4)
                }
                Integrability::Divergent => panic!("1/t kernel must be integrable"),
            }
        }
    }

    #[test]
    fn integrability_finite_for_order_one_linear() {
        let k = GoursatKernel::order_one(BasisFunction::power(1.0).unwrap()).unwrap();
        match check_integrability(&k, 1.0).unwrap() {
            // F(u) = sqrt(3)/u^{1/2} gives 2 sqrt(3 t) ... sqrt(k(u,u)) with
            // k(u,u) = 3/u, so int = 2 sqrt(3).
            Integrability::Finite(v) => {
                assert_relative_eq!(v, 2.0 * 3.0f64.sqrt(), max_relative = 1e-4)
            }
            Integrability::Divergent => panic!("order-one linear kernel must be integrable"),
        }
    }

    #[test]
    fn integrability_divergent_for_flat_exponential_factor() {
        // b(t) = t^{-1} e^{-1/t}: int_0^u b^2 = e^{-2/u}/2, so the condition
        // integrand is sqrt(2)/u and the integral diverges at 0.
        let m = 600;
        let times: Vec<f64> = (0..m)
            .map(|k| 1e-9 * (2.0f64 / 1e-9).powf(k as f64 / (m - 1) as f64))
            .collect();
        let values: Vec<f64> = times.iter().map(|&t| (-1.0 / t).exp() / t).collect();
        let b = BasisFunction::tabulated(Table::new(times, values).unwrap());
        let k = GoursatKernel::order_one(b).unwrap();
        assert_eq!(
            check_integrability(&k, 1.0).unwrap(),
            Integrability::Divergent
        );
    }

    #[test]
    fn hardy_zero_input_gives_zero_ratio() {
        let k = GoursatKernel::muntz(&[0.0]).unwrap();
        let times: Vec<f64> = (1..=64).map(|i| i as f64 / 64.0).collect();
        let values = vec![0.0; 64];
        let report = hardy_apply(&k, &times, &values, 1.0).unwrap();
        assert_eq!(report.ratio, 0.0);
        assert!(report.transformed.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hardy_constant_input_simplest_kernel() {
        // (K g)(u) = (1/u) int_0^u 1 = 1 for g = 1; ratio about 1 <= 2.
        let k = GoursatKernel::muntz(&[0.0]).unwrap();
        let m = 512;
        let times: Vec<f64> = (1..=m).map(|i| i as f64 / m as f64).collect();
        let values = vec![1.0; m];
        let report = hardy_apply(&k, &times, &values, 1.0).unwrap();
        let mid = report.transformed[m / 2];
        assert!((mid - 1.0).abs() < 0.01, "K g at midpoint: {mid}");
        assert!(report.ratio <= 2.0, "ratio {}", report.ratio);
    }

    #[test]
    fn hardy_random_step_functions_stay_below_bound() {
        use rand::Rng;
        use rand::SeedableRng;
        let k = GoursatKernel::muntz(&[0.0, 1.0]).unwrap();
        let m = 256;
        let times: Vec<f64> = (1..=m).map(|i| i as f64 / m as f64).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let values: Vec<f64> = (0..m)
                .map(|_| {
                    let u: f64 = rng.random();
                    2.0 * u - 1.0
                })
                .collect();
            let report = hardy_apply(&k, &times, &values, 1.0).unwrap();
            assert!(report.ratio <= 2.05, "Hardy ratio {}", report.ratio);
        }
    }

    #[test]
    fn parse_kernel_specifications() {
        assert_eq!(parse_kernel("constant").unwrap().order(), 1);
        assert_eq!(parse_kernel("muntz 0,1,2.5").unwrap().order(), 3);
        let k = parse_kernel("order1 exp rate=1").unwrap();
        assert_eq!(k.form(), KernelForm::Order1);
        let g = parse_kernel("generic const; power lambda=1").unwrap();
        assert_eq!(g.form(), KernelForm::Generic);
        assert_eq!(g.order(), 2);
        assert!(parse_kernel("muntz ").is_err());
        assert!(parse_kernel("nope").is_err());
    }
}
