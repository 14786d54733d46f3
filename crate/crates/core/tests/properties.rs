//! Property tests for the algebraic identities: random bases, random
//! kernels, random evaluation points.

use goursat::basis::{BasisFunction, FunctionBasis};
use goursat::error::Error;
use goursat::kernel::{check_self_reproduction, hardy_apply, GoursatKernel};
use goursat::paths::quad;
use goursat::paths::TimeGrid;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random basis of 1..=3 functions with separated power exponents.
fn basis_strategy() -> impl Strategy<Value = FunctionBasis> {
    let func = prop_oneof![
        Just(FunctionKind::Constant),
        (-0.4f64..2.5).prop_map(FunctionKind::Power),
        (0.2f64..3.0).prop_map(FunctionKind::Exponential),
    ];
    proptest::collection::vec(func, 1..=3).prop_filter_map("separated exponents", |kinds| {
        let mut exps: Vec<f64> = Vec::new();
        let mut funcs = Vec::new();
        for k in kinds {
            match k {
                FunctionKind::Constant => {
                    exps.push(0.0);
                    funcs.push(BasisFunction::constant());
                }
                FunctionKind::Power(l) => {
                    exps.push(l);
                    funcs.push(BasisFunction::power(l).unwrap());
                }
                FunctionKind::Exponential(r) => {
                    funcs.push(BasisFunction::exponential(r).unwrap());
                }
            }
        }
        // Nearly repeated power exponents make the Gramian numerically
        // singular; keep them separated.
        exps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if exps.windows(2).any(|w| (w[1] - w[0]).abs() < 0.2) {
            return None;
        }
        Some(FunctionBasis::new(funcs).unwrap())
    })
}

#[derive(Clone, Debug)]
enum FunctionKind {
    Constant,
    Power(f64),
    Exponential(f64),
}

fn identity_gap(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - target).abs());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gramian_inverse_and_symmetry(basis in basis_strategy(), t in 0.3f64..3.0) {
        let state = match basis.gramian_state(t) {
            Ok(s) => s,
            Err(Error::IllConditioned { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        };
        prop_assert!(identity_gap(&(&state.m * &state.alpha)) < 1e-9);
        prop_assert!((&state.alpha - state.alpha.transpose()).abs().max() < 1e-12);
        for i in 0..basis.n() {
            prop_assert!(state.m[(i, i)] > 0.0);
            prop_assert!(state.alpha[(i, i)] > 0.0);
            prop_assert!(state.alpha[(i, i)] >= 1.0 / state.m[(i, i)] - 1e-10);
        }
    }

    #[test]
    fn orthonormal_factor_reproduces_inverse(basis in basis_strategy(), t in 0.3f64..3.0) {
        let alpha = match basis.alpha(t) {
            Ok(a) => a,
            Err(Error::IllConditioned { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        };
        let sys = basis.orthonormalize(t).unwrap();
        let scale = alpha.abs().max().max(1.0);
        prop_assert!((sys.bbt() - &alpha).abs().max() <= 1e-7 * scale);
        // q = b* f is orthonormal under the Gramian inner product.
        let m = basis.gramian(t).unwrap();
        prop_assert!(identity_gap(&(sys.b.transpose() * &m * &sys.b)) < 1e-8);
    }

    #[test]
    fn muntz_closed_form_agrees_with_generic(
        raw in proptest::collection::vec(-0.35f64..2.5, 1..=3),
        t in 0.4f64..2.0,
        frac in 0.05f64..1.0,
    ) {
        let mut lambdas = raw;
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if lambdas.windows(2).any(|w| w[1] - w[0] < 0.25) {
            return Ok(());
        }
        let muntz = GoursatKernel::muntz(&lambdas).unwrap();
        let generic = GoursatKernel::generic(FunctionBasis::powers(&lambdas).unwrap()).unwrap();
        let s = frac * t;
        let a = muntz.eval(t, s);
        let b = generic.eval(t, s);
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn self_reproduction_holds_for_random_order_one_kernels(
        rate in 0.2f64..2.5,
        t in 0.4f64..2.0,
        frac in 0.1f64..1.0,
    ) {
        let kernel = GoursatKernel::order_one(BasisFunction::exponential(rate).unwrap()).unwrap();
        let s = frac * t;
        let residual = check_self_reproduction(&kernel, t, s).unwrap();
        prop_assert!(residual.abs() <= 1e-7 * kernel.eval(t, s).abs().max(1.0));
    }

    #[test]
    fn hardy_ratio_bounded_for_random_steps(
        values in proptest::collection::vec(-1.0f64..1.0, 64),
        lambda in -0.3f64..1.5,
    ) {
        let kernel = GoursatKernel::muntz(&[lambda]).unwrap();
        let m = values.len();
        let times: Vec<f64> = (1..=m).map(|i| i as f64 / m as f64).collect();
        let report = hardy_apply(&kernel, &times, &values, 1.0).unwrap();
        prop_assert!(report.ratio <= 2.05, "ratio {}", report.ratio);
    }

    #[test]
    fn quadrature_integrates_polynomials_exactly(
        c0 in -2.0f64..2.0,
        c1 in -2.0f64..2.0,
        c2 in -2.0f64..2.0,
        b in 0.2f64..3.0,
    ) {
        let q = quad::integrate(|x| c0 + c1 * x + c2 * x * x, 0.0, b, 1e-12).unwrap();
        let exact = c0 * b + c1 * b * b / 2.0 + c2 * b * b * b / 3.0;
        prop_assert!((q.value - exact).abs() <= 1e-10 * exact.abs().max(1.0));
    }

    #[test]
    fn quadrature_power_substitution_handles_singular_exponents(
        gamma in -0.9f64..-0.1,
        b in 0.2f64..2.0,
    ) {
        let p = 1.0 / (gamma + 1.0);
        let q = quad::integrate_left_singular(|s| s.powf(gamma), b, p, 1e-11).unwrap();
        let exact = b.powf(gamma + 1.0) / (gamma + 1.0);
        prop_assert!((q.value - exact).abs() <= 1e-8 * exact.abs());
    }

    #[test]
    fn grids_are_strictly_increasing_and_anchored(
        eps_exp in -6.0f64..-2.0,
        ratio in 1.05f64..1.8,
        steps in 200usize..3000,
        t_end in 0.5f64..4.0,
    ) {
        let eps0 = t_end * 10f64.powf(eps_exp);
        let delta = t_end / steps as f64;
        let grid = TimeGrid::singularity_aware(eps0, ratio, delta, t_end).unwrap();
        prop_assert_eq!(grid.times()[0], eps0);
        prop_assert_eq!(*grid.times().last().unwrap(), t_end);
        prop_assert!(grid.times().windows(2).all(|w| w[1] > w[0]));
        // Geometric section respects the ratio until the uniform body.
        let refined = grid.refined();
        prop_assert_eq!(refined.len(), 2 * grid.len());
    }

    #[test]
    fn laguerre_recurrence_matches_explicit_low_degrees(x in 0.0f64..5.0) {
        use goursat::transform::laguerre;
        let l4 = 1.0 - 4.0 * x + 3.0 * x * x - x * x * x / 1.5 + x.powi(4) / 24.0;
        prop_assert!((laguerre(4, x) - l4).abs() <= 1e-10 * l4.abs().max(1.0));
    }
}
