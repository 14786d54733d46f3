//! End-to-end verification suite: one runner per numbered claim.
//!
//! Each criterion measures a stated identity or Gaussian-law consequence at
//! desk scale and returns a structured result. Numeric pass/fail is kept
//! separate from wall-clock limits so written artifacts stay byte-identical
//! across machines; callers that care about runtime check `runtime_ok`.

use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::basis::{BasisFunction, FunctionBasis};
use crate::bridge::{generalized_bridge, sde_solution, BridgeSpec, EndpointSource, SolutionSpec};
use crate::harmonic::{martingale_check, EndpointLaw};
use crate::kernel::{check_self_reproduction, hardy_apply, muntz_coefficients, GoursatKernel};
use crate::paths::{ensemble, ito_integral, sample_brownian, RngSpec, TimeGrid};
use crate::stats::{
    covariance_estimate, independence_report, mean_estimate, transform_features, variance_estimate,
};
use crate::transform::{
    iterate_transform, laguerre_transform, particular_solution, recover_endpoint,
};
use crate::Result;

/// Outcome of one suite criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: &'static str,
    pub title: &'static str,
    /// Numeric checks passed (runtime limits are judged separately so that
    /// written artifacts stay byte-deterministic).
    pub pass: bool,
    /// Named measured quantities, in a stable order.
    pub metrics: Vec<(String, f64)>,
    pub notes: Vec<String>,
    pub runtime: Duration,
    pub runtime_limit: Option<Duration>,
}

impl CriterionResult {
    pub fn runtime_ok(&self) -> bool {
        match self.runtime_limit {
            Some(limit) => self.runtime <= limit,
            None => true,
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} {}: {}",
            self.id,
            self.title,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

fn run_criterion(
    id: &'static str,
    title: &'static str,
    limit: Option<Duration>,
    body: impl FnOnce(&mut Vec<(String, f64)>, &mut Vec<String>) -> Result<bool>,
) -> CriterionResult {
    let start = Instant::now();
    let mut metrics = Vec::new();
    let mut notes = Vec::new();
    let pass = match body(&mut metrics, &mut notes) {
        Ok(p) => p,
        Err(e) => {
            notes.push(format!("error: {e}"));
            false
        }
    };
    CriterionResult {
        id,
        title,
        pass,
        metrics,
        notes,
        runtime: start.elapsed(),
        runtime_limit: limit,
    }
}

fn exp_basis() -> FunctionBasis {
    FunctionBasis::new(vec![BasisFunction::exponential(1.0).unwrap()]).unwrap()
}

/// c1: inverse-Gramian identity `alpha_t = int_t^inf phi phi* du + alpha_inf`
/// with analytic tails, entrywise below 1e-6 at t in {0.5, 1, 2}.
pub fn criterion_1() -> CriterionResult {
    run_criterion(
        "c1",
        "inverse-Gramian identity (analytic tails)",
        Some(Duration::from_secs(1)),
        |metrics, _notes| {
            let mut worst = 0.0f64;
            for (name, basis) in [
                ("muntz01", FunctionBasis::powers(&[0.0, 1.0])?),
                ("exp1", exp_basis()),
            ] {
                for t in [0.5, 1.0, 2.0] {
                    let residual = basis.alpha_identity_residual(t, 8.0)?;
                    let r = residual.abs().max();
                    metrics.push((format!("{name}_t{t}_max_residual"), r));
                    worst = worst.max(r);
                }
            }
            metrics.push(("worst_residual".into(), worst));
            Ok(worst <= 1e-6)
        },
    )
}

/// c2: self-reproduction residual, relative to `max(|k(t,s)|, 1)`, below
/// 1e-6 on a 10x10 (t, s) grid for the four shipped kernels.
pub fn criterion_2() -> CriterionResult {
    run_criterion(
        "c2",
        "self-reproduction on a 10x10 grid",
        Some(Duration::from_secs(10)),
        |metrics, _notes| {
            let kernels: Vec<(&str, GoursatKernel)> = vec![
                ("constant", GoursatKernel::muntz(&[0.0])?),
                ("muntz01", GoursatKernel::muntz(&[0.0, 1.0])?),
                ("muntz012", GoursatKernel::muntz(&[0.0, 1.0, 2.0])?),
                (
                    "order1exp",
                    GoursatKernel::order_one(BasisFunction::exponential(1.0)?)?,
                ),
            ];
            let mut worst = 0.0f64;
            for (name, kernel) in &kernels {
                let mut kernel_worst = 0.0f64;
                for i in 1..=10 {
                    let t = 0.25 * i as f64;
                    for j in 1..=10 {
                        let s = t * j as f64 / 10.0;
                        let residual = check_self_reproduction(kernel, t, s)?;
                        let rel = residual.abs() / kernel.eval(t, s).abs().max(1.0);
                        kernel_worst = kernel_worst.max(rel);
                    }
                }
                metrics.push((format!("{name}_max_relative_residual"), kernel_worst));
                worst = worst.max(kernel_worst);
            }
            metrics.push(("worst_relative_residual".into(), worst));
            Ok(worst <= 1e-6)
        },
    )
}

/// c3: Muntz coefficients for (0, 1) equal (-2, 6), matching the 2x2
/// Gramian-inversion oracle exactly; the printed-formula discrepancy is
/// recorded in the notes.
pub fn criterion_3() -> CriterionResult {
    run_criterion(
        "c3",
        "oracle-fixed Muntz coefficients",
        None,
        |metrics, notes| {
            let coeffs = muntz_coefficients(&[0.0, 1.0])?;
            // Independent oracle: cofactor inversion of the Cauchy matrix m_1,
            // then phi(1) = alpha_1 . f(1). 6 m_1 = [[6,3],[3,2]] is integer, so
            // the inversion is exact: alpha_1 = [[4,-6],[-6,12]].
            let (s11, s12, s22) = (6.0, 3.0, 2.0);
            let det = s11 * s22 - s12 * s12;
            let alpha = [6.0 * s22 / det, -6.0 * s12 / det, 6.0 * s11 / det];
            let oracle = [alpha[0] + alpha[1], alpha[1] + alpha[2]];
            metrics.push(("a1".into(), coeffs[0]));
            metrics.push(("a2".into(), coeffs[1]));
            metrics.push(("oracle_a1".into(), oracle[0]));
            metrics.push(("oracle_a2".into(), oracle[1]));
            notes.push(
            "flipped denominator convention would give (2, -6); the Gramian oracle forces (-2, 6)"
                .into(),
        );
            Ok(coeffs[0] == -2.0
                && coeffs[1] == 6.0
                && coeffs[0] == oracle[0]
                && coeffs[1] == oracle[1])
        },
    )
}

const C4_TIMES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// c4: Wiener-measure preservation: cov(Sigma(B)_s, Sigma(B)_t) = min(s, t)
/// within 4 SE on a 4x4 grid for the constant and Muntz(0,1) kernels,
/// N = 20000, delta = 5e-4, eps0 = 1e-4.
pub fn criterion_4(seed: u64) -> CriterionResult {
    run_criterion(
        "c4",
        "Wiener-measure preservation",
        Some(Duration::from_secs(120)),
        |metrics, _notes| {
            let grid = TimeGrid::singularity_aware(1e-4, 1.2, 5e-4, 1.0)?;
            let spec = RngSpec::new(seed);
            let n = 20_000;
            let mut pass = true;
            for (name, kernel) in [
                ("constant", GoursatKernel::muntz(&[0.0])?),
                ("muntz01", GoursatKernel::muntz(&[0.0, 1.0])?),
            ] {
                let features = transform_features(&kernel, &grid, &spec, n, 1.0, &C4_TIMES)?;
                let mut worst_sigmas = 0.0f64;
                for (i, &s) in C4_TIMES.iter().enumerate() {
                    for (j, &t) in C4_TIMES.iter().enumerate() {
                        if j < i {
                            continue;
                        }
                        let a: Vec<f64> = features.iter().map(|f| f.sigma_at[i]).collect();
                        let b: Vec<f64> = features.iter().map(|f| f.sigma_at[j]).collect();
                        let est = covariance_estimate(&a, &b)?;
                        let sigmas = est.sigmas_from(s.min(t));
                        worst_sigmas = worst_sigmas.max(sigmas);
                    }
                }
                metrics.push((format!("{name}_worst_cov_sigmas"), worst_sigmas));
                pass &= worst_sigmas <= 4.0;
            }
            Ok(pass)
        },
    )
}

/// c5: independence surrogate: correlations between the components of
/// `I_1(B)` and `Sigma(B)` at 8 times stay inside 4 SE (at most one
/// violation), and the negative control corr(I_t, B) breaks the band.
pub fn criterion_5(seed: u64) -> CriterionResult {
    run_criterion(
        "c5",
        "independence surrogate + negative control",
        None,
        |metrics, _notes| {
            let grid = TimeGrid::singularity_aware(1e-4, 1.2, 5e-4, 1.0)?;
            let spec = RngSpec::new(seed);
            let n = 20_000;
            let times: Vec<f64> = (1..=8).map(|k| 0.125 * k as f64).collect();
            let mut pass = true;
            for (name, kernel) in [
                ("constant", GoursatKernel::muntz(&[0.0])?),
                ("muntz01", GoursatKernel::muntz(&[0.0, 1.0])?),
            ] {
                let features = transform_features(&kernel, &grid, &spec, n, 1.0, &times)?;
                let i_comps: Vec<DVector<f64>> = features.iter().map(|f| f.i_t.clone()).collect();
                let sigma: Vec<Vec<f64>> = features.iter().map(|f| f.sigma_at.clone()).collect();
                let report = independence_report(&i_comps, &sigma)?;
                metrics.push((format!("{name}_violations"), report.violations as f64));
                metrics.push((
                    format!("{name}_max_abs_corr"),
                    report.correlations.abs().max(),
                ));
                pass &= report.violations <= 1;

                if name == "constant" {
                    // Negative control: B itself correlates with I_t(B).
                    let b: Vec<Vec<f64>> = features.iter().map(|f| f.b_at.clone()).collect();
                    let control = independence_report(&i_comps, &b)?;
                    let max_corr = control.correlations.abs().max();
                    metrics.push(("negative_control_max_abs_corr".into(), max_corr));
                    pass &= max_corr > 4.0 * control.entry_se;
                }
            }
            Ok(pass)
        },
    )
}

/// c6: bridge identities: the recomputed endpoint integral returns `y`
/// within 5e-3 and `sup |Sigma(B^y) - Sigma(B)| <= 5e-3`, 100 paths.
pub fn criterion_6(seed: u64) -> CriterionResult {
    run_criterion(
        "c6",
        "bridge endpoint and transform invariance",
        Some(Duration::from_secs(30)),
        |metrics, _notes| {
            let grid = TimeGrid::singularity_aware(1e-4, 1.2, 5e-4, 1.0)?;
            let spec = RngSpec::new(seed);
            let scalar = FunctionBasis::new(vec![BasisFunction::constant()])?;
            let muntz = FunctionBasis::powers(&[0.0, 1.0])?;
            let cases: Vec<(&str, FunctionBasis, GoursatKernel, Vec<f64>)> = vec![
                (
                    "scalar_y0",
                    scalar,
                    GoursatKernel::muntz(&[0.0])?,
                    vec![0.0],
                ),
                (
                    "muntz_y0",
                    muntz.clone(),
                    GoursatKernel::muntz(&[0.0, 1.0])?,
                    vec![0.0, 0.0],
                ),
                (
                    "muntz_y1m2",
                    muntz,
                    GoursatKernel::muntz(&[0.0, 1.0])?,
                    vec![1.0, -2.0],
                ),
            ];
            let mut pass = true;
            for (name, basis, kernel, y) in cases {
                let bridge_spec =
                    BridgeSpec::new(basis.clone(), 1.0, DVector::from_vec(y.clone()))?;
                let mut worst_endpoint = 0.0f64;
                let mut worst_sup = 0.0f64;
                for idx in 0..100u64 {
                    let b = sample_brownian(&grid, &spec, idx);
                    let bridge = generalized_bridge(&bridge_spec, &b)?;
                    let i_t1 = ito_integral(&basis, &bridge).final_vector();
                    for c in 0..basis.n() {
                        worst_endpoint = worst_endpoint.max((i_t1[c] - y[c]).abs());
                    }
                    let sigma_b = crate::transform::volterra_transform(&kernel, &b)?.output;
                    let sigma_bridge =
                        crate::transform::volterra_transform(&kernel, &bridge)?.output;
                    let sup = sigma_bridge
                        .values
                        .iter()
                        .zip(&sigma_b.values)
                        .map(|(a, c)| (a - c).abs())
                        .fold(0.0f64, f64::max);
                    worst_sup = worst_sup.max(sup);
                }
                metrics.push((format!("{name}_worst_endpoint_error"), worst_endpoint));
                metrics.push((format!("{name}_worst_transform_gap"), worst_sup));
                pass &= worst_endpoint <= 5e-3 && worst_sup <= 5e-3;
            }
            Ok(pass)
        },
    )
}

/// c7: solution-family closed loop: a planted vector (1, -2) is recovered at
/// T = 8 within 4 SE over 5000 paths (Muntz basis), and with
/// `Y ~ N(0, alpha_inf)` on the exponential basis the solution has Brownian
/// covariance within 4 SE.
pub fn criterion_7(seed: u64) -> CriterionResult {
    run_criterion(
        "c7",
        "solution family closed loop",
        None,
        |metrics, _notes| {
            let mut pass = true;
            let n = 5000;

            // Part A: recovery of a planted vector.
            {
                let kernel = GoursatKernel::muntz(&[0.0, 1.0])?;
                let basis = kernel.basis().clone();
                let grid =
                    TimeGrid::singularity_aware(8e-4, 1.2, 4e-3, 8.0)?.extend_to(80.0, 0.05)?;
                let spec = RngSpec::new(seed);
                let y = DVector::from_vec(vec![1.0, -2.0]);
                let sol_spec = SolutionSpec {
                    kernel,
                    source: EndpointSource::Fixed(y.clone()),
                };
                let recovered: Vec<Result<DVector<f64>>> = ensemble(n, |i| {
                    let w = sample_brownian(&grid, &spec, i);
                    let mut rng = spec.stream(u64::MAX - i);
                    let sol = sde_solution(&sol_spec, &w, 8.0, None, &mut rng)?;
                    Ok(recover_endpoint(&basis, &sol.path, 8.0)?.at_full)
                });
                let recovered: Vec<DVector<f64>> = recovered.into_iter().collect::<Result<_>>()?;
                for c in 0..2 {
                    let vals: Vec<f64> = recovered.iter().map(|v| v[c]).collect();
                    let est = mean_estimate(&vals)?;
                    let sigmas = est.sigmas_from(y[c]);
                    metrics.push((format!("recovery_component{c}_sigmas"), sigmas));
                    metrics.push((format!("recovery_component{c}_mean"), est.mean));
                    pass &= sigmas <= 4.0;
                }
            }

            // Part B: Gaussian vector restores the Wiener law.
            {
                let kernel = GoursatKernel::generic(exp_basis())?;
                let grid =
                    TimeGrid::singularity_aware(1e-4, 1.2, 5e-4, 1.0)?.extend_to(10.0, 5e-3)?;
                let spec = RngSpec::new(seed.wrapping_add(1));
                let sol_spec = SolutionSpec {
                    kernel,
                    source: EndpointSource::GaussianAlphaInfinity,
                };
                let times = [0.25, 0.5, 0.75, 1.0];
                let samples: Vec<Result<Vec<f64>>> = ensemble(n, |i| {
                    let w = sample_brownian(&grid, &spec, i);
                    let mut rng = spec.stream(u64::MAX - i);
                    let sol = sde_solution(&sol_spec, &w, 1.0, Some(1e-6), &mut rng)?;
                    Ok(times.iter().map(|&t| sol.path.value_at(t)).collect())
                });
                let samples: Vec<Vec<f64>> = samples.into_iter().collect::<Result<_>>()?;
                let mut worst = 0.0f64;
                for (i, &s) in times.iter().enumerate() {
                    for (j, &t) in times.iter().enumerate() {
                        if j < i {
                            continue;
                        }
                        let a: Vec<f64> = samples.iter().map(|v| v[i]).collect();
                        let b: Vec<f64> = samples.iter().map(|v| v[j]).collect();
                        let est = covariance_estimate(&a, &b)?;
                        worst = worst.max(est.sigmas_from(s.min(t)));
                    }
                }
                metrics.push(("gaussian_solution_worst_cov_sigmas".into(), worst));
                pass &= worst <= 4.0;
            }
            Ok(pass)
        },
    )
}

/// c8: variance of the particular solution at t = 1 for the exponential
/// basis equals `1 - 2 (1 - 1/e)^2` within 4 SE over 20000 paths.
pub fn criterion_8(seed: u64) -> CriterionResult {
    run_criterion(
        "c8",
        "particular-solution variance",
        None,
        |metrics, _notes| {
            let expected = 1.0 - 2.0 * (1.0 - (-1.0f64).exp()).powi(2);
            metrics.push(("expected_variance".into(), expected));
            let kernel = GoursatKernel::generic(exp_basis())?;
            let grid = TimeGrid::singularity_aware(1e-4, 1.2, 5e-4, 1.0)?.extend_to(10.0, 5e-3)?;
            let spec = RngSpec::new(seed);
            let values: Vec<Result<f64>> = ensemble(20_000, |i| {
                let w = sample_brownian(&grid, &spec, i);
                let sol = particular_solution(&kernel, &w, 1.0, Some(1e-6))?;
                Ok(sol.path.value_at(1.0))
            });
            let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
            let est = variance_estimate(&values)?;
            metrics.push(("measured_variance".into(), est.mean));
            metrics.push(("sigmas".into(), est.sigmas_from(expected)));
            Ok(est.sigmas_from(expected) <= 4.0)
        },
    )
}

/// c9: two routes to the twice-iterated transform (composition vs the direct
/// Laguerre form) agree within 1e-2 on a seeded path at delta = 5e-4, and
/// the gap shrinks by at least 1.5x under midpoint refinement.
pub fn criterion_9(seed: u64) -> CriterionResult {
    run_criterion(
        "c9",
        "Laguerre equivalence of iterates",
        None,
        |metrics, _notes| {
            let kernel = GoursatKernel::muntz(&[0.0])?;
            let coarse = TimeGrid::singularity_aware(1e-4, 1.2, 5e-4, 1.0)?;
            let fine = coarse.refined();
            let spec = RngSpec::new(seed);
            let fine_path = sample_brownian(&fine, &spec, 0);
            let coarse_path = fine_path.restrict_to(&coarse);

            let gap = |path: &crate::paths::SamplePath| -> Result<f64> {
                let a = iterate_transform(&kernel, path, 2)?;
                let b = laguerre_transform(2, path);
                Ok(a.values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max))
            };
            let coarse_gap = gap(&coarse_path)?;
            let fine_gap = gap(&fine_path)?;
            metrics.push(("coarse_sup_gap".into(), coarse_gap));
            metrics.push(("fine_sup_gap".into(), fine_gap));
            metrics.push(("shrink_ratio".into(), coarse_gap / fine_gap));
            Ok(coarse_gap <= 1e-2 && coarse_gap / fine_gap >= 1.5)
        },
    )
}

/// c10: Hardy bound: `||K_f g|| / ||g|| <= 2.05` over 100 random step
/// functions for each shipped kernel.
pub fn criterion_10(seed: u64) -> CriterionResult {
    run_criterion("c10", "generalized Hardy bound", None, |metrics, _notes| {
        use rand::Rng;
        let kernels: Vec<(&str, GoursatKernel)> = vec![
            ("constant", GoursatKernel::muntz(&[0.0])?),
            ("muntz01", GoursatKernel::muntz(&[0.0, 1.0])?),
            ("muntz012", GoursatKernel::muntz(&[0.0, 1.0, 2.0])?),
            (
                "order1exp",
                GoursatKernel::order_one(BasisFunction::exponential(1.0)?)?,
            ),
        ];
        let m = 256;
        let times: Vec<f64> = (1..=m).map(|i| i as f64 / m as f64).collect();
        let spec = RngSpec::new(seed);
        let mut pass = true;
        for (name, kernel) in &kernels {
            let mut rng = spec.stream(1_000_000);
            let mut worst = 0.0f64;
            for _ in 0..100 {
                let values: Vec<f64> = (0..m).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
                let report = hardy_apply(kernel, &times, &values, 1.0)?;
                worst = worst.max(report.ratio);
            }
            metrics.push((format!("{name}_max_ratio"), worst));
            pass &= worst <= 2.05;
        }
        Ok(pass)
    })
}

/// c11: harmonic martingale: `E[h(t, I_t)] = 1` within 4 SE at
/// t in {0.5, 1} for a point mass (f = 1) and a Gaussian law (f = (1, s)),
/// 20000 paths.
pub fn criterion_11(seed: u64) -> CriterionResult {
    run_criterion(
        "c11",
        "harmonic martingale expectation",
        None,
        |metrics, _notes| {
            let grid = TimeGrid::singularity_aware(1e-4, 1.2, 5e-4, 1.0)?;
            let spec = RngSpec::new(seed);
            let n = 20_000;
            let scalar = FunctionBasis::new(vec![BasisFunction::constant()])?;
            let pair =
                FunctionBasis::new(vec![BasisFunction::constant(), BasisFunction::power(1.0)?])?;
            let cases: Vec<(&str, FunctionBasis, EndpointLaw)> = vec![
                (
                    "point_mass_half",
                    scalar,
                    EndpointLaw::point_mass(DVector::from_vec(vec![0.5])),
                ),
                (
                    "gaussian_identity",
                    pair,
                    EndpointLaw::gaussian(DVector::zeros(2), nalgebra::DMatrix::identity(2, 2))?,
                ),
            ];
            let mut pass = true;
            for (name, basis, law) in cases {
                for t in [0.5, 1.0] {
                    let est = martingale_check(&basis, &law, t, &grid, &spec, n)?;
                    let sigmas = est.sigmas_from(1.0);
                    metrics.push((format!("{name}_t{t}_mean"), est.mean));
                    metrics.push((format!("{name}_t{t}_sigmas"), sigmas));
                    pass &= sigmas <= 4.0;
                }
            }
            Ok(pass)
        },
    )
}

/// Every in-process criterion, in order. (Criterion 12, byte-identical CLI
/// artifacts across thread counts, exercises the binary and lives with it.)
pub fn all(seed: u64) -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(seed),
        criterion_5(seed),
        criterion_6(seed),
        criterion_7(seed),
        criterion_8(seed),
        criterion_9(seed),
        criterion_10(seed),
        criterion_11(seed),
    ]
}

/// Run a subset by id (`"all"` or e.g. `"c4"`).
pub fn run(seed: u64, which: &str) -> Result<Vec<CriterionResult>> {
    if which == "all" {
        return Ok(all(seed));
    }
    let one = match which {
        "c1" => criterion_1(),
        "c2" => criterion_2(),
        "c3" => criterion_3(),
        "c4" => criterion_4(seed),
        "c5" => criterion_5(seed),
        "c6" => criterion_6(seed),
        "c7" => criterion_7(seed),
        "c8" => criterion_8(seed),
        "c9" => criterion_9(seed),
        "c10" => criterion_10(seed),
        "c11" => criterion_11(seed),
        other => {
            return Err(crate::error::Error::Config(format!(
                "unknown criterion '{other}' (expected all or c1..c11)"
            )))
        }
    };
    Ok(vec![one])
}
