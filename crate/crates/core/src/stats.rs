//! Monte Carlo estimators and statistical surrogates for the distributional
//! claims.
//!
//! Estimators reduce per-path statistics with compensated (Neumaier) sums in
//! path-index order, so results are identical under any thread count.
//! Acceptance bands are `4 SE` (about 99.99% two-sided per test); suites
//! report the violation count and pass when it stays within the expected
//! false-positive count plus one.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::kernel::GoursatKernel;
use crate::paths::{
    ensemble, ito_with_weights, sample_brownian, RngSpec, SamplePath, TimeGrid, WienerWeights,
};
use crate::transform::{phi_midpoint_weights, recover_endpoint, volterra_from_parts};
use crate::Result;
use std::sync::Arc;

/// A Monte Carlo statistic.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    /// Absolute deviation of `target` in units of the standard error
    /// (infinite if the SE is zero and the means differ).
    pub fn sigmas_from(&self, target: f64) -> f64 {
        let diff = (self.mean - target).abs();
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Compensated (Neumaier) summation; deterministic given the input order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean with its plain standard error.
pub fn mean_estimate(values: &[f64]) -> Result<McEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let ss = compensated_sum(values.iter().map(|&v| (v - mean) * (v - mean)));
    let var = ss / (n - 1) as f64;
    Ok(McEstimate {
        mean,
        std_error: (var / n as f64).sqrt(),
        n,
    })
}

/// Empirical covariance of two samples with a jackknife standard error.
pub fn covariance_estimate(a: &[f64], b: &[f64]) -> Result<McEstimate> {
    let n = a.len();
    if n != b.len() || n < 4 {
        return Err(Error::InvalidArgument(format!(
            "covariance needs matched samples of length >= 4, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let nf = n as f64;
    let mean_a = compensated_sum(a.iter().copied()) / nf;
    let mean_b = compensated_sum(b.iter().copied()) / nf;
    let s_ab = compensated_sum((0..n).map(|i| (a[i] - mean_a) * (b[i] - mean_b)));
    let cov = s_ab / (nf - 1.0);

    // Leave-one-out covariances from the sufficient statistics.
    let mut jack = Vec::with_capacity(n);
    for i in 0..n {
        let term = (a[i] - mean_a) * (b[i] - mean_b);
        let s_minus = s_ab - term * nf / (nf - 1.0);
        jack.push(s_minus / (nf - 2.0));
    }
    let jack_mean = compensated_sum(jack.iter().copied()) / nf;
    let ss = compensated_sum(jack.iter().map(|&v| (v - jack_mean) * (v - jack_mean)));
    let se = ((nf - 1.0) / nf * ss).sqrt();
    Ok(McEstimate {
        mean: cov,
        std_error: se,
        n,
    })
}

/// Sample variance (covariance of a series with itself), jackknife SE.
pub fn variance_estimate(a: &[f64]) -> Result<McEstimate> {
    covariance_estimate(a, a)
}

/// Pearson correlation and the `1/sqrt(n)` standard error of a null
/// (zero-correlation) test.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let n = a.len();
    if n != b.len() || n < 4 {
        return Err(Error::InvalidArgument(
            "correlation needs matched samples, n >= 4".into(),
        ));
    }
    let nf = n as f64;
    let mean_a = compensated_sum(a.iter().copied()) / nf;
    let mean_b = compensated_sum(b.iter().copied()) / nf;
    let mut s_ab = 0.0;
    let mut s_aa = 0.0;
    let mut s_bb = 0.0;
    for i in 0..n {
        let da = a[i] - mean_a;
        let db = b[i] - mean_b;
        s_ab += da * db;
        s_aa += da * da;
        s_bb += db * db;
    }
    let r = (s_ab / (s_aa.sqrt() * s_bb.sqrt())).clamp(-1.0, 1.0);
    Ok((r, 1.0 / nf.sqrt()))
}

/// Covariance of a path ensemble at two times (both must lie on the shared
/// grid); requires at least 100 paths.
pub fn covariance_from_paths(paths: &[SamplePath], s: f64, t: f64) -> Result<McEstimate> {
    if paths.len() < 100 {
        return Err(Error::InvalidArgument(format!(
            "covariance over an ensemble needs at least 100 paths, got {}",
            paths.len()
        )));
    }
    let grid = &paths[0].grid;
    let si = grid
        .index_of(s)
        .ok_or_else(|| Error::InvalidArgument(format!("time {s} is not a grid point")))?;
    let ti = grid
        .index_of(t)
        .ok_or_else(|| Error::InvalidArgument(format!("time {t} is not a grid point")))?;
    let a: Vec<f64> = paths.iter().map(|p| p.values[si]).collect();
    let b: Vec<f64> = paths.iter().map(|p| p.values[ti]).collect();
    covariance_estimate(&a, &b)
}

/// Correlation-band test between the components of `I_t` and samples of a
/// second process, the Gaussian surrogate for independence.
#[derive(Debug, Clone)]
pub struct IndependenceReport {
    /// `corr[(i, j)]`: component `i` of `I_t` against sample time `j`.
    pub correlations: DMatrix<f64>,
    /// Standard error of each entry under the null.
    pub entry_se: f64,
    /// Band half-width in SE units (4).
    pub band_sigmas: f64,
    /// Entries outside the band.
    pub violations: usize,
    /// Expected false positives for this many entries at 4 SE.
    pub expected_false_positives: f64,
    pub pass: bool,
}

const BAND_SIGMAS: f64 = 4.0;
/// Two-sided tail mass beyond 4 sigma.
const P_BEYOND_4SE: f64 = 6.334e-5;

/// Build the report from per-path `I_t` components and per-path samples of
/// the comparison process at several times.
pub fn independence_report(
    i_components: &[DVector<f64>],
    samples: &[Vec<f64>],
) -> Result<IndependenceReport> {
    let n_paths = i_components.len();
    if n_paths != samples.len() || n_paths < 4 {
        return Err(Error::InvalidArgument(
            "need matched per-path data, n >= 4".into(),
        ));
    }
    let n_comp = i_components[0].len();
    let n_times = samples[0].len();
    let mut correlations = DMatrix::zeros(n_comp, n_times);
    let entry_se = 1.0 / (n_paths as f64).sqrt();
    let mut violations = 0usize;
    for i in 0..n_comp {
        let a: Vec<f64> = i_components.iter().map(|v| v[i]).collect();
        for j in 0..n_times {
            let b: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let (r, _) = correlation(&a, &b)?;
            correlations[(i, j)] = r;
            if r.abs() > BAND_SIGMAS * entry_se {
                violations += 1;
            }
        }
    }
    let expected = (n_comp * n_times) as f64 * P_BEYOND_4SE;
    let pass = (violations as f64) <= expected.floor() + 1.0;
    Ok(IndependenceReport {
        correlations,
        entry_se,
        band_sigmas: BAND_SIGMAS,
        violations,
        expected_false_positives: expected,
        pass,
    })
}

/// Correlations between the components of `I_t(B)` and `Sigma(B)` sampled
/// at eight times in `(0, t]`, over a fresh Brownian ensemble: the Gaussian
/// surrogate for the independence claim.
pub fn independence_test(
    kernel: &GoursatKernel,
    grid: &Arc<TimeGrid>,
    spec: &RngSpec,
    n_paths: usize,
    t: f64,
) -> Result<IndependenceReport> {
    let times: Vec<f64> = (1..=8)
        .map(|k| grid.times()[grid.nearest_index(t * k as f64 / 8.0)])
        .collect();
    let features = transform_features(kernel, grid, spec, n_paths, t, &times)?;
    let i_comps: Vec<DVector<f64>> = features.iter().map(|f| f.i_t.clone()).collect();
    let sigma: Vec<Vec<f64>> = features.iter().map(|f| f.sigma_at.clone()).collect();
    independence_report(&i_comps, &sigma)
}

/// Per-path features extracted from a Brownian ensemble pushed through a
/// transform: `I_t(B)` components and `Sigma(B)` at chosen times, plus `B`
/// itself at those times for negative controls.
#[derive(Debug, Clone)]
pub struct BrownianFeatures {
    pub i_t: DVector<f64>,
    pub sigma_at: Vec<f64>,
    pub b_at: Vec<f64>,
}

/// Run one Brownian ensemble through the transform, extracting features.
pub fn transform_features(
    kernel: &GoursatKernel,
    grid: &Arc<TimeGrid>,
    spec: &RngSpec,
    n_paths: usize,
    t: f64,
    sample_times: &[f64],
) -> Result<Vec<BrownianFeatures>> {
    let basis = kernel.basis();
    let weights = WienerWeights::for_basis(basis, grid);
    let phis: Vec<DVector<f64>> = grid
        .times()
        .iter()
        .map(|&u| kernel.phi(u))
        .collect::<Result<_>>()?;
    let t_idx = grid
        .index_of(t)
        .ok_or_else(|| Error::InvalidArgument(format!("time {t} is not a grid point")))?;
    let sample_idx: Vec<usize> = sample_times
        .iter()
        .map(|&s| {
            grid.index_of(s)
                .ok_or_else(|| Error::InvalidArgument(format!("time {s} is not a grid point")))
        })
        .collect::<Result<_>>()?;

    let results: Vec<Result<BrownianFeatures>> = ensemble(n_paths, |i| {
        let b = sample_brownian(grid, spec, i);
        let running = ito_with_weights(&weights, &b);
        let report = volterra_from_parts(&b, &running, &phis)?;
        Ok(BrownianFeatures {
            i_t: running.vector_at(t_idx),
            sigma_at: sample_idx
                .iter()
                .map(|&k| report.output.values[k])
                .collect(),
            b_at: sample_idx.iter().map(|&k| b.values[k]).collect(),
        })
    });
    results.into_iter().collect()
}

/// Surrogate for the progressive decomposition: per path,
/// `I_t(B) = m_t (Y - int_t^T phi dSigma(B))` up to the tail truncated at
/// `T`, and the reconstructed vector decorrelates from `Sigma(B)` on `[0,t]`.
#[derive(Debug, Clone)]
pub struct ProgressiveReport {
    /// RMS reconstruction residual per component.
    pub rms: DVector<f64>,
    /// Tail-implied standard deviation per component (`m_t tail(T) m_t`).
    pub tail_sd: DVector<f64>,
    /// Allowance added for discretization, in absolute units.
    pub discretization_margin: f64,
    pub rms_pass: bool,
    pub correlation: IndependenceReport,
    pub pass: bool,
}

/// Run the progressive-decomposition surrogate over a fresh ensemble.
pub fn progressive_decomposition_test(
    kernel: &GoursatKernel,
    grid: &Arc<TimeGrid>,
    spec: &RngSpec,
    n_paths: usize,
    t: f64,
    horizon: f64,
) -> Result<ProgressiveReport> {
    let basis = kernel.basis();
    let n = basis.n();
    let m_t = basis.gramian(t)?;
    let all_divergent = basis.divergent_flags()?.iter().all(|&d| d);

    let f_weights = WienerWeights::for_basis(basis, grid);
    let phi_weights = phi_midpoint_weights(kernel, grid)?;
    let phis: Vec<DVector<f64>> = grid
        .times()
        .iter()
        .map(|&u| kernel.phi(u))
        .collect::<Result<_>>()?;
    let t_idx = grid
        .index_of(t)
        .ok_or_else(|| Error::InvalidArgument(format!("time {t} is not a grid point")))?;
    let horizon_idx = grid
        .index_of(horizon)
        .ok_or_else(|| Error::InvalidArgument(format!("horizon {horizon} is not a grid point")))?;
    let corr_times: Vec<f64> = (1..=4).map(|k| t * k as f64 / 4.0).collect();
    let corr_idx: Vec<usize> = corr_times
        .iter()
        .map(|&s| {
            grid.index_of(s)
                .ok_or_else(|| Error::InvalidArgument(format!("time {s} is not a grid point")))
        })
        .collect::<Result<_>>()?;

    struct PerPath {
        residual: DVector<f64>,
        reconstructed: DVector<f64>,
        sigma_at: Vec<f64>,
    }

    let per_path: Vec<Result<PerPath>> = ensemble(n_paths, |i| {
        let b = sample_brownian(grid, spec, i);
        let running = ito_with_weights(&f_weights, &b);
        let report = volterra_from_parts(&b, &running, &phis)?;
        let sigma = &report.output;

        // int_t^T phi dSigma(B) as midpoint Wiener sums on the transformed path.
        let j = ito_with_weights(&phi_weights, sigma);
        let stub = j.vector_at(horizon_idx) - j.vector_at(t_idx);

        let y = if all_divergent {
            DVector::zeros(n)
        } else {
            // B itself solves the equation driven by Sigma(B), so the vector
            // attached to it is recovered from B directly.
            recover_endpoint(basis, &b, horizon)?.at_full
        };
        let reconstructed = &m_t * (&y - &stub);
        let residual = running.vector_at(t_idx) - &reconstructed;
        Ok(PerPath {
            residual,
            reconstructed,
            sigma_at: corr_idx.iter().map(|&k| sigma.values[k]).collect(),
        })
    });
    let per_path: Vec<PerPath> = per_path.into_iter().collect::<Result<_>>()?;

    let mut rms = DVector::zeros(n);
    for i in 0..n {
        let ss = compensated_sum(per_path.iter().map(|p| p.residual[i] * p.residual[i]));
        rms[i] = (ss / n_paths as f64).sqrt();
    }

    let tail_matrix = match basis.phi_tail_outer_closed(horizon)? {
        Some(m) => m,
        None => (basis.alpha(horizon)? - basis.alpha_infinity()?.matrix).map(|v| v.max(0.0)),
    };
    let implied = &m_t * &tail_matrix * &m_t;
    let tail_sd = DVector::from_iterator(n, (0..n).map(|i| implied[(i, i)].max(0.0).sqrt()));

    // Discretization allowance: first-order in the body step.
    let discretization_margin =
        (50.0 * grid.delta() * t.sqrt()).max(5.0 * grid.eps0().sqrt() * 1e-1);
    let chi_slack = 1.0 + 4.0 * (2.0 / n_paths as f64).sqrt();
    let rms_pass = (0..n).all(|i| rms[i] <= tail_sd[i] * chi_slack + discretization_margin);

    let recon: Vec<DVector<f64>> = per_path.iter().map(|p| p.reconstructed.clone()).collect();
    let sigma_samples: Vec<Vec<f64>> = per_path.iter().map(|p| p.sigma_at.clone()).collect();
    let correlation = independence_report(&recon, &sigma_samples)?;

    let pass = rms_pass && correlation.pass;
    Ok(ProgressiveReport {
        rms,
        tail_sd,
        discretization_margin,
        rms_pass,
        correlation,
        pass,
    })
}
