//! Experiment driver for Goursat-Volterra transforms.
//!
//! Subcommands run kernel identity checks, transform ensembles, bridges,
//! SDE solution families, harmonic-martingale checks, and the verification
//! suite, writing reproducible CSV artifacts plus a manifest of content
//! hashes. Every output byte is a function of the configuration and the
//! seed: re-running a command with the same seed reproduces the artifacts
//! exactly, at any thread count.
//!
//! Exit codes: 0 all checks pass, 1 check failure, 2 configuration error,
//! 3 numerical error (ill-conditioning, unmet truncation bound, quadrature
//! budget).

mod artifacts;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use nalgebra::DVector;

use goursat::basis::parse_basis;
use goursat::bridge::{generalized_bridge, sde_solution, BridgeSpec, EndpointSource, SolutionSpec};
use goursat::error::Error;
use goursat::harmonic::{martingale_check, EndpointLaw};
use goursat::kernel::{
    check_integrability, check_self_reproduction, check_tail_reproduction, kernel_system,
    parse_kernel, GoursatKernel, Integrability,
};
use goursat::paths::{ensemble, ito_integral, sample_brownian, RngSpec, TimeGrid};
use goursat::stats::{covariance_estimate, independence_report, mean_estimate, transform_features};
use goursat::transform::{recover_endpoint, volterra_transform};

use artifacts::{full, ArtifactDir};

#[derive(Parser)]
#[command(
    name = "goursat",
    version,
    about = "Goursat-Volterra transform experiment driver"
)]
struct Cli {
    /// Line-oriented key=value configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (GOURSAT_OUT_DIR environment variable overrides the
    /// built-in default `goursat-out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Master seed. Required for stochastic commands; there is no entropy
    /// default.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for ensemble parallelism (default: all cores).
    /// Outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel identity checks: self/tail reproduction, kernel-system
    /// boundary, integrability verdict.
    VerifyKernel {
        /// Kernel spec: `constant`, `muntz 0,1`, `order1 exp rate=1`,
        /// `generic <basis spec or file>`.
        #[arg(long)]
        kernel: Option<String>,
        /// Largest outer time of the residual grid.
        #[arg(long)]
        t_max: Option<f64>,
    },
    /// Push a Brownian ensemble through the transform; test the Wiener
    /// covariance and the independence surrogate.
    Transform {
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        ratio: Option<f64>,
        /// How many sample paths to keep as (time, input, output) CSVs.
        #[arg(long)]
        keep_paths: Option<usize>,
    },
    /// Build f-generalized bridges; test the endpoint identity and the
    /// transform invariance.
    Bridge {
        /// Basis spec, `;`-separated: `const; power lambda=1; exp rate=2`.
        #[arg(long)]
        basis: Option<String>,
        #[arg(long)]
        t1: Option<f64>,
        /// Endpoint vector, comma-separated.
        #[arg(long)]
        y: Option<String>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        keep_paths: Option<usize>,
    },
    /// Solve the singular SDE family: plant a vector (or draw it Gaussian
    /// with covariance alpha_inf) and close the recovery loop.
    SdeSolve {
        #[arg(long)]
        kernel: Option<String>,
        /// Fixed vector to plant, comma-separated. Mutually exclusive with
        /// --y-gaussian.
        #[arg(long)]
        y: Option<String>,
        /// Draw the vector as N(0, alpha_inf) instead.
        #[arg(long)]
        y_gaussian: bool,
        #[arg(long)]
        t_end: Option<f64>,
        /// Driving-path horizon; defaults to 10 x t_end.
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Abort (exit 3) if the anticipative truncation bound exceeds this.
        #[arg(long)]
        trunc_tol: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        keep_paths: Option<usize>,
    },
    /// Monte Carlo check that h(t, int f dB) has expectation one.
    Harmonic {
        #[arg(long)]
        basis: Option<String>,
        /// Endpoint law: `point:<v1,v2,..>`, `discrete:<file>` (rows
        /// `w y1 .. yn`), or `gauss:<file>` (covariance matrix rows,
        /// mean zero).
        #[arg(long)]
        law: Option<String>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Run the verification suite and write a PASS/FAIL summary.
    Report {
        /// `all` or a single id `c1`..`c11`.
        #[arg(long)]
        suite: Option<String>,
    },
}

/// key=value configuration file contents.
struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, Error> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            for raw in text.lines() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("expected key=value, got '{line}'")))?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(FileConfig(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, Error> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad value for {key}: '{raw}'"))),
        }
    }
}

/// Flag value, else config value, else default, else a config error.
fn resolve<T: FromStr + Clone>(
    flag: Option<T>,
    cfg: &FileConfig,
    key: &str,
    default: Option<T>,
) -> Result<T, Error> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = cfg.get::<T>(key)? {
        return Ok(v);
    }
    default.ok_or_else(|| Error::Config(format!("missing required parameter '{key}'")))
}

fn positive(value: f64, key: &str) -> Result<f64, Error> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Config(format!(
            "parameter '{key}' must be positive, got {value}"
        )))
    }
}

fn at_least(value: usize, min: usize, key: &str) -> Result<usize, Error> {
    if value >= min {
        Ok(value)
    } else {
        Err(Error::Config(format!(
            "parameter '{key}' must be at least {min}, got {value}"
        )))
    }
}

fn parse_vector(text: &str) -> Result<DVector<f64>, Error> {
    let vals = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number '{s}': {e}")))
        })
        .collect::<Result<Vec<f64>, Error>>()?;
    if vals.is_empty() {
        return Err(Error::Config("empty vector".into()));
    }
    Ok(DVector::from_vec(vals))
}

fn parse_law(spec: &str, dim: usize) -> Result<EndpointLaw, Error> {
    if let Some(rest) = spec.strip_prefix("point:") {
        let y = parse_vector(rest)?;
        if y.len() != dim {
            return Err(Error::Config(format!(
                "law dimension {} does not match basis order {dim}",
                y.len()
            )));
        }
        return Ok(EndpointLaw::point_mass(y));
    }
    if let Some(path) = spec.strip_prefix("discrete:") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {path}: {e}")))?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad number '{s}': {e}")))
                })
                .collect::<Result<_, Error>>()?;
            if cols.len() != dim + 1 {
                return Err(Error::Config(format!(
                    "discrete law rows need 1 weight + {dim} coordinates, got {}",
                    cols.len()
                )));
            }
            weights.push(cols[0]);
            points.push(DVector::from_vec(cols[1..].to_vec()));
        }
        return EndpointLaw::discrete(points, weights);
    }
    if let Some(path) = spec.strip_prefix("gauss:") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {path}: {e}")))?;
        let mut rows = Vec::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad number '{s}': {e}")))
                })
                .collect::<Result<_, Error>>()?;
            rows.push(cols);
        }
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Config(format!("covariance must be {dim}x{dim}")));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let cov = nalgebra::DMatrix::from_row_slice(dim, dim, &flat);
        return EndpointLaw::gaussian(DVector::zeros(dim), cov);
    }
    Err(Error::Config(format!(
        "unknown law '{spec}' (expected point:.., discrete:<file>, gauss:<file>)"
    )))
}

struct GridParams {
    eps0: f64,
    ratio: f64,
    delta: f64,
    t_end: f64,
}

impl GridParams {
    fn resolve(
        cfg: &FileConfig,
        eps0: Option<f64>,
        ratio: Option<f64>,
        delta: Option<f64>,
        t_end: Option<f64>,
        t_end_key: &str,
        default_t_end: Option<f64>,
    ) -> Result<Self, Error> {
        let t_end = positive(resolve(t_end, cfg, t_end_key, default_t_end)?, t_end_key)?;
        let eps0 = positive(resolve(eps0, cfg, "eps0", Some(1e-4 * t_end))?, "eps0")?;
        let ratio = resolve(ratio, cfg, "ratio", Some(1.2))?;
        let delta = positive(resolve(delta, cfg, "delta", Some(t_end / 2000.0))?, "delta")?;
        Ok(GridParams {
            eps0,
            ratio,
            delta,
            t_end,
        })
    }

    fn build(&self) -> Result<std::sync::Arc<TimeGrid>, Error> {
        TimeGrid::singularity_aware(self.eps0, self.ratio, self.delta, self.t_end)
    }

    fn record(&self, dir: &mut ArtifactDir) {
        dir.record_float("grid.eps0", self.eps0);
        dir.record_float("grid.ratio", self.ratio);
        dir.record_float("grid.delta", self.delta);
        dir.record_float("grid.t_end", self.t_end);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_)
                | Error::InvalidArgument(_)
                | Error::InvalidBasis(_)
                | Error::InvalidGrid(_) => 2,
                _ => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    if let Some(threads) = cli.threads {
        if threads > 0 {
            // Ignore the error if a pool already exists (tests).
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let out_root = cli
        .out_dir
        .or_else(|| std::env::var_os("GOURSAT_OUT_DIR").map(PathBuf::from))
        .or_else(|| cfg.0.get("out-dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("goursat-out"));
    let seed = resolve(cli.seed, &cfg, "seed", None::<u64>);

    match cli.command {
        Command::VerifyKernel { kernel, t_max } => {
            let spec = resolve(kernel, &cfg, "kernel", None::<String>)?;
            let t_max = positive(resolve(t_max, &cfg, "t-max", Some(2.5))?, "t-max")?;
            cmd_verify_kernel(&out_root, &spec, t_max)
        }
        Command::Transform {
            kernel,
            paths,
            t_end,
            delta,
            eps0,
            ratio,
            keep_paths,
        } => {
            let spec = resolve(kernel, &cfg, "kernel", None::<String>)?;
            let paths = at_least(resolve(paths, &cfg, "paths", Some(20_000))?, 4, "paths")?;
            let keep = resolve(keep_paths, &cfg, "keep-paths", Some(4))?;
            let grid = GridParams::resolve(&cfg, eps0, ratio, delta, t_end, "t-end", Some(1.0))?;
            cmd_transform(&out_root, &spec, paths, keep, &grid, seed?)
        }
        Command::Bridge {
            basis,
            t1,
            y,
            paths,
            delta,
            eps0,
            ratio,
            keep_paths,
        } => {
            let basis_spec = resolve(basis, &cfg, "basis", None::<String>)?;
            let t1 = positive(resolve(t1, &cfg, "t1", Some(1.0))?, "t1")?;
            let y_text = resolve(y, &cfg, "y", None::<String>)?;
            let paths = at_least(resolve(paths, &cfg, "paths", Some(100))?, 1, "paths")?;
            let keep = resolve(keep_paths, &cfg, "keep-paths", Some(4))?;
            let grid = GridParams::resolve(&cfg, eps0, ratio, delta, Some(t1), "t1", None)?;
            cmd_bridge(
                &out_root,
                &basis_spec,
                t1,
                &y_text,
                paths,
                keep,
                &grid,
                seed?,
            )
        }
        Command::SdeSolve {
            kernel,
            y,
            y_gaussian,
            t_end,
            t_max,
            paths,
            trunc_tol,
            delta,
            eps0,
            ratio,
            keep_paths,
        } => {
            let spec = resolve(kernel, &cfg, "kernel", None::<String>)?;
            let y = match y {
                Some(v) => Some(v),
                None => cfg.get::<String>("y")?,
            };
            let y_gaussian = y_gaussian || cfg.get::<bool>("y-gaussian")?.unwrap_or(false);
            let paths = at_least(resolve(paths, &cfg, "paths", Some(5000))?, 4, "paths")?;
            let keep = resolve(keep_paths, &cfg, "keep-paths", Some(4))?;
            let grid = GridParams::resolve(&cfg, eps0, ratio, delta, t_end, "t-end", Some(1.0))?;
            let t_max = positive(
                resolve(t_max, &cfg, "t-max", Some(10.0 * grid.t_end))?,
                "t-max",
            )?;
            let trunc_tol = match trunc_tol {
                Some(v) => Some(v),
                None => cfg.get::<f64>("trunc-tol")?,
            };
            cmd_sde_solve(
                &out_root,
                &spec,
                y.as_deref(),
                y_gaussian,
                t_max,
                paths,
                keep,
                trunc_tol,
                &grid,
                seed?,
            )
        }
        Command::Harmonic {
            basis,
            law,
            t,
            paths,
            delta,
            eps0,
            ratio,
        } => {
            let basis_spec = resolve(basis, &cfg, "basis", None::<String>)?;
            let law_spec = resolve(law, &cfg, "law", None::<String>)?;
            let t = positive(resolve(t, &cfg, "t", Some(1.0))?, "t")?;
            let paths = at_least(resolve(paths, &cfg, "paths", Some(20_000))?, 2, "paths")?;
            let grid =
                GridParams::resolve(&cfg, eps0, ratio, delta, None, "t-end", Some(t.max(1.0)))?;
            cmd_harmonic(&out_root, &basis_spec, &law_spec, t, paths, &grid, seed?)
        }
        Command::Report { suite } => {
            let which = resolve(suite, &cfg, "suite", Some("all".to_string()))?;
            cmd_report(&out_root, &which, seed?)
        }
    }
}

fn cmd_verify_kernel(out_root: &Path, spec: &str, t_max: f64) -> Result<bool, Error> {
    let kernel = parse_kernel(spec)?;
    let mut dir = ArtifactDir::create(out_root).map_err(io_err)?;
    dir.record("command", "verify-kernel");
    dir.record("kernel", spec);
    dir.record_float("t_max", t_max);

    let mut rows = Vec::new();
    let mut worst_rel = 0.0f64;
    for i in 1..=10 {
        let t = t_max * i as f64 / 10.0;
        for j in 1..=10 {
            let s = t * j as f64 / 10.0;
            let residual = check_self_reproduction(&kernel, t, s)?;
            let rel = residual.abs() / kernel.eval(t, s).abs().max(1.0);
            worst_rel = worst_rel.max(rel);
            rows.push(format!("self,{},{},{}", full(t), full(s), full(residual)));
        }
    }
    for (t, s) in [(t_max / 2.0, t_max / 4.0), (t_max, t_max / 2.0)] {
        let residual = check_tail_reproduction(&kernel, t, s, 16.0 * t_max)?;
        rows.push(format!("tail,{},{},{}", full(t), full(s), full(residual)));
        worst_rel = worst_rel.max(residual.abs() / kernel.eval(t, s).abs().max(1.0));
    }
    // Boundary identity against the kernel system.
    let sys = kernel_system(kernel.basis(), t_max)?;
    for j in 1..=10 {
        let s = t_max * j as f64 / 10.0;
        let residual = sys.eval(t_max, s)? - kernel.eval(t_max, s);
        rows.push(format!(
            "boundary,{},{},{}",
            full(t_max),
            full(s),
            full(residual)
        ));
        worst_rel = worst_rel.max(residual.abs() / kernel.eval(t_max, s).abs().max(1.0));
    }
    dir.write_csv("residuals.csv", "check,t,s,residual", rows)
        .map_err(io_err)?;

    let verdict = check_integrability(&kernel, t_max)?;
    dir.record(
        "integrability",
        match verdict {
            Integrability::Finite(v) => format!("finite value={}", full(v)),
            Integrability::Divergent => "divergent".to_string(),
        },
    );
    dir.record_float("worst_relative_residual", worst_rel);
    let pass = worst_rel <= 1e-6;
    dir.record("pass", if pass { "true" } else { "false" });
    dir.finalize().map_err(io_err)?;
    println!(
        "verify-kernel {}: worst relative residual {worst_rel:.3e}",
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}

#[allow(clippy::too_many_arguments)]
fn cmd_transform(
    out_root: &Path,
    spec: &str,
    n_paths: usize,
    keep: usize,
    grid_params: &GridParams,
    seed: u64,
) -> Result<bool, Error> {
    let kernel = parse_kernel(spec)?;
    let grid = grid_params.build()?;
    let rng = RngSpec::new(seed);
    let mut dir = ArtifactDir::create(out_root).map_err(io_err)?;
    dir.record("command", "transform");
    dir.record("kernel", spec);
    dir.record("paths", n_paths.to_string());
    dir.record("seed", seed.to_string());
    grid_params.record(&mut dir);

    let t_end = grid_params.t_end;
    // Statistics times snap to the nearest grid point; the CSVs report the
    // snapped values.
    let snap = |t: f64| grid.times()[grid.nearest_index(t)];
    let cov_times: Vec<f64> = (1..=4).map(|k| snap(t_end * k as f64 / 4.0)).collect();
    let ind_times: Vec<f64> = (1..=8).map(|k| snap(t_end * k as f64 / 8.0)).collect();
    let features = transform_features(&kernel, &grid, &rng, n_paths, t_end, &ind_times)?;

    let mut pass = true;
    let mut cov_rows = Vec::new();
    for (i, &s) in cov_times.iter().enumerate() {
        for (j, &t) in cov_times.iter().enumerate() {
            if j < i {
                continue;
            }
            // cov_times are every second independence time.
            let (ii, jj) = (2 * i + 1, 2 * j + 1);
            let a: Vec<f64> = features.iter().map(|f| f.sigma_at[ii]).collect();
            let b: Vec<f64> = features.iter().map(|f| f.sigma_at[jj]).collect();
            let est = covariance_estimate(&a, &b)?;
            let sigmas = est.sigmas_from(s.min(t));
            pass &= sigmas <= 4.0;
            cov_rows.push(format!(
                "{},{},{},{},{},{}",
                full(s),
                full(t),
                full(s.min(t)),
                full(est.mean),
                full(est.std_error),
                full(sigmas)
            ));
        }
    }
    dir.write_csv("cov_check.csv", "s,t,expected,cov,se,sigmas", cov_rows)
        .map_err(io_err)?;

    let i_comps: Vec<DVector<f64>> = features.iter().map(|f| f.i_t.clone()).collect();
    let sigma: Vec<Vec<f64>> = features.iter().map(|f| f.sigma_at.clone()).collect();
    let report = independence_report(&i_comps, &sigma)?;
    pass &= report.pass;
    let mut ind_rows = Vec::new();
    for i in 0..report.correlations.nrows() {
        for (j, &t) in ind_times.iter().enumerate() {
            ind_rows.push(format!(
                "{i},{},{},{}",
                full(t),
                full(report.correlations[(i, j)]),
                full(report.entry_se)
            ));
        }
    }
    dir.write_csv("independence.csv", "component,time,corr,se", ind_rows)
        .map_err(io_err)?;
    dir.record("independence_violations", report.violations.to_string());

    for idx in 0..keep.min(n_paths) as u64 {
        let b = sample_brownian(&grid, &rng, idx);
        let rep = volterra_transform(&kernel, &b)?;
        if idx == 0 {
            dir.record_float("eps0_head_estimate_path0", rep.eps0_head_estimate);
            dir.record_float("drift_convergence_estimate_path0", rep.convergence_estimate);
        }
        let rows = grid.times().iter().enumerate().map(|(k, &t)| {
            format!(
                "{},{},{}",
                full(t),
                full(b.values[k]),
                full(rep.output.values[k])
            )
        });
        dir.write_csv(&format!("paths/path_{idx}.csv"), "time,input,output", rows)
            .map_err(io_err)?;
        // Raw driver in plain (time, value) form.
        let raw = grid
            .times()
            .iter()
            .enumerate()
            .map(|(k, &t)| format!("{},{}", full(t), full(b.values[k])));
        dir.write_csv(&format!("paths/input_{idx}.csv"), "time,value", raw)
            .map_err(io_err)?;
    }

    dir.record("pass", if pass { "true" } else { "false" });
    dir.finalize().map_err(io_err)?;
    println!("transform {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bridge(
    out_root: &Path,
    basis_spec: &str,
    t1: f64,
    y_text: &str,
    n_paths: usize,
    keep: usize,
    grid_params: &GridParams,
    seed: u64,
) -> Result<bool, Error> {
    let basis = parse_basis(basis_spec)?;
    let y = parse_vector(y_text)?;
    let kernel = GoursatKernel::generic(basis.clone())?;
    let spec = BridgeSpec::new(basis.clone(), t1, y.clone())?;
    let grid = grid_params.build()?;
    let rng = RngSpec::new(seed);

    let mut dir = ArtifactDir::create(out_root).map_err(io_err)?;
    dir.record("command", "bridge");
    dir.record("basis", basis_spec);
    dir.record_float("t1", t1);
    dir.record("y", y_text);
    dir.record("paths", n_paths.to_string());
    dir.record("seed", seed.to_string());
    grid_params.record(&mut dir);

    struct Row {
        endpoint_err: f64,
        transform_gap: f64,
    }
    let per_path: Vec<Result<Row, Error>> = ensemble(n_paths, |idx| {
        let b = sample_brownian(&grid, &rng, idx);
        let bridge = generalized_bridge(&spec, &b)?;
        let i_t1 = ito_integral(&basis, &bridge).final_vector();
        let endpoint_err = (0..basis.n())
            .map(|c| (i_t1[c] - y[c]).abs())
            .fold(0.0f64, f64::max);
        let sigma_b = volterra_transform(&kernel, &b)?.output;
        let sigma_bridge = volterra_transform(&kernel, &bridge)?.output;
        let transform_gap = sigma_bridge
            .values
            .iter()
            .zip(&sigma_b.values)
            .map(|(a, c)| (a - c).abs())
            .fold(0.0f64, f64::max);
        Ok(Row {
            endpoint_err,
            transform_gap,
        })
    });
    let per_path: Vec<Row> = per_path.into_iter().collect::<Result<_, Error>>()?;

    let rows = per_path
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{i},{},{}", full(r.endpoint_err), full(r.transform_gap)));
    dir.write_csv(
        "bridge_checks.csv",
        "path,endpoint_error,transform_gap",
        rows,
    )
    .map_err(io_err)?;

    let worst_endpoint = per_path
        .iter()
        .map(|r| r.endpoint_err)
        .fold(0.0f64, f64::max);
    let worst_gap = per_path
        .iter()
        .map(|r| r.transform_gap)
        .fold(0.0f64, f64::max);
    dir.record_float("worst_endpoint_error", worst_endpoint);
    dir.record_float("worst_transform_gap", worst_gap);

    for idx in 0..keep.min(n_paths) as u64 {
        let b = sample_brownian(&grid, &rng, idx);
        let bridge = generalized_bridge(&spec, &b)?;
        let rows = bridge.grid.times().iter().enumerate().map(|(k, &t)| {
            format!(
                "{},{},{}",
                full(t),
                full(b.values[k]),
                full(bridge.values[k])
            )
        });
        dir.write_csv(&format!("paths/path_{idx}.csv"), "time,driver,bridge", rows)
            .map_err(io_err)?;
    }

    let pass = worst_endpoint <= 5e-3 && worst_gap <= 5e-3;
    dir.record("pass", if pass { "true" } else { "false" });
    dir.finalize().map_err(io_err)?;
    println!(
        "bridge {}: endpoint {worst_endpoint:.3e}, transform gap {worst_gap:.3e}",
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sde_solve(
    out_root: &Path,
    kernel_spec: &str,
    y: Option<&str>,
    y_gaussian: bool,
    t_max: f64,
    n_paths: usize,
    keep: usize,
    trunc_tol: Option<f64>,
    grid_params: &GridParams,
    seed: u64,
) -> Result<bool, Error> {
    let kernel = parse_kernel(kernel_spec)?;
    let basis = kernel.basis().clone();
    let source = match (y, y_gaussian) {
        (Some(_), true) => {
            return Err(Error::Config(
                "--y and --y-gaussian are mutually exclusive".into(),
            ))
        }
        (Some(text), false) => EndpointSource::Fixed(parse_vector(text)?),
        (None, true) => EndpointSource::GaussianAlphaInfinity,
        (None, false) => return Err(Error::Config("need --y <vector> or --y-gaussian".into())),
    };
    let planted = match &source {
        EndpointSource::Fixed(v) => Some(v.clone()),
        _ => None,
    };
    let sol_spec = SolutionSpec { kernel, source };

    let t_end = grid_params.t_end;
    let far_delta = (t_max - t_end) / 2000.0;
    let grid = grid_params
        .build()?
        .extend_to(t_max, far_delta.max(grid_params.delta))?;
    let rng = RngSpec::new(seed);

    let mut dir = ArtifactDir::create(out_root).map_err(io_err)?;
    dir.record("command", "sde-solve");
    dir.record("kernel", kernel_spec);
    dir.record("y", y.unwrap_or("gaussian-alpha-inf"));
    dir.record("paths", n_paths.to_string());
    dir.record("seed", seed.to_string());
    dir.record_float("t_max", t_max);
    grid_params.record(&mut dir);

    struct Row {
        recovered: DVector<f64>,
        at_times: Vec<f64>,
        bound: f64,
    }
    let times: Vec<f64> = (1..=4)
        .map(|k| grid.times()[grid.nearest_index(t_end * k as f64 / 4.0)])
        .collect();
    let per_path: Vec<Result<Row, Error>> = ensemble(n_paths, |i| {
        let w = sample_brownian(&grid, &rng, i);
        let mut draw_rng = rng.stream(u64::MAX - i);
        let sol = sde_solution(&sol_spec, &w, t_end, trunc_tol, &mut draw_rng)?;
        let recovered = recover_endpoint(&basis, &sol.path, t_end)?.at_full;
        Ok(Row {
            recovered,
            at_times: times.iter().map(|&t| sol.path.value_at(t)).collect(),
            bound: sol.truncation_bound,
        })
    });
    let per_path: Vec<Row> = per_path.into_iter().collect::<Result<_, Error>>()?;
    dir.record_float("truncation_bound", per_path[0].bound);

    let mut pass = true;
    let mut rec_rows = Vec::new();
    for c in 0..basis.n() {
        let vals: Vec<f64> = per_path.iter().map(|r| r.recovered[c]).collect();
        let est = mean_estimate(&vals)?;
        let (target, sigmas) = match &planted {
            Some(yv) => (yv[c], est.sigmas_from(yv[c])),
            None => (0.0, est.sigmas_from(0.0)),
        };
        if planted.is_some() {
            pass &= sigmas <= 4.0;
        }
        rec_rows.push(format!(
            "{c},{},{},{},{}",
            full(est.mean),
            full(est.std_error),
            full(target),
            full(sigmas)
        ));
    }
    dir.write_csv("recovery.csv", "component,mean,se,target,sigmas", rec_rows)
        .map_err(io_err)?;

    if planted.is_none() {
        // Gaussian vector: the solution must be a Brownian motion.
        let mut cov_rows = Vec::new();
        for (i, &s) in times.iter().enumerate() {
            for (j, &t) in times.iter().enumerate() {
                if j < i {
                    continue;
                }
                let a: Vec<f64> = per_path.iter().map(|r| r.at_times[i]).collect();
                let b: Vec<f64> = per_path.iter().map(|r| r.at_times[j]).collect();
                let est = covariance_estimate(&a, &b)?;
                let sigmas = est.sigmas_from(s.min(t));
                pass &= sigmas <= 4.0;
                cov_rows.push(format!(
                    "{},{},{},{},{},{}",
                    full(s),
                    full(t),
                    full(s.min(t)),
                    full(est.mean),
                    full(est.std_error),
                    full(sigmas)
                ));
            }
        }
        dir.write_csv("cov_check.csv", "s,t,expected,cov,se,sigmas", cov_rows)
            .map_err(io_err)?;
    }

    for idx in 0..keep.min(n_paths) as u64 {
        let w = sample_brownian(&grid, &rng, idx);
        let mut draw_rng = rng.stream(u64::MAX - idx);
        let sol = sde_solution(&sol_spec, &w, t_end, trunc_tol, &mut draw_rng)?;
        let rows = sol.path.grid.times().iter().enumerate().map(|(k, &t)| {
            format!(
                "{},{},{}",
                full(t),
                full(w.values[k]),
                full(sol.path.values[k])
            )
        });
        dir.write_csv(
            &format!("paths/path_{idx}.csv"),
            "time,driver,solution",
            rows,
        )
        .map_err(io_err)?;
    }

    dir.record("pass", if pass { "true" } else { "false" });
    dir.finalize().map_err(io_err)?;
    println!("sde-solve {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn cmd_harmonic(
    out_root: &Path,
    basis_spec: &str,
    law_spec: &str,
    t: f64,
    n_paths: usize,
    grid_params: &GridParams,
    seed: u64,
) -> Result<bool, Error> {
    let basis = parse_basis(basis_spec)?;
    let law = parse_law(law_spec, basis.n())?;
    let grid = grid_params.build()?;
    let rng = RngSpec::new(seed);
    let t = grid.times()[grid.nearest_index(t)];

    let mut dir = ArtifactDir::create(out_root).map_err(io_err)?;
    dir.record("command", "harmonic");
    dir.record("basis", basis_spec);
    dir.record("law", law_spec);
    dir.record_float("t", t);
    dir.record("paths", n_paths.to_string());
    dir.record("seed", seed.to_string());
    grid_params.record(&mut dir);

    let est = martingale_check(&basis, &law, t, &grid, &rng, n_paths)?;
    let sigmas = est.sigmas_from(1.0);
    let pass = sigmas <= 4.0;
    dir.write_csv(
        "martingale.csv",
        "t,mean,se,sigmas",
        [format!(
            "{},{},{},{}",
            full(t),
            full(est.mean),
            full(est.std_error),
            full(sigmas)
        )],
    )
    .map_err(io_err)?;
    dir.record("pass", if pass { "true" } else { "false" });
    dir.finalize().map_err(io_err)?;
    println!(
        "harmonic {}: E[h] = {} +- {}",
        if pass { "PASS" } else { "FAIL" },
        est.mean,
        est.std_error
    );
    Ok(pass)
}

fn cmd_report(out_root: &Path, which: &str, seed: u64) -> Result<bool, Error> {
    let results = goursat::suite::run(seed, which)?;
    let mut dir = ArtifactDir::create(out_root).map_err(io_err)?;
    dir.record("command", "report");
    dir.record("suite", which);
    dir.record("seed", seed.to_string());

    let mut csv_rows = Vec::new();
    let mut text = String::new();
    let mut pass = true;
    for r in &results {
        pass &= r.pass;
        let line = r.summary_line();
        println!("{line}");
        eprintln!(
            "  ({}: {:.2?}{})",
            r.id,
            r.runtime,
            r.runtime_limit
                .map(|l| format!(", limit {l:.2?}"))
                .unwrap_or_default()
        );
        text.push_str(&line);
        text.push('\n');
        for (k, v) in &r.metrics {
            csv_rows.push(format!("{},{k},{}", r.id, full(*v)));
        }
        csv_rows.push(format!("{},pass,{}", r.id, if r.pass { 1 } else { 0 }));
        for note in &r.notes {
            text.push_str(&format!("  note: {note}\n"));
        }
    }
    dir.write_csv("summary.csv", "criterion,metric,value", csv_rows)
        .map_err(io_err)?;
    dir.write_file("summary.txt", text.as_bytes())
        .map_err(io_err)?;
    dir.record("pass", if pass { "true" } else { "false" });
    dir.finalize().map_err(io_err)?;
    Ok(pass)
}

fn io_err(e: std::io::Error) -> Error {
    Error::Config(format!("io error: {e}"))
}
