//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time must be strictly positive, got {0}")]
    NonPositiveTime(f64),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Gramian at t = {t} is ill-conditioned (estimated condition number {cond:.3e} exceeds {limit:.1e})")]
    IllConditioned { t: f64, cond: f64, limit: f64 },

    #[error("Gramian at t = {t} is not positive definite")]
    NotPositiveDefinite { t: f64 },

    #[error("quadrature on [{a}, {b}] did not reach tolerance {tol:.1e} within the evaluation budget (error estimate {estimate:.3e})")]
    QuadratureBudget {
        a: f64,
        b: f64,
        tol: f64,
        estimate: f64,
    },

    #[error("quadrature integrand returned a non-finite value at {at}")]
    NonFiniteIntegrand { at: f64 },

    #[error("alpha_inf extrapolation did not converge: horizons {horizons:?} leave an estimated error {estimate:.3e} above tolerance {tol:.1e}")]
    ExtrapolationDiverged {
        horizons: [f64; 3],
        estimate: f64,
        tol: f64,
    },

    #[error("orthonormalization lost orthogonality (defect {defect:.3e} after re-orthogonalization, tolerance {tol:.1e})")]
    OrthogonalityLost { defect: f64, tol: f64 },

    #[error("truncation bound {bound:.3e} exceeds tolerance {tol:.1e}; increase the driving-path horizon (currently {t_max})")]
    TruncationBound { bound: f64, tol: f64, t_max: f64 },

    #[error("drift integrand is non-finite at t = {0}")]
    NonFiniteDrift(f64),

    #[error("grid construction failed: {0}")]
    InvalidGrid(String),

    #[error("{0}")]
    Config(String),
}
