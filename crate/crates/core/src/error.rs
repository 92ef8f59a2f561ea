use thiserror::Error;

use crate::geometry::SurfaceProfile;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    /// The minimizer ran out of iterations. The last iterate is kept so the
    /// caller can inspect or restart from it.
    #[error("no convergence at eps = {eps:e} after {iterations} iterations (residual {residual:e})")]
    Convergence {
        eps: f64,
        iterations: usize,
        residual: f64,
        last: Box<SurfaceProfile>,
    },

    #[error("shooting failed, residual = [{:e}, {:e}]", residual[0], residual[1])]
    Shooting { residual: [f64; 2] },

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("recentre domain error: {0}")]
    RecentreDomain(String),

    #[error("degenerate moving frame: |int xi_s xi_3| = {0:e}")]
    DegenerateFrame(f64),

    #[error("ill-conditioned mass matrix (condition number {0:e})")]
    Conditioning(f64),

    #[error("spectral domain error: {0}")]
    SpectralDomain(String),

    #[error("time step underflow at t = {t}")]
    Stiffness { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
