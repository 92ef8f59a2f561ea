//! Moving polar frame: choose the pole on the support so that the
//! perturbation of a drop is orthogonal to the translation mode, and evaluate
//! the pole velocity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{from_cartesian, integrate, CartesianCurve, SurfaceProfile};
use crate::numerics::{brent_minimize, brent_root};
use crate::spectral::shift_function;

/// Points in the coarse scan of the least-squares objective.
const SCAN: usize = 64;

/// A drop expressed about the pole `(pole_x, 0)`.
#[derive(Clone, Debug, Serialize)]
pub struct MovingFrameState {
    pub pole_x: f64,
    pub profile_in_frame: SurfaceProfile,
    /// `xi = rho - rho_0` in the frame.
    pub perturbation: Vec<f64>,
    /// `1 / int xi_s xi_3`.
    pub lambda: f64,
    /// `xi_3 = cos(theta) + (rho'/rho) sin(theta)` of the framed profile.
    pub xi3: Vec<f64>,
    /// `int xi xi_s`.
    pub ortho_residual: f64,
    /// `||xi||_{L^2}`.
    pub l2_perturbation: f64,
    /// Minimizer of `c -> int (rho_0 - rho_c)^2`.
    pub objective_minimizer: f64,
    /// Every local minimizer of the objective found by the coarse scan,
    /// polished.
    pub local_minima: Vec<f64>,
}

fn contact_range(curve: &CartesianCurve) -> Result<(f64, f64)> {
    let pts = curve.points();
    let (a, b) = (pts[0].0, pts[pts.len() - 1].0);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if !(hi > lo) {
        return Err(Error::RecentreDomain("contact points coincide".into()));
    }
    Ok((lo, hi))
}

fn objective(curve: &CartesianCurve, rho0: &SurfaceProfile, c: f64) -> f64 {
    match from_cartesian(curve, c, rho0.grid()) {
        Ok(p) => {
            let d: Vec<f64> = p.rho().iter().zip(rho0.rho()).map(|(a, b)| (a - b).powi(2)).collect();
            integrate(&d, rho0.grid()).unwrap_or(f64::INFINITY)
        }
        Err(_) => f64::INFINITY,
    }
}

/// Frame state of `curve` about the pole `c`.
pub fn frame_at(curve: &CartesianCurve, rho0: &SurfaceProfile, c: f64) -> Result<MovingFrameState> {
    let grid = rho0.grid();
    let xis = shift_function(rho0)?;
    let profile = from_cartesian(curve, c, grid)?;
    let xi: Vec<f64> = profile.rho().iter().zip(rho0.rho()).map(|(a, b)| a - b).collect();
    let xi3 = shift_function(&profile)?;
    let prod: Vec<f64> = xi.iter().zip(&xis).map(|(a, b)| a * b).collect();
    let sq: Vec<f64> = xi.iter().map(|a| a * a).collect();
    let state = MovingFrameState {
        pole_x: c,
        ortho_residual: integrate(&prod, grid)?,
        l2_perturbation: integrate(&sq, grid)?.sqrt(),
        lambda: f64::NAN,
        profile_in_frame: profile,
        perturbation: xi,
        xi3,
        objective_minimizer: c,
        local_minima: vec![c],
    };
    let lambda = lambda_factor(&state, rho0)?;
    Ok(MovingFrameState { lambda, ..state })
}

/// Recentre a drop outline on the equilibrium `rho0`.
///
/// The least-squares objective `J(c) = int (rho_0 - rho_c)^2` is scanned on
/// the open contact interval, each local minimum is refined with Brent's
/// method, and the best one is kept. Stationarity of `J` is orthogonality to
/// `xi_3` of the resampled profile, which equals `xi_s` only to first order
/// in the perturbation. The pole is therefore polished to the nearby root of
/// `c -> int (rho_c - rho_0) xi_s`, so the returned state is orthogonal to
/// the kernel up to root-finding tolerance.
pub fn recentre(curve: &CartesianCurve, rho0: &SurfaceProfile) -> Result<MovingFrameState> {
    let (x1, x2) = contact_range(curve)?;
    let step = (x2 - x1) / SCAN as f64;
    let cs: Vec<f64> = (1..SCAN).map(|k| x1 + step * k as f64).collect();
    let js: Vec<f64> = cs.iter().map(|&c| objective(curve, rho0, c)).collect();
    let mut minima = Vec::new();
    for k in 0..cs.len() {
        let left = if k == 0 { f64::INFINITY } else { js[k - 1] };
        let right = if k + 1 == cs.len() { f64::INFINITY } else { js[k + 1] };
        if js[k].is_finite() && js[k] <= left && js[k] <= right {
            let a = if k == 0 { x1 + 0.5 * step } else { cs[k - 1] };
            let b = if k + 1 == cs.len() { x2 - 0.5 * step } else { cs[k + 1] };
            let m = brent_minimize(|c| objective(curve, rho0, c), a, b, 1e-10, 200);
            minima.push((m.x, m.fx));
        }
    }
    if minima.is_empty() {
        return Err(Error::RecentreDomain("no interior minimizer of the recentring objective".into()));
    }
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    minima.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-8);
    let best = minima.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty").0;

    let xis = shift_function(rho0)?;
    let phi = |c: f64| -> f64 {
        match from_cartesian(curve, c, rho0.grid()) {
            Ok(p) => {
                let f: Vec<f64> = p.rho().iter().zip(rho0.rho()).zip(&xis).map(|((a, b), s)| (a - b) * s).collect();
                integrate(&f, rho0.grid()).unwrap_or(f64::NAN)
            }
            Err(_) => f64::NAN,
        }
    };
    let f0 = phi(best);
    let mut pole = best;
    if f0 != 0.0 {
        let mut delta = 1e-6 * (x2 - x1);
        let mut found = None;
        while delta < 0.5 * step {
            let (a, b) = (best - delta, best + delta);
            let (fa, fb) = (phi(a), phi(b));
            if fa.is_finite() && fb.is_finite() && fa * fb <= 0.0 {
                found = brent_root(phi, a, b, 1e-13, 200);
                break;
            }
            delta *= 2.0;
        }
        pole = found.ok_or_else(|| {
            Error::RecentreDomain(format!("no kernel-orthogonal pole near the least-squares minimizer {best}"))
        })?;
    }
    let state = frame_at(curve, rho0, pole)?;
    Ok(MovingFrameState {
        objective_minimizer: best,
        local_minima: minima.iter().map(|m| m.0).collect(),
        ..state
    })
}

/// `lambda = 1 / int xi_s xi_3`.
pub fn lambda_factor(state: &MovingFrameState, rho0: &SurfaceProfile) -> Result<f64> {
    let xis = shift_function(rho0)?;
    rho0.grid().check_len(state.xi3.len())?;
    let prod: Vec<f64> = xis.iter().zip(&state.xi3).map(|(a, b)| a * b).collect();
    let d = integrate(&prod, rho0.grid())?;
    if d.abs() < 1e-8 {
        return Err(Error::DegenerateFrame(d.abs()));
    }
    Ok(1.0 / d)
}

/// Pole velocity `n' = lambda int v_n xi_s` for the static-frame normal rate
/// `v_n = d rho / dt`.
pub fn pole_velocity(state: &MovingFrameState, rho0: &SurfaceProfile, normal_speed: &[f64]) -> Result<f64> {
    let xis = shift_function(rho0)?;
    rho0.grid().check_len(normal_speed.len())?;
    let prod: Vec<f64> = normal_speed.iter().zip(&xis).map(|(a, b)| a * b).collect();
    Ok(lambda_factor(state, rho0)? * integrate(&prod, rho0.grid())?)
}
