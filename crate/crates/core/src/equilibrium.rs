//! Equilibrium shapes: volume-constrained minimization of the regularized
//! energy, continuation in the regularization parameter, and an independent
//! shooting solver for the symmetric sessile drop.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::energy::{
    self, energy_raw, hessian_raw, kkt_residual, quad_square, report_from_residual, PhysicalParams,
};
use crate::error::{Error, Result};
use crate::geometry::{self, AngularGrid, SurfaceProfile};
use crate::numerics::dopri45;

/// A converged equilibrium.
#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumSolution {
    pub profile: SurfaceProfile,
    pub multiplier: f64,
    pub eps_used: f64,
    /// Sup-norm of the interior first variation.
    pub el_residual: f64,
    /// `(lower, upper)` contact residuals.
    pub bc_residuals: (f64, f64),
    /// `(gamma_2, gamma_1)` with `sin gamma_2 = -rho'/s` at the lower contact
    /// point and `sin gamma_1 = rho'/s` at the upper one.
    pub contact_angles: (f64, f64),
    /// Regularized energy at the solution.
    pub energy: f64,
    pub iterations: usize,
}

impl EquilibriumSolution {
    /// Contact angles measured as `pi/2 + gamma_i`; at equilibrium their
    /// cosine is `-[[gamma]]/sigma`.
    pub fn young_angles(&self) -> (f64, f64) {
        (PI / 2.0 + self.contact_angles.0, PI / 2.0 + self.contact_angles.1)
    }
}

/// Records of a run down an eps schedule.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ContinuationReport {
    pub eps_schedule: Vec<f64>,
    /// `max |rho'|` per eps.
    pub sup_rho_prime: Vec<f64>,
    /// `int |rho'|` per eps.
    pub bv_norms: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// Regularized energies `E^eps(rho_eps)`.
    pub energies: Vec<f64>,
}

/// Tolerances for [`minimize_eps_with`].
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Interior residual tolerance, in units of sigma.
    pub tol_el: f64,
    /// Contact residual tolerance, in units of sigma.
    pub tol_bc: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_el: 1e-8, tol_bc: 1e-7, max_iters: 400 }
    }
}

/// Symmetry diagnostic for sessile solutions.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SymmetryReport {
    pub max_asymmetry: f64,
    pub max_rho: f64,
    pub passed: bool,
}

fn rescale(rho: &mut [f64], grid: &AngularGrid, volume: f64) {
    let c = quad_square(rho, grid);
    let f = (volume / c).sqrt();
    rho.iter_mut().for_each(|r| *r *= f);
}

pub(crate) fn contact_angles(rho: &[f64], grid: &AngularGrid) -> Result<(f64, f64)> {
    let d = geometry::differentiate(rho, grid)?;
    let n = rho.len();
    let s0 = rho[0].hypot(d[0]);
    let sn = rho[n - 1].hypot(d[n - 1]);
    Ok(((-d[0] / s0).asin(), (d[n - 1] / sn).asin()))
}

/// Minimize `E^eps` on `{int rho^2 = V}` starting from `init`, with default
/// tolerances.
pub fn minimize_eps(params: &PhysicalParams, eps: f64, init: &SurfaceProfile) -> Result<EquilibriumSolution> {
    minimize_eps_with(params, eps, init, &SolverOptions::default())
}

/// Descent on the constraint manifold.
///
/// Each iteration builds a Newton direction from the bordered KKT system
/// (with a Levenberg shift `mu W` when the unshifted direction is not a
/// descent direction), moves along it with Armijo backtracking on `E^eps`,
/// and rescales `rho <- rho sqrt(V / C(rho))` so the constraint holds exactly.
/// Large shifts degenerate into a lumped-metric gradient step.
pub fn minimize_eps_with(
    params: &PhysicalParams,
    eps: f64,
    init: &SurfaceProfile,
    opts: &SolverOptions,
) -> Result<EquilibriumSolution> {
    params.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParams { name: "eps", reason: format!("must be > 0, got {eps}") });
    }
    let grid = init.grid().clone();
    let n = grid.len();
    let w = grid.weights().to_vec();
    let sigma = params.sigma;
    let mut rho = init.rho().to_vec();
    rescale(&mut rho, &grid, params.volume);

    let measure = |r: &[f64]| -> (f64, f64) {
        let mut el: f64 = 0.0;
        for k in 1..n - 1 {
            el = el.max((r[k] / w[k]).abs());
        }
        (el, r[0].abs().max(r[n - 1].abs()))
    };
    let merit = |el: f64, bc: f64| (el / opts.tol_el).max(bc / opts.tol_bc);

    let mut last_res = f64::INFINITY;
    for it in 0..opts.max_iters {
        let (r, p) = kkt_residual(&rho, &grid, params, eps)?;
        let (el, bc) = measure(&r);
        last_res = el.max(bc);
        if el < opts.tol_el * sigma && bc < opts.tol_bc * sigma {
            return finish(rho, grid, params, eps, it);
        }
        let e0 = energy_raw(&rho, &grid, params, eps);
        let k = hessian_raw(&rho, &grid, params, eps);
        let cur_merit = merit(el, bc);

        let mut accepted = None;
        'shifts: for &mu in &[0.0, 1.0, 10.0, 1e2, 1e3, 1e4, 1e6, 1e8] {
            let Some(dir) = kkt_direction(&k, &r, &rho, &w, p, mu * sigma) else { continue };
            let slope: f64 = r.iter().zip(&dir).map(|(a, b)| a * b).sum();
            let mut alpha = 1.0;
            for _ in 0..40 {
                let mut trial: Vec<f64> = rho.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
                if trial.iter().all(|v| *v > 0.0 && v.is_finite()) {
                    rescale(&mut trial, &grid, params.volume);
                    let e1 = energy_raw(&trial, &grid, params, eps);
                    if slope < 0.0 && e1 <= e0 + 1e-4 * alpha * slope {
                        accepted = Some(trial);
                        break 'shifts;
                    }
                    // Close to the solution energy differences drown in rounding;
                    // fall back on the residual for full Newton steps.
                    if mu == 0.0 && alpha == 1.0 {
                        let (rt, _) = kkt_residual(&trial, &grid, params, eps)?;
                        let (elt, bct) = measure(&rt);
                        if merit(elt, bct) < 0.5 * cur_merit && (e1 - e0) <= 1e-12 * e0.abs().max(1.0) {
                            accepted = Some(trial);
                            break 'shifts;
                        }
                    }
                }
                if slope >= 0.0 {
                    break;
                }
                alpha *= 0.5;
            }
        }
        match accepted {
            Some(next) => rho = next,
            None => {
                return Err(Error::Convergence {
                    eps,
                    iterations: it,
                    residual: last_res,
                    last: Box::new(SurfaceProfile::new(grid, rho)?),
                })
            }
        }
    }
    Err(Error::Convergence {
        eps,
        iterations: opts.max_iters,
        residual: last_res,
        last: Box::new(SurfaceProfile::new(grid, rho)?),
    })
}

// Solve [K - P W + mu W, -W rho; -(W rho)^T, 0] [d; dP] = [-r; 0].
fn kkt_direction(k: &DMatrix<f64>, r: &[f64], rho: &[f64], w: &[f64], p: f64, mu: f64) -> Option<Vec<f64>> {
    let n = r.len();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(k);
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        m[(i, i)] += (mu - p) * w[i];
        m[(i, n)] = -w[i] * rho[i];
        m[(n, i)] = -w[i] * rho[i];
        rhs[i] = -r[i];
    }
    let sol = m.lu().solve(&rhs)?;
    let d: Vec<f64> = sol.iter().take(n).cloned().collect();
    if d.iter().all(|v| v.is_finite()) {
        Some(d)
    } else {
        None
    }
}

fn finish(
    rho: Vec<f64>,
    grid: AngularGrid,
    params: &PhysicalParams,
    eps: f64,
    iterations: usize,
) -> Result<EquilibriumSolution> {
    let (r, p) = kkt_residual(&rho, &grid, params, eps)?;
    let rep = report_from_residual(&r, p, &grid);
    let contact_angles = contact_angles(&rho, &grid)?;
    let energy = energy_raw(&rho, &grid, params, eps);
    Ok(EquilibriumSolution {
        el_residual: rep.interior_sup(),
        bc_residuals: (rep.boundary_residual_lo, rep.boundary_residual_hi),
        multiplier: p,
        eps_used: eps,
        contact_angles,
        energy,
        iterations,
        profile: SurfaceProfile::new(grid, rho)?,
    })
}

/// Warm-started minimization down a strictly decreasing eps schedule.
pub fn continuation(
    params: &PhysicalParams,
    eps_schedule: &[f64],
    init: &SurfaceProfile,
) -> Result<(EquilibriumSolution, ContinuationReport)> {
    if eps_schedule.is_empty() {
        return Err(Error::InvalidParams { name: "eps_schedule", reason: "empty".into() });
    }
    if eps_schedule.iter().any(|e| !(*e > 0.0)) || eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParams {
            name: "eps_schedule",
            reason: "must be positive and strictly decreasing".into(),
        });
    }
    let mut report = ContinuationReport::default();
    let mut current = init.clone();
    let mut last = None;
    for &eps in eps_schedule {
        let sol = minimize_eps(params, eps, &current)?;
        let d = geometry::derivative(&sol.profile)?;
        report.eps_schedule.push(eps);
        report.sup_rho_prime.push(d.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
        let abs_d: Vec<f64> = d.iter().map(|v| v.abs()).collect();
        report.bv_norms.push(geometry::integrate(&abs_d, sol.profile.grid())?);
        report.multipliers.push(sol.multiplier);
        report.energies.push(sol.energy);
        current = sol.profile.clone();
        last = Some(sol);
    }
    Ok((last.expect("schedule is nonempty"), report))
}

/// `start, start*ratio, ...` down to and including `end`.
pub fn geometric_schedule(start: f64, end: f64, ratio: f64) -> Vec<f64> {
    let mut out = vec![start];
    let mut e = start;
    while e * ratio >= end * (1.0 - 1e-9) {
        e *= ratio;
        out.push(e);
    }
    if (out[out.len() - 1] - end).abs() > 1e-12 * end {
        out.push(end);
    }
    out
}

/// Constant start `sqrt(V / (theta_hi - theta_lo))`, then continuation from
/// `eps = 1e-2` down to `eps_min` with ratio 0.1.
pub fn solve(params: &PhysicalParams, n_cells: usize, eps_min: f64) -> Result<(EquilibriumSolution, ContinuationReport)> {
    params.validate()?;
    let grid = params.grid(n_cells)?;
    let init = SurfaceProfile::constant(grid.clone(), (params.volume / grid.length()).sqrt())?;
    let schedule = if eps_min >= 1e-2 { vec![eps_min] } else { geometric_schedule(1e-2, eps_min, 0.1) };
    continuation(params, &schedule, &init)
}

struct Shot {
    half: Vec<f64>,
    slope_lo: f64,
}

// Integrate the Euler-Lagrange ODE from the apex down to theta = 0, sampling
// every grid node on the way.
fn shoot_half(params: &PhysicalParams, grid: &AngularGrid, apex: f64, p: f64) -> Result<Shot> {
    let m = grid.apex_index();
    let nodes = grid.nodes();
    let (g, sigma) = (params.g, params.sigma);
    let rhs = move |t: f64, y: &[f64; 2]| -> [f64; 2] {
        let (r, d) = (y[0], y[1]);
        let s2 = r * r + d * d;
        let s3 = s2 * s2.sqrt();
        [d, (2.0 * d * d + r * r) / r + (g * r * t.sin() - p) * s3 / (sigma * r)]
    };
    let mut half = vec![0.0; m + 1];
    let mut y = [apex, 0.0];
    half[m] = apex;
    for j in (0..m).rev() {
        y = dopri45(&rhs, nodes[j + 1], y, nodes[j], 1e-12, 1e-14)?;
        if !(y[0] > 0.0) {
            return Err(Error::Integration(format!("radius left the admissible range at theta = {}", nodes[j])));
        }
        half[j] = y[0];
    }
    Ok(Shot { half, slope_lo: y[1] })
}

fn mirror(half: &[f64], n: usize) -> Vec<f64> {
    let mut full = vec![0.0; n];
    let m = half.len() - 1;
    for j in 0..=m {
        full[j] = half[j];
        full[n - 1 - j] = half[j];
    }
    full
}

fn shooting_residual(params: &PhysicalParams, grid: &AngularGrid, x: [f64; 2]) -> Result<([f64; 2], Shot)> {
    let shot = shoot_half(params, grid, x[0], x[1])?;
    let full = mirror(&shot.half, grid.len());
    let r0 = shot.half[0];
    let r1 = shot.slope_lo / r0.hypot(shot.slope_lo) + params.gamma_jump / params.sigma;
    let r2 = (quad_square(&full, grid) - params.volume) / params.volume;
    Ok(([r1, r2], shot))
}

fn newton_shoot(params: &PhysicalParams, grid: &AngularGrid, mut x: [f64; 2]) -> Result<([f64; 2], Shot)> {
    let norm = |r: &[f64; 2]| r[0].abs().max(r[1].abs());
    let (mut r, mut shot) = shooting_residual(params, grid, x)?;
    for _ in 0..60 {
        if r[0].abs() < 1e-12 && r[1].abs() < 1e-13 {
            return Ok((x, shot));
        }
        let ha = 1e-7 * x[0];
        let hp = 1e-7 * x[1].abs().max(params.sigma / x[0]);
        let (ra, _) = shooting_residual(params, grid, [x[0] + ha, x[1]])?;
        let (rp, _) = shooting_residual(params, grid, [x[0], x[1] + hp])?;
        let j = [
            [(ra[0] - r[0]) / ha, (rp[0] - r[0]) / hp],
            [(ra[1] - r[1]) / ha, (rp[1] - r[1]) / hp],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Shooting { residual: r });
        }
        let dx = [
            -(j[1][1] * r[0] - j[0][1] * r[1]) / det,
            -(-j[1][0] * r[0] + j[0][0] * r[1]) / det,
        ];
        let mut lam = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let xt = [x[0] + lam * dx[0], x[1] + lam * dx[1]];
            if xt[0] > 0.0 {
                if let Ok((rt, st)) = shooting_residual(params, grid, xt) {
                    if norm(&rt) < norm(&r) {
                        x = xt;
                        r = rt;
                        shot = st;
                        improved = true;
                        break;
                    }
                }
            }
            lam *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if r[0].abs() < 1e-10 && r[1].abs() < 1e-12 {
        Ok((x, shot))
    } else {
        Err(Error::Shooting { residual: r })
    }
}

/// Shooting from the apex for the symmetric sessile drop.
///
/// Unknowns are the apex radius and the pressure `P`; the conditions are the
/// contact law `rho'/s = -[[gamma]]/sigma` at `theta = 0` and the volume
/// constraint evaluated with the grid quadrature on the mirrored samples.
/// Large gravities are reached by a homotopy in `g` when a direct Newton
/// solve from the zero-gravity arc fails.
pub fn shoot_symmetric(params: &PhysicalParams, grid: &AngularGrid) -> Result<EquilibriumSolution> {
    params.validate()?;
    if !params.is_sessile() {
        return Err(Error::InvalidParams {
            name: "theta1",
            reason: "shooting is limited to the sessile case theta1 = theta2 = 0".into(),
        });
    }
    if !grid.is_symmetric() || grid.n_cells() % 2 != 0 || grid.theta_lo() != 0.0 {
        return Err(Error::InvalidGrid("shooting needs the sessile grid with an even cell count".into()));
    }
    // Zero-gravity circular arc as the starting point.
    let c = -params.gamma_jump / params.sigma;
    let area_factor = PI - c.acos() + c * (1.0 - c * c).sqrt();
    let radius = (params.volume / (2.0 * area_factor)).sqrt();
    let x0 = [radius * (1.0 + c), params.sigma / radius];

    let (x, shot) = match newton_shoot(params, grid, x0) {
        Ok(v) => v,
        Err(first) => {
            // Adaptive continuation in g with a secant predictor.
            let (mut s, mut ds) = (0.0f64, 1.0f64 / 16.0);
            let (mut x, mut prev) = (x0, None::<(f64, [f64; 2])>);
            let mut out = None;
            while s < 1.0 {
                let st = (s + ds).min(1.0);
                let mut q = *params;
                q.g = params.g * st;
                let guess = match prev {
                    Some((sp, xp)) => {
                        let f = (st - s) / (s - sp);
                        [x[0] + f * (x[0] - xp[0]), x[1] + f * (x[1] - xp[1])]
                    }
                    None => x,
                };
                match newton_shoot(&q, grid, guess).or_else(|_| newton_shoot(&q, grid, x)) {
                    Ok((xs, shot)) => {
                        prev = Some((s, x));
                        x = xs;
                        s = st;
                        out = Some(shot);
                        ds = (ds * 1.5).min(0.25);
                    }
                    Err(_) => {
                        ds *= 0.5;
                        if ds < 1e-4 {
                            return Err(first);
                        }
                    }
                }
            }
            (x, out.expect("at least one stage"))
        }
    };

    let full = mirror(&shot.half, grid.len());
    let profile = SurfaceProfile::new(grid.clone(), full)?;
    let rep = energy::first_variation(&profile, params, 0.0)?;
    let gamma2 = (-shot.slope_lo / shot.half[0].hypot(shot.slope_lo)).asin();
    Ok(EquilibriumSolution {
        energy: energy::energy(&profile, params),
        multiplier: x[1],
        eps_used: 0.0,
        el_residual: rep.interior_sup(),
        bc_residuals: (rep.boundary_residual_lo, rep.boundary_residual_hi),
        contact_angles: (gamma2, gamma2),
        iterations: 0,
        profile,
    })
}

/// `max |rho(pi/2 - t) - rho(pi/2 + t)|` over mirrored node pairs.
pub fn verify_symmetry(sol: &EquilibriumSolution) -> Result<SymmetryReport> {
    let grid = sol.profile.grid();
    if !grid.is_symmetric() {
        return Err(Error::InvalidGrid("symmetry check needs a grid symmetric about pi/2".into()));
    }
    let rho = sol.profile.rho();
    let n = rho.len();
    let max_asymmetry = (0..n / 2).fold(0.0f64, |m, j| m.max((rho[j] - rho[n - 1 - j]).abs()));
    let max_rho = sol.profile.max_rho();
    Ok(SymmetryReport { max_asymmetry, max_rho, passed: max_asymmetry <= 1e-8 * max_rho })
}
