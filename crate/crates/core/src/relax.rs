//! Volume-preserving gradient-flow relaxation with a linear contact law.
//!
//! This is a quasi-static stand-in for the fluid dynamics: interior nodes
//! move with the lumped-mass L2 gradient of the energy, the two contact
//! radii move with mobility `1 / kappa`, and a pressure `P(t)` keeps
//! `int rho^2` fixed. The velocity is
//! `v = -A^{-1} (grad E - P W rho)` with `A = W` inside and `A = kappa` at
//! the ends, so `dE/dt = -sum_inside w v^2 - kappa (v_lo^2 + v_hi^2)`.

use serde::Serialize;

use crate::energy::{energy_raw, gradient_raw, quad_square, PhysicalParams};
use crate::error::{Error, Result};
use crate::geometry::{to_cartesian, AngularGrid, SurfaceProfile};
use crate::moving_frame::recentre;
use crate::numerics::linear_fit;
use crate::spectral::{constrained_eigen, shift_function, sigma_form, Subspace};

/// Time stepping controls for [`run`].
#[derive(Clone, Copy, Debug)]
pub struct RelaxOptions {
    pub t_end: f64,
    pub dt0: f64,
    pub dt_max: f64,
    /// Time between recentred snapshots.
    pub snapshot_interval: f64,
    pub max_steps: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self { t_end: 6.0, dt0: 1e-6, dt_max: 1e-2, snapshot_interval: 0.05, max_steps: 5_000_000 }
    }
}

/// Snapshot history of a relaxation run.
#[derive(Clone, Debug, Serialize)]
pub struct RelaxationTrace {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub volumes: Vec<f64>,
    pub pole_positions: Vec<f64>,
    pub contact_rhos: Vec<(f64, f64)>,
    pub l2_distance_to_equilibrium: Vec<f64>,
    /// `-slope` of `ln ||xi||` against `t` over the second half of the run.
    pub decay_rate: f64,
    pub fit_r2: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest energy increase over one accepted step (rounding allowance).
    pub max_energy_increase: f64,
    /// Largest `|dE/dt + D| / D` observed while `D` is resolvable.
    pub max_dissipation_mismatch: f64,
    /// Largest `|C - V| / V` after any step.
    pub max_volume_drift: f64,
    pub final_profile: SurfaceProfile,
}

/// Instantaneous velocity, pressure and dissipation of the flow.
#[derive(Clone, Debug)]
pub struct FlowRate {
    pub velocity: Vec<f64>,
    pub pressure: f64,
    /// `sum_inside w v^2 + kappa (v_lo^2 + v_hi^2)`.
    pub dissipation: f64,
    /// `grad E . v`, computed independently of the dissipation.
    pub energy_rate: f64,
}

pub fn flow_rate(rho: &[f64], grid: &AngularGrid, params: &PhysicalParams) -> FlowRate {
    let n = rho.len();
    let w = grid.weights();
    let g = gradient_raw(rho, grid, params, 0.0);
    let mob = |k: usize| if k == 0 || k == n - 1 { params.kappa } else { w[k] };
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n {
        let a = mob(k);
        num += w[k] * rho[k] * g[k] / a;
        den += (w[k] * rho[k]).powi(2) / a;
    }
    let p = num / den;
    let velocity: Vec<f64> = (0..n).map(|k| -(g[k] - p * w[k] * rho[k]) / mob(k)).collect();
    let dissipation = (0..n).map(|k| mob(k) * velocity[k].powi(2)).sum();
    let energy_rate = g.iter().zip(&velocity).map(|(a, b)| a * b).sum();
    FlowRate { velocity, pressure: p, dissipation, energy_rate }
}

fn advance(rho: &[f64], v: &[f64], dt: f64, grid: &AngularGrid, volume: f64) -> Option<Vec<f64>> {
    let mut next: Vec<f64> = rho.iter().zip(v).map(|(r, v)| r + dt * v).collect();
    if next.iter().any(|r| !(*r > 0.0)) {
        return None;
    }
    let f = (volume / quad_square(&next, grid)).sqrt();
    next.iter_mut().for_each(|r| *r *= f);
    Some(next)
}

/// One explicit Euler step followed by the exact volume rescale.
pub fn step(profile: &SurfaceProfile, params: &PhysicalParams, dt: f64) -> Result<SurfaceProfile> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParams { name: "dt", reason: format!("must be > 0, got {dt}") });
    }
    let grid = profile.grid();
    let rate = flow_rate(profile.rho(), grid, params);
    let next = advance(profile.rho(), &rate.velocity, dt, grid, params.volume)
        .ok_or_else(|| Error::InvalidProfile("step made the radius nonpositive".into()))?;
    SurfaceProfile::new(grid.clone(), next)
}

/// Adaptive relaxation from `profile`, recentring every snapshot on the
/// equilibrium `rho0`.
///
/// A step is accepted when the energy does not increase beyond a rounding
/// allowance; the step then grows by 1.25 up to `dt_max` and up to 0.9 times
/// the smallest step ever rejected. A rejected step is halved.
pub fn run(
    profile: &SurfaceProfile,
    params: &PhysicalParams,
    rho0: &SurfaceProfile,
    opts: &RelaxOptions,
) -> Result<RelaxationTrace> {
    params.validate()?;
    if !(opts.t_end > 0.0 && opts.dt0 > 0.0 && opts.dt_max >= opts.dt0 && opts.snapshot_interval > 0.0) {
        return Err(Error::InvalidParams { name: "relax", reason: "times must be positive, dt_max >= dt0".into() });
    }
    if profile.grid() != rho0.grid() {
        return Err(Error::InvalidGrid("profile and equilibrium use different grids".into()));
    }
    let grid = profile.grid().clone();
    let volume = params.volume;
    let mut rho = profile.rho().to_vec();
    let mut t = 0.0;
    let mut dt = opts.dt0;
    let mut cap = opts.dt_max;
    let mut trace = RelaxationTrace {
        times: vec![],
        energies: vec![],
        volumes: vec![],
        pole_positions: vec![],
        contact_rhos: vec![],
        l2_distance_to_equilibrium: vec![],
        decay_rate: f64::NAN,
        fit_r2: f64::NAN,
        accepted_steps: 0,
        rejected_steps: 0,
        max_energy_increase: 0.0,
        max_dissipation_mismatch: 0.0,
        max_volume_drift: 0.0,
        final_profile: profile.clone(),
    };
    let snapshot = |rho: &[f64], t: f64, trace: &mut RelaxationTrace| -> Result<()> {
        let p = SurfaceProfile::new(grid.clone(), rho.to_vec())?;
        let frame = recentre(&to_cartesian(&p), rho0)?;
        trace.times.push(t);
        trace.energies.push(energy_raw(rho, &grid, params, 0.0));
        trace.volumes.push(quad_square(rho, &grid));
        trace.pole_positions.push(frame.pole_x);
        trace.contact_rhos.push((rho[0], rho[rho.len() - 1]));
        trace.l2_distance_to_equilibrium.push(frame.l2_perturbation);
        Ok(())
    };
    snapshot(&rho, 0.0, &mut trace)?;
    let mut next_snap = opts.snapshot_interval;
    let mut e_old = energy_raw(&rho, &grid, params, 0.0);
    let mut steps = 0;
    while t < opts.t_end * (1.0 - 1e-14) {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Stiffness { t });
        }
        let target = next_snap.min(opts.t_end);
        let h = dt.min(target - t);
        let rate = flow_rate(&rho, &grid, params);
        if rate.dissipation > 1e-10 * e_old.abs().max(1.0) {
            let mismatch = (rate.energy_rate + rate.dissipation).abs() / rate.dissipation;
            trace.max_dissipation_mismatch = trace.max_dissipation_mismatch.max(mismatch);
        }
        let accepted = advance(&rho, &rate.velocity, h, &grid, volume).and_then(|next| {
            let e_new = energy_raw(&next, &grid, params, 0.0);
            (e_new <= e_old + 8.0 * f64::EPSILON * e_old.abs().max(1.0)).then_some((next, e_new))
        });
        match accepted {
            Some((next, e_new)) => {
                trace.max_energy_increase = trace.max_energy_increase.max(e_new - e_old);
                rho = next;
                e_old = e_new;
                t += h;
                trace.accepted_steps += 1;
                let drift = (quad_square(&rho, &grid) - volume).abs() / volume;
                trace.max_volume_drift = trace.max_volume_drift.max(drift);
                if h == dt {
                    dt = (dt * 1.25).min(cap);
                }
                if t >= target * (1.0 - 1e-14) {
                    t = target;
                    snapshot(&rho, t, &mut trace)?;
                    next_snap = target + opts.snapshot_interval;
                }
            }
            None => {
                trace.rejected_steps += 1;
                cap = cap.min(0.9 * h);
                dt = 0.5 * h;
                if dt < 1e-14 {
                    return Err(Error::Stiffness { t });
                }
            }
        }
    }
    let (ts, ls): (Vec<f64>, Vec<f64>) = trace
        .times
        .iter()
        .zip(&trace.l2_distance_to_equilibrium)
        .filter(|(t, d)| **t >= 0.5 * opts.t_end && **d > 1e-14)
        .map(|(t, d)| (*t, d.ln()))
        .unzip();
    if ts.len() >= 3 {
        let (_, slope, r2) = linear_fit(&ts, &ls);
        trace.decay_rate = -slope;
        trace.fit_r2 = r2;
    }
    trace.final_profile = SurfaceProfile::new(grid, rho)?;
    Ok(trace)
}

/// Linearized decay rate of the flow about the equilibrium `rho0`: the
/// smallest non-translational eigenvalue of the (1, Sigma) form on the
/// volume-preserving subspace, measured in the mobility metric
/// `diag(kappa, w_1, ..., w_{N-1}, kappa)`.
pub fn predicted_decay_rate(rho0: &SurfaceProfile, params: &PhysicalParams) -> Result<f64> {
    let mut form = sigma_form(rho0, params)?;
    let n = form.mass.nrows();
    form.mass[(0, 0)] = params.kappa;
    form.mass[(n - 1, n - 1)] = params.kappa;
    let decomp = constrained_eigen(&form, Subspace::MassConstrained)?;
    let xis = shift_function(rho0)?;
    // Drop whichever of the two lowest modes is the translation.
    let lowest = (0..2.min(decomp.eigenvalues.len()))
        .max_by(|&i, &j| {
            let a = decomp.inner(&decomp.eigenvectors[i], &xis).abs();
            let b = decomp.inner(&decomp.eigenvectors[j], &xis).abs();
            a.total_cmp(&b)
        })
        .map(|k| 1 - k)
        .unwrap_or(0);
    Ok(decomp.eigenvalues[lowest])
}
