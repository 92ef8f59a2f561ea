use std::f64::consts::PI;

use capdrop::energy::{energy, volume_functional};
use capdrop::equilibrium::solve;
use capdrop::geometry::{from_cartesian, integrate, to_cartesian};
use capdrop::relax::*;
use capdrop::{AngularGrid, Error, PhysicalParams, SurfaceProfile};

fn flat_params() -> PhysicalParams {
    PhysicalParams::sessile(0.0, 1.0, 0.0, PI)
}

fn flat(n: usize) -> SurfaceProfile {
    SurfaceProfile::constant(AngularGrid::sessile(n).unwrap(), 1.0).unwrap()
}

fn perturbed(rho0: &SurfaceProfile, f: impl Fn(f64) -> f64) -> SurfaceProfile {
    let grid = rho0.grid();
    let v0 = volume_functional(rho0);
    let rho: Vec<f64> = rho0.rho().iter().zip(grid.nodes()).map(|(r, t)| r + f(*t)).collect();
    let p = rho0.with_rho(rho).unwrap();
    let k = (v0 / volume_functional(&p)).sqrt();
    p.with_rho(p.rho().iter().map(|r| r * k).collect()).unwrap()
}

fn long_run() -> RelaxOptions {
    RelaxOptions { t_end: 8.0, ..RelaxOptions::default() }
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let p = PhysicalParams::sessile(1.0, 1.0, -0.3, PI);
    // The flow uses the unregularized energy, so the minimizer is taken at a
    // regularization well below the step tolerance.
    let (sol, _) = solve(&p, 200, 1e-9).unwrap();
    for (rho0, params) in [(flat(200), flat_params()), (sol.profile, p)] {
        let e0 = energy(&rho0, &params);
        let next = step(&rho0, &params, 1e-3).unwrap();
        let diff = next.rho().iter().zip(rho0.rho()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-10, "{diff}");
        assert!((energy(&next, &params) - e0).abs() <= 1e-12 * e0.abs().max(1.0));
    }
}

#[test]
fn energy_decreases_on_every_step() {
    let rho0 = flat(200);
    let params = flat_params();
    let mut p = perturbed(&rho0, |t| 0.05 * (2.0 * t).cos());
    let mut e = energy(&p, &params);
    for _ in 0..200 {
        p = step(&p, &params, 2e-5).unwrap();
        let e_new = energy(&p, &params);
        assert!(e_new < e);
        e = e_new;
    }
}

#[test]
fn volume_is_conserved_over_many_steps() {
    let params = PhysicalParams::sessile(1.0, 1.0, -0.3, PI);
    let mut p = perturbed(&flat(100), |t| 0.05 * (2.0 * t).cos() + 0.02 * (3.0 * t).sin());
    for _ in 0..10_000 {
        p = step(&p, &params, 5e-5).unwrap();
    }
    assert!((volume_functional(&p) - PI).abs() / PI <= 1e-8);
}

#[test]
fn flow_rate_dissipation_identity() {
    let params = PhysicalParams { kappa: 0.5, ..PhysicalParams::sessile(2.0, 1.0, -0.4, PI) };
    let p = perturbed(&flat(200), |t| 0.05 * (2.0 * t).cos() + 0.03 * (3.0 * t).cos());
    let rate = flow_rate(p.rho(), p.grid(), &params);
    assert!(rate.dissipation > 0.0);
    assert!((rate.energy_rate + rate.dissipation).abs() <= 1e-3 * rate.energy_rate.abs());
    // The pressure keeps d/dt int rho^2 = 0 to first order.
    let w = p.grid().weights();
    let dv: f64 = (0..w.len()).map(|k| 2.0 * w[k] * p.rho()[k] * rate.velocity[k]).sum();
    assert!(dv.abs() <= 1e-12 * rate.velocity.iter().map(|v| v.abs()).sum::<f64>().max(1.0));
    // Finite-difference energy rate.
    let dt = 1e-7;
    let next = step(&p, &params, dt).unwrap();
    let fd = (energy(&next, &params) - energy(&p, &params)) / dt;
    assert!((fd - rate.energy_rate).abs() <= 1e-3 * rate.energy_rate.abs(), "{fd} {}", rate.energy_rate);
}

#[test]
fn step_rejects_bad_input() {
    let p = perturbed(&flat(50), |t| 0.05 * (2.0 * t).cos());
    assert!(matches!(step(&p, &flat_params(), 0.0), Err(Error::InvalidParams { .. })));
    assert!(matches!(step(&p, &flat_params(), 1e6), Err(Error::InvalidProfile(_))));
}

#[test]
fn symmetric_perturbation_relaxes_to_the_flat_cap() {
    let rho0 = flat(200);
    let params = flat_params();
    let start = perturbed(&rho0, |t| 0.05 * (2.0 * t).cos());
    let trace = run(&start, &params, &rho0, &long_run()).unwrap();
    assert!(trace.energies.windows(2).all(|w| w[1] <= w[0]));
    assert!(trace.max_energy_increase <= 0.0);
    assert!(trace.max_volume_drift <= 1e-8);
    assert!(trace.volumes.iter().all(|v| (v - PI).abs() / PI <= 1e-8));
    assert!(*trace.l2_distance_to_equilibrium.last().unwrap() <= 1e-4);
    assert!(trace.fit_r2 >= 0.99);
    assert!(trace.max_dissipation_mismatch <= 1e-3);
    assert!(trace.decay_rate > 0.0);
    let predicted = predicted_decay_rate(&rho0, &params).unwrap();
    assert!((trace.decay_rate - predicted).abs() <= 0.2 * predicted, "{} vs {predicted}", trace.decay_rate);
    assert_eq!(trace.times.len(), trace.energies.len());
    assert_eq!(trace.times.len(), trace.contact_rhos.len());
    assert!((trace.times.last().unwrap() - 8.0).abs() < 1e-12);
    assert!(trace.final_profile.rho().iter().all(|r| (r - 1.0).abs() < 1e-3));
}

#[test]
fn asymmetric_perturbation_settles_on_a_shifted_cap() {
    let rho0 = flat(200);
    let params = flat_params();
    let start = perturbed(&rho0, |t| 0.03 * ((2.0 * t).cos() + 0.5 * (3.0 * t).cos()));
    let trace = run(&start, &params, &rho0, &long_run()).unwrap();
    let pole = *trace.pole_positions.last().unwrap();
    assert!(pole.abs() > 1e-4, "{pole}");
    // The final drop is the equilibrium about the final pole.
    let framed = from_cartesian(&to_cartesian(&trace.final_profile), pole, rho0.grid()).unwrap();
    let d: Vec<f64> = framed.rho().iter().zip(rho0.rho()).map(|(a, b)| (a - b).powi(2)).collect();
    assert!(integrate(&d, rho0.grid()).unwrap().sqrt() <= 1e-4);
    // Pole trajectory settles.
    let n = trace.pole_positions.len();
    let tail = &trace.pole_positions[n - n / 4..];
    let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread <= 1e-6, "{spread}");
    assert!(trace.fit_r2 >= 0.99);
}

#[test]
fn gravity_drop_relaxes() {
    let params = PhysicalParams::sessile(1.0, 1.0, -0.3, PI);
    let (sol, _) = solve(&params, 200, 1e-8).unwrap();
    let start = perturbed(&sol.profile, |t| 0.05 * (2.0 * t).cos());
    let opts = RelaxOptions { t_end: 4.0, ..RelaxOptions::default() };
    let trace = run(&start, &params, &sol.profile, &opts).unwrap();
    assert!(trace.energies.windows(2).all(|w| w[1] <= w[0]));
    let d = &trace.l2_distance_to_equilibrium;
    assert!(d.last().unwrap() < &(0.05 * d[0]));
    assert!(trace.decay_rate > 0.0);
}

#[test]
fn run_validates_options() {
    let rho0 = flat(50);
    let bad = RelaxOptions { dt0: 0.0, ..RelaxOptions::default() };
    assert!(run(&rho0, &flat_params(), &rho0, &bad).is_err());
    let other = flat(60);
    assert!(matches!(run(&other, &flat_params(), &rho0, &RelaxOptions::default()), Err(Error::InvalidGrid(_))));
    let short = RelaxOptions { max_steps: 3, ..RelaxOptions::default() };
    let start = perturbed(&rho0, |t| 0.05 * (2.0 * t).cos());
    assert!(matches!(run(&start, &flat_params(), &rho0, &short), Err(Error::Stiffness { .. })));
}
