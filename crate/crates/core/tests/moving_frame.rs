use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use capdrop::equilibrium::shoot_symmetric;
use capdrop::geometry::{integrate, to_cartesian};
use capdrop::moving_frame::*;
use capdrop::spectral::{h1_norm_sq, shift_function};
use capdrop::{AngularGrid, CartesianCurve, Error, PhysicalParams, SurfaceProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat(n: usize) -> SurfaceProfile {
    SurfaceProfile::constant(AngularGrid::sessile(n).unwrap(), 1.0).unwrap()
}

fn g1(n: usize) -> SurfaceProfile {
    let p = PhysicalParams::sessile(1.0, 1.0, -0.3, PI);
    shoot_symmetric(&p, &AngularGrid::sessile(n).unwrap()).unwrap().profile
}

/// `rho0 + amp * f`, rescaled to the volume of `rho0`.
fn perturbed(rho0: &SurfaceProfile, amp: f64, f: impl Fn(f64) -> f64) -> SurfaceProfile {
    let grid = rho0.grid();
    let v0 = integrate(&rho0.rho().iter().map(|r| r * r).collect::<Vec<_>>(), grid).unwrap();
    let rho: Vec<f64> = rho0.rho().iter().zip(grid.nodes()).map(|(r, t)| r + amp * f(*t)).collect();
    let v = integrate(&rho.iter().map(|r| r * r).collect::<Vec<_>>(), grid).unwrap();
    rho0.with_rho(rho.iter().map(|r| r * (v0 / v).sqrt()).collect()).unwrap()
}

fn l2(v: &[f64], grid: &AngularGrid) -> f64 {
    integrate(&v.iter().map(|x| x * x).collect::<Vec<_>>(), grid).unwrap().sqrt()
}

#[test]
fn unshifted_equilibrium() {
    for rho0 in [flat(400), g1(400)] {
        let s = recentre(&to_cartesian(&rho0), &rho0).unwrap();
        assert!(s.pole_x.abs() <= 1e-8);
        assert!(s.perturbation.iter().all(|x| x.abs() < 1e-8));
        assert!(s.xi3.iter().zip(shift_function(&rho0).unwrap()).all(|(a, b)| (a - b).abs() < 1e-6));
    }
}

#[test]
fn shifted_equilibria_are_recovered() {
    for rho0 in [flat(400), g1(400)] {
        let xis = shift_function(&rho0).unwrap();
        let nxis = l2(&xis, rho0.grid());
        // Rounding allowance of the quadrature once xi itself is at rounding level.
        let floor = f64::EPSILON * l2(rho0.rho(), rho0.grid()) * nxis;
        let curve = to_cartesian(&rho0);
        for delta in [-0.1, -0.05, -0.01, 0.01, 0.05, 0.1] {
            let s = recentre(&curve.translated(delta), &rho0).unwrap();
            assert!((s.pole_x - delta).abs() <= 1e-3, "{delta}: {}", s.pole_x);
            assert!(s.l2_perturbation <= 1e-3);
            assert!(s.ortho_residual.abs() <= 1e-6 * s.l2_perturbation * nxis + floor);
        }
    }
}

#[test]
fn perturbed_equilibrium_is_kernel_orthogonal() {
    let rho0 = g1(400);
    let xis = shift_function(&rho0).unwrap();
    let shapes: [fn(f64) -> f64; 2] = [|t| (2.0 * t).cos(), |t| (3.0 * t).cos() + 0.4 * t.sin()];
    for f in shapes {
        let p = perturbed(&rho0, 0.02, f);
        let s = recentre(&to_cartesian(&p), &rho0).unwrap();
        let bound = 1e-6 * s.l2_perturbation * l2(&xis, rho0.grid());
        assert!(s.ortho_residual.abs() <= bound, "{} > {bound}", s.ortho_residual);
        let pts = to_cartesian(&p);
        let (x_hi, x_lo) = (pts.points()[0].0, pts.points().last().unwrap().0);
        assert!(s.pole_x > x_lo && s.pole_x < x_hi);
        // The least-squares pole and the orthogonal pole nearly coincide.
        assert!((s.objective_minimizer - s.pole_x).abs() <= 1e-3);
        assert!(s.local_minima.iter().any(|m| (m - s.objective_minimizer).abs() < 1e-12));
    }
}

#[test]
fn least_squares_stationarity() {
    let rho0 = g1(400);
    let curve = to_cartesian(&perturbed(&rho0, 0.02, |t| (2.0 * t).cos())).translated(0.03);
    let s = recentre(&curve, &rho0).unwrap();
    let j = |c: f64| -> f64 {
        let st = frame_at(&curve, &rho0, c).unwrap();
        st.l2_perturbation.powi(2)
    };
    let c = s.objective_minimizer;
    let h = 1e-5;
    let slope = (j(c + h) - j(c - h)) / (2.0 * h);
    let curvature = (j(c + h) - 2.0 * j(c) + j(c - h)) / (h * h);
    assert!(curvature > 0.0);
    assert!(slope.abs() <= 1e-6 * curvature, "{slope} {curvature}");
}

#[test]
fn recentring_is_idempotent() {
    let rho0 = g1(400);
    let curve = to_cartesian(&perturbed(&rho0, 0.03, |t| (2.0 * t).cos() + 0.5 * (3.0 * t).cos())).translated(-0.04);
    let first = recentre(&curve, &rho0).unwrap();
    let moved = curve.translated(-first.pole_x);
    let second = recentre(&moved, &rho0).unwrap();
    assert!(second.pole_x.abs() <= 1e-8, "{}", second.pole_x);
}

#[test]
fn frame_at_matches_recentre() {
    let rho0 = flat(200);
    let curve = to_cartesian(&rho0).translated(0.05);
    let s = recentre(&curve, &rho0).unwrap();
    let f = frame_at(&curve, &rho0, s.pole_x).unwrap();
    assert_eq!(f.perturbation, s.perturbation);
    assert_eq!(f.lambda, s.lambda);
}

#[test]
fn lambda_examples() {
    let f = flat(400);
    let s = frame_at(&to_cartesian(&f), &f, 0.0).unwrap();
    assert_abs_diff_eq!(s.lambda, 2.0 / PI, epsilon = 1e-10);
    assert_abs_diff_eq!(lambda_factor(&s, &f).unwrap(), 2.0 / PI, epsilon = 1e-10);

    let rho0 = g1(400);
    let xis = shift_function(&rho0).unwrap();
    let inv = 1.0 / l2(&xis, rho0.grid()).powi(2);
    let s = frame_at(&to_cartesian(&rho0), &rho0, 0.0).unwrap();
    assert!((s.lambda - inv).abs() <= 1e-6 * inv);

    let p = perturbed(&rho0, 0.002, |t| (2.0 * t).cos());
    let xi: Vec<f64> = p.rho().iter().zip(rho0.rho()).map(|(a, b)| a - b).collect();
    assert!(h1_norm_sq(&xi, rho0.grid()).unwrap().sqrt() <= 0.01);
    let s = recentre(&to_cartesian(&p), &rho0).unwrap();
    assert!((s.lambda - inv).abs() <= 0.05 * s.lambda);
}

#[test]
fn lambda_stays_positive_for_moderate_perturbations() {
    let rho0 = g1(200);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shape = move |t: f64| c[0] * (2.0 * t).cos() + c[1] * (3.0 * t).cos() + c[2] * (4.0 * t).sin() + c[3] * t.sin();
        let probe = perturbed(&rho0, 0.01, &shape);
        let xi: Vec<f64> = probe.rho().iter().zip(rho0.rho()).map(|(a, b)| a - b).collect();
        let norm = h1_norm_sq(&xi, rho0.grid()).unwrap().sqrt();
        let p = perturbed(&rho0, 0.01 * 0.1 / norm, &shape);
        let s = recentre(&to_cartesian(&p), &rho0).unwrap();
        assert!(s.lambda > 0.0);
    }
}

#[test]
fn degenerate_frame_is_reported() {
    let f = flat(100);
    let mut s = frame_at(&to_cartesian(&f), &f, 0.0).unwrap();
    s.xi3 = f.grid().nodes().iter().map(|t| t.sin()).collect();
    assert!(matches!(lambda_factor(&s, &f), Err(Error::DegenerateFrame(_))));
}

#[test]
fn pole_velocity_examples() {
    let f = flat(400);
    let s = frame_at(&to_cartesian(&f), &f, 0.0).unwrap();
    let t = f.grid().nodes();
    assert_eq!(pole_velocity(&s, &f, &vec![0.0; t.len()]).unwrap(), 0.0);
    let xis = shift_function(&f).unwrap();
    assert_abs_diff_eq!(pole_velocity(&s, &f, &xis).unwrap(), 1.0, epsilon = 1e-12);
    // int_0^pi cos(theta) cos(2 theta) = 0.
    let cos2: Vec<f64> = t.iter().map(|t| (2.0 * t).cos()).collect();
    assert!(pole_velocity(&s, &f, &cos2).unwrap().abs() < 1e-12);
    let cos3: Vec<f64> = t.iter().map(|t| t.cos().powi(3)).collect();
    assert_abs_diff_eq!(pole_velocity(&s, &f, &cos3).unwrap(), 0.75, epsilon = 1e-8);

    let rho0 = g1(400);
    let s = frame_at(&to_cartesian(&rho0), &rho0, 0.0).unwrap();
    let xis = shift_function(&rho0).unwrap();
    assert_abs_diff_eq!(pole_velocity(&s, &rho0, &xis).unwrap(), 1.0, epsilon = 1e-6);
    assert!(pole_velocity(&s, &rho0, &xis[1..]).is_err());
}

#[test]
fn pole_velocity_predicts_translation() {
    // A translation by dc changes rho by about dc * xi_s in the static frame.
    let rho0 = g1(400);
    let curve = to_cartesian(&rho0);
    let dc = 1e-5;
    let moved = frame_at(&curve.translated(dc), &rho0, 0.0).unwrap();
    let rate: Vec<f64> = moved.perturbation.iter().map(|x| x / dc).collect();
    let s = frame_at(&curve, &rho0, 0.0).unwrap();
    assert_abs_diff_eq!(pole_velocity(&s, &rho0, &rate).unwrap(), 1.0, epsilon = 1e-3);
}

#[test]
fn non_star_shaped_curves_are_rejected() {
    let rho0 = flat(100);
    let zigzag = CartesianCurve::new(vec![(1.0, 0.0), (-0.5, 0.5), (0.5, 1.0), (-1.0, 0.0)]).unwrap();
    assert!(matches!(recentre(&zigzag, &rho0), Err(Error::RecentreDomain(_))));
    let collapsed = CartesianCurve::new(vec![(0.0, 0.0), (0.0, 1.0), (0.0, 0.0)]).unwrap();
    assert!(matches!(recentre(&collapsed, &rho0), Err(Error::RecentreDomain(_))));
}
