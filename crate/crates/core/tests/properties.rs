use std::f64::consts::PI;

use capdrop::energy::{energy, energy_eps, energy_gradient, energy_lower_bound, volume_functional};
use capdrop::geometry::{differentiate, from_cartesian, integrate, to_cartesian};
use capdrop::{AngularGrid, PhysicalParams, SurfaceProfile};
use proptest::prelude::*;

/// Positive profile from a few Fourier coefficients.
fn profile(n: usize, base: f64, c: &[f64]) -> SurfaceProfile {
    let grid = AngularGrid::sessile(n).unwrap();
    SurfaceProfile::from_fn(grid, |t| {
        base + c.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * t).cos()).sum::<f64>()
    })
    .unwrap()
}

fn normalized(p: &SurfaceProfile, volume: f64) -> SurfaceProfile {
    let k = (volume / volume_functional(p)).sqrt();
    p.with_rho(p.rho().iter().map(|r| r * k).collect()).unwrap()
}

fn params() -> impl Strategy<Value = PhysicalParams> {
    (0.0..5.0f64, 0.2..3.0f64, -0.9..0.9f64, 0.5..5.0f64, 0.0..0.5f64, 0.0..0.5f64).prop_map(
        |(g, sigma, gj, v, t1, t2)| PhysicalParams {
            theta1: t1,
            theta2: t2,
            ..PhysicalParams::sessile(g, sigma, gj * sigma, v)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn energy_respects_lower_bound(p in params(), c in prop::collection::vec(-0.3..0.3f64, 4)) {
        let grid = p.grid(60).unwrap();
        let raw = SurfaceProfile::from_fn(grid, |t| 1.0 + c.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * t).sin()).sum::<f64>()).unwrap();
        let rho = normalized(&raw, p.volume);
        prop_assert!(energy(&rho, &p) >= energy_lower_bound(&p) - 1e-12);
    }

    #[test]
    fn regularization_only_adds(p in params(), eps in 0.0..1.0f64, c in prop::collection::vec(-0.2..0.2f64, 3)) {
        let grid = p.grid(40).unwrap();
        let rho = SurfaceProfile::from_fn(grid, |t| 1.0 + c[0] * t.sin() + c[1] * (2.0 * t).cos() + c[2] * t).unwrap();
        prop_assert!(energy_eps(&rho, &p, eps) >= energy(&rho, &p) - 1e-14);
    }

    #[test]
    fn volume_scales_quadratically(k in 0.1..10.0f64, c in prop::collection::vec(-0.3..0.3f64, 3)) {
        let p = profile(40, 1.0, &c);
        let q = p.with_rho(p.rho().iter().map(|r| r * k).collect()).unwrap();
        let (a, b) = (volume_functional(&q), k * k * volume_functional(&p));
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn derivative_parity(c in prop::collection::vec(-0.3..0.3f64, 4)) {
        // Symmetric about pi/2 gives an antisymmetric derivative.
        let grid = AngularGrid::sessile(80).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|t| {
            let u = (t - PI / 2.0).powi(2);
            1.0 + c.iter().enumerate().map(|(k, a)| a * u.powi(k as i32 + 1)).sum::<f64>()
        }).collect();
        let d = differentiate(&f, &grid).unwrap();
        let n = d.len();
        for j in 0..n {
            prop_assert!((d[j] + d[n - 1 - j]).abs() <= 1e-9);
        }
    }

    #[test]
    fn quadrature_is_exact_for_cubics(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, d in -2.0..2.0f64, lo in 0.0..1.0f64, len in 0.5..2.0f64, half in 2usize..40) {
        let grid = AngularGrid::new(lo, lo + len, 2 * half).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|t| a + b * t + c * t * t + d * t * t * t).collect();
        let hi = lo + len;
        let prim = |t: f64| a * t + b * t * t / 2.0 + c * t.powi(3) / 3.0 + d * t.powi(4) / 4.0;
        let exact = prim(hi) - prim(lo);
        prop_assert!((integrate(&f, &grid).unwrap() - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
    }

    #[test]
    fn cartesian_round_trip(c in prop::collection::vec(-0.15..0.15f64, 4), base in 0.5..2.0f64) {
        let p = profile(120, base, &c);
        let back = from_cartesian(&to_cartesian(&p), 0.0, p.grid()).unwrap();
        for (a, b) in back.rho().iter().zip(p.rho()) {
            prop_assert!((a - b).abs() <= 1e-10 * base);
        }
    }

    #[test]
    fn gradient_matches_directional_difference(p in params(), c in prop::collection::vec(-0.2..0.2f64, 3), dir in prop::collection::vec(-1.0..1.0f64, 3)) {
        let grid = p.grid(40).unwrap();
        let rho = SurfaceProfile::from_fn(grid.clone(), |t| 1.0 + c[0] * t.sin() + c[1] * (2.0 * t).cos() + c[2] * (3.0 * t).sin()).unwrap();
        let h: Vec<f64> = grid.nodes().iter().map(|t| dir[0] + dir[1] * t.cos() + dir[2] * (2.0 * t).sin()).collect();
        let g = energy_gradient(&rho, &p, 1e-3);
        let analytic: f64 = g.iter().zip(&h).map(|(a, b)| a * b).sum();
        let s = 1e-6;
        let shifted = |sign: f64| rho.with_rho(rho.rho().iter().zip(&h).map(|(r, v)| r + sign * s * v).collect()).unwrap();
        let fd = (energy_eps(&shifted(1.0), &p, 1e-3) - energy_eps(&shifted(-1.0), &p, 1e-3)) / (2.0 * s);
        prop_assert!((fd - analytic).abs() <= 1e-6 * analytic.abs().max(1.0), "{} vs {}", fd, analytic);
    }

    #[test]
    fn reflection_preserves_energy(p0 in params(), c in prop::collection::vec(-0.2..0.2f64, 3)) {
        let p = PhysicalParams { theta1: 0.0, theta2: 0.0, ..p0 };
        let grid = p.grid(60).unwrap();
        let rho = SurfaceProfile::from_fn(grid, |t| 1.0 + c[0] * t.sin() + 0.2 * c[1] * t + 0.05 * c[2] * t * t).unwrap();
        let mirrored = rho.with_rho(rho.rho().iter().rev().cloned().collect()).unwrap();
        let (a, b) = (energy(&rho, &p), energy(&mirrored, &p));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
