//! Gravity-capillary energy, its regularization, the volume functional, the
//! curvature of a polar graph and the discrete first variation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::elements::quadrature;
use crate::error::{Error, Result};
use crate::geometry::{self, AngularGrid, SurfaceProfile};

/// Physical data of the drop.
///
/// `volume` is the value of `int rho^2 dtheta`, twice the enclosed area.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhysicalParams {
    pub g: f64,
    pub sigma: f64,
    /// Wetting-energy jump `[[gamma]]`.
    pub gamma_jump: f64,
    pub volume: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Contact-point mobility.
    pub kappa: f64,
}

impl PhysicalParams {
    /// Flat support, unit mobility.
    pub fn sessile(g: f64, sigma: f64, gamma_jump: f64, volume: f64) -> Self {
        Self { g, sigma, gamma_jump, volume, theta1: 0.0, theta2: 0.0, kappa: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParams { name, reason });
        let fields = [
            ("g", self.g),
            ("sigma", self.sigma),
            ("gamma_jump", self.gamma_jump),
            ("volume", self.volume),
            ("theta1", self.theta1),
            ("theta2", self.theta2),
            ("kappa", self.kappa),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return bad(name, format!("{v} is not finite"));
            }
        }
        if self.g < 0.0 {
            return bad("g", format!("gravity must be >= 0, got {}", self.g));
        }
        if self.sigma <= 0.0 {
            return bad("sigma", format!("surface tension must be > 0, got {}", self.sigma));
        }
        if self.volume <= 0.0 {
            return bad("volume", format!("volume must be > 0, got {}", self.volume));
        }
        if self.kappa <= 0.0 {
            return bad("kappa", format!("mobility must be > 0, got {}", self.kappa));
        }
        if self.gamma_jump.abs() >= self.sigma {
            return bad(
                "gamma_jump",
                format!(
                    "Young relation violated: |gamma_jump| = {} must be < sigma = {}",
                    self.gamma_jump.abs(),
                    self.sigma
                ),
            );
        }
        for (name, v) in [("theta1", self.theta1), ("theta2", self.theta2)] {
            if !(0.0..PI / 2.0).contains(&v) {
                return bad(name, format!("inclination must lie in [0, pi/2), got {v}"));
            }
        }
        Ok(())
    }

    pub fn theta_lo(&self) -> f64 {
        self.theta2
    }

    pub fn theta_hi(&self) -> f64 {
        PI - self.theta1
    }

    /// Grid on `[theta_2, pi - theta_1]`.
    pub fn grid(&self, n_cells: usize) -> Result<AngularGrid> {
        AngularGrid::new(self.theta_lo(), self.theta_hi(), n_cells)
    }

    pub fn is_sessile(&self) -> bool {
        self.theta1 == 0.0 && self.theta2 == 0.0
    }
}

/// Discrete first variation at a profile.
///
/// `interior_gradient[k]` is the nodal residual of the discrete energy
/// divided by the lumped weight, a consistent approximation of
/// `g rho^2 sin + sigma rho H - eps rho'' - P rho`. The two endpoint rows
/// carry the contact conditions instead and are reported through the
/// boundary residuals, so `interior_gradient` is zero at both ends.
#[derive(Clone, Debug, Serialize)]
pub struct VariationReport {
    pub interior_gradient: Vec<f64>,
    /// Approximates `(sigma rho'/s + eps rho')(theta_lo) + [[gamma]]`.
    pub boundary_residual_lo: f64,
    /// Approximates `(sigma rho'/s + eps rho')(theta_hi) - [[gamma]]`.
    pub boundary_residual_hi: f64,
    pub multiplier: f64,
}

impl VariationReport {
    /// Largest interior residual.
    pub fn interior_sup(&self) -> f64 {
        self.interior_gradient.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The directional derivative `dE[h]` this report encodes, given the grid
    /// weights. For `h` with `int rho h = 0` it equals the derivative of the
    /// discrete energy.
    pub fn pairing(&self, h: &[f64], weights: &[f64], rho: &[f64]) -> f64 {
        let n = h.len();
        let mut s = 0.0;
        for k in 1..n - 1 {
            s += weights[k] * self.interior_gradient[k] * h[k];
        }
        s -= self.boundary_residual_lo * h[0];
        s += self.boundary_residual_hi * h[n - 1];
        let rho_h: f64 = (0..n).map(|k| weights[k] * rho[k] * h[k]).sum();
        s + self.multiplier * rho_h
    }
}

/// `int rho^2 dtheta` with the grid quadrature.
pub fn volume_functional(profile: &SurfaceProfile) -> f64 {
    quad_square(profile.rho(), profile.grid())
}

pub(crate) fn quad_square(v: &[f64], grid: &AngularGrid) -> f64 {
    v.iter().zip(grid.weights()).map(|(r, w)| w * r * r).sum()
}

/// The four homogeneous pieces of the regularized energy.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct EnergyParts {
    /// `(g/3) int rho^3 sin`, degree 3.
    pub gravity: f64,
    /// `sigma int sqrt(rho^2 + rho'^2)`, degree 1.
    pub length: f64,
    /// `(eps/2) int rho'^2`, degree 2.
    pub penalty: f64,
    /// `-[[gamma]] (rho_lo + rho_hi)`, degree 1.
    pub boundary: f64,
}

impl EnergyParts {
    fn total(&self) -> f64 {
        self.gravity + self.length + self.penalty + self.boundary
    }

    // rho . grad E, by Euler's theorem on homogeneous functions.
    fn euler(&self) -> f64 {
        3.0 * self.gravity + self.length + 2.0 * self.penalty + self.boundary
    }
}

pub(crate) fn energy_parts(rho: &[f64], grid: &AngularGrid, p: &PhysicalParams, eps: f64) -> EnergyParts {
    let mut parts = EnergyParts::default();
    if p.g != 0.0 {
        let mut s = 0.0;
        for ((r, w), t) in rho.iter().zip(grid.weights()).zip(grid.nodes()) {
            s += w * r * r * r * t.sin();
        }
        parts.gravity = p.g / 3.0 * s;
    }
    let mut len = 0.0;
    let mut pen = 0.0;
    for q in quadrature(grid) {
        let u = q.value(rho);
        let d = q.slope(rho);
        len += q.weight * u.hypot(d);
        pen += q.weight * d * d;
    }
    parts.length = p.sigma * len;
    parts.penalty = 0.5 * eps * pen;
    parts.boundary = -p.gamma_jump * (rho[0] + rho[rho.len() - 1]);
    parts
}

pub fn energy(profile: &SurfaceProfile, params: &PhysicalParams) -> f64 {
    energy_eps(profile, params, 0.0)
}

/// Energy plus `(eps/2) int rho'^2`.
pub fn energy_eps(profile: &SurfaceProfile, params: &PhysicalParams, eps: f64) -> f64 {
    energy_parts(profile.rho(), profile.grid(), params, eps).total()
}

pub(crate) fn energy_raw(rho: &[f64], grid: &AngularGrid, params: &PhysicalParams, eps: f64) -> f64 {
    energy_parts(rho, grid, params, eps).total()
}

/// Mean curvature `(2 rho'^2 - rho rho'' + rho^2) / (rho^2 + rho'^2)^(3/2)`,
/// with fourth-order differences. Needs at least 6 nodes.
pub fn curvature(profile: &SurfaceProfile) -> Result<Vec<f64>> {
    let (d1, d2) = geometry::differentiate_fourth_order(profile.rho(), profile.grid())?;
    Ok(profile
        .rho()
        .iter()
        .zip(d1.iter().zip(&d2))
        .map(|(&r, (&p, &pp))| {
            let s2 = r * r + p * p;
            (2.0 * p * p - r * pp + r * r) / (s2 * s2.sqrt())
        })
        .collect())
}

/// Gradient of the discrete regularized energy with respect to nodal values.
pub fn energy_gradient(profile: &SurfaceProfile, params: &PhysicalParams, eps: f64) -> Vec<f64> {
    gradient_raw(profile.rho(), profile.grid(), params, eps)
}

pub(crate) fn gradient_raw(rho: &[f64], grid: &AngularGrid, p: &PhysicalParams, eps: f64) -> Vec<f64> {
    let n = rho.len();
    let mut grad = vec![0.0; n];
    if p.g != 0.0 {
        for k in 0..n {
            grad[k] += p.g * grid.weights()[k] * rho[k] * rho[k] * grid.nodes()[k].sin();
        }
    }
    for q in quadrature(grid) {
        let u = q.value(rho);
        let d = q.slope(rho);
        let s = u.hypot(d);
        let cu = q.weight * p.sigma * u / s;
        let cd = q.weight * (p.sigma * d / s + eps * d);
        for a in 0..q.len {
            grad[q.idx[a]] += cu * q.phi[a] + cd * q.dphi[a];
        }
    }
    grad[0] -= p.gamma_jump;
    grad[n - 1] -= p.gamma_jump;
    grad
}

/// Dense Hessian of the discrete regularized energy.
pub fn energy_hessian(profile: &SurfaceProfile, params: &PhysicalParams, eps: f64) -> DMatrix<f64> {
    hessian_raw(profile.rho(), profile.grid(), params, eps)
}

pub(crate) fn hessian_raw(rho: &[f64], grid: &AngularGrid, p: &PhysicalParams, eps: f64) -> DMatrix<f64> {
    let n = rho.len();
    let mut h = DMatrix::zeros(n, n);
    if p.g != 0.0 {
        for k in 0..n {
            h[(k, k)] += 2.0 * p.g * grid.weights()[k] * rho[k] * grid.nodes()[k].sin();
        }
    }
    for q in quadrature(grid) {
        let u = q.value(rho);
        let d = q.slope(rho);
        let s2 = u * u + d * d;
        let s3 = s2 * s2.sqrt();
        let w = q.weight;
        let huu = w * p.sigma * d * d / s3;
        let hud = -w * p.sigma * u * d / s3;
        let hdd = w * (p.sigma * u * u / s3 + eps);
        for a in 0..q.len {
            for b in 0..q.len {
                let v = huu * q.phi[a] * q.phi[b]
                    + hud * (q.phi[a] * q.dphi[b] + q.dphi[a] * q.phi[b])
                    + hdd * q.dphi[a] * q.dphi[b];
                h[(q.idx[a], q.idx[b])] += v;
            }
        }
    }
    h
}

/// `P = [g int rho^3 sin + sigma int s + eps int rho'^2 - [[gamma]](rho_lo + rho_hi)] / int rho^2`.
///
/// The numerator is `rho . grad E`, so at a discrete constrained critical
/// point this reproduces the multiplier exactly.
pub fn lagrange_multiplier(profile: &SurfaceProfile, params: &PhysicalParams, eps: f64) -> Result<f64> {
    multiplier_raw(profile.rho(), profile.grid(), params, eps)
}

pub(crate) fn multiplier_raw(rho: &[f64], grid: &AngularGrid, params: &PhysicalParams, eps: f64) -> Result<f64> {
    let c = quad_square(rho, grid);
    if !(c > 0.0) {
        return Err(Error::DegenerateProfile("int rho^2 vanishes".into()));
    }
    Ok(energy_parts(rho, grid, params, eps).euler() / c)
}

/// Nodal residual `grad E - P W rho` together with the multiplier.
pub(crate) fn kkt_residual(
    rho: &[f64],
    grid: &AngularGrid,
    params: &PhysicalParams,
    eps: f64,
) -> Result<(Vec<f64>, f64)> {
    let p = multiplier_raw(rho, grid, params, eps)?;
    let mut r = gradient_raw(rho, grid, params, eps);
    for (k, rk) in r.iter_mut().enumerate() {
        *rk -= p * grid.weights()[k] * rho[k];
    }
    Ok((r, p))
}

pub(crate) fn report_from_residual(r: &[f64], p: f64, grid: &AngularGrid) -> VariationReport {
    let n = r.len();
    let mut ig = vec![0.0; n];
    for k in 1..n - 1 {
        ig[k] = r[k] / grid.weights()[k];
    }
    VariationReport {
        interior_gradient: ig,
        boundary_residual_lo: -r[0],
        boundary_residual_hi: r[n - 1],
        multiplier: p,
    }
}

pub fn first_variation(profile: &SurfaceProfile, params: &PhysicalParams, eps: f64) -> Result<VariationReport> {
    let (r, p) = kkt_residual(profile.rho(), profile.grid(), params, eps)?;
    Ok(report_from_residual(&r, p, profile.grid()))
}

/// `-2 sigma sqrt(V / (pi - theta_1 - theta_2))`.
pub fn energy_lower_bound(params: &PhysicalParams) -> f64 {
    -2.0 * params.sigma * (params.volume / (PI - params.theta1 - params.theta2)).sqrt()
}
