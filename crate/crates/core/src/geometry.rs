//! Angular grids, sampled profiles, finite differences, quadrature and the
//! polar/Cartesian conversions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid on `[theta_lo, theta_hi]`.
///
/// `theta_lo` is the lower wall inclination `theta_2` and `theta_hi` is
/// `pi - theta_1`. The quadrature weights are composite Simpson when the cell
/// count is even and the trapezoid rule otherwise.
#[derive(Clone, Debug, Serialize)]
pub struct AngularGrid {
    theta_lo: f64,
    theta_hi: f64,
    n_cells: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl AngularGrid {
    pub fn new(theta_lo: f64, theta_hi: f64, n_cells: usize) -> Result<Self> {
        if !(theta_lo.is_finite() && theta_hi.is_finite()) {
            return Err(Error::InvalidGrid("non-finite bounds".into()));
        }
        // Allow a few ulps of slack so that `PI - theta1` with theta1 = 0 passes.
        if theta_lo < 0.0 || theta_hi > PI + 4.0 * f64::EPSILON || theta_lo >= theta_hi {
            return Err(Error::InvalidGrid(format!(
                "need 0 <= theta_lo < theta_hi <= pi, got [{theta_lo}, {theta_hi}]"
            )));
        }
        if n_cells < 2 {
            return Err(Error::InvalidGrid(format!(
                "at least 3 nodes are required, got {} cells",
                n_cells
            )));
        }
        let h = (theta_hi - theta_lo) / n_cells as f64;
        let mut nodes: Vec<f64> = (0..=n_cells).map(|j| theta_lo + j as f64 * h).collect();
        nodes[n_cells] = theta_hi;

        let mut weights = vec![0.0; n_cells + 1];
        if n_cells % 2 == 0 {
            for (j, w) in weights.iter_mut().enumerate() {
                *w = if j == 0 || j == n_cells {
                    h / 3.0
                } else if j % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                };
            }
        } else {
            for (j, w) in weights.iter_mut().enumerate() {
                *w = if j == 0 || j == n_cells { h / 2.0 } else { h };
            }
        }
        Ok(Self { theta_lo, theta_hi, n_cells, nodes, weights })
    }

    /// The sessile grid on `[0, pi]`.
    pub fn sessile(n_cells: usize) -> Result<Self> {
        Self::new(0.0, PI, n_cells)
    }

    pub fn theta_lo(&self) -> f64 {
        self.theta_lo
    }
    pub fn theta_hi(&self) -> f64 {
        self.theta_hi
    }
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn h(&self) -> f64 {
        (self.theta_hi - self.theta_lo) / self.n_cells as f64
    }
    pub fn length(&self) -> f64 {
        self.theta_hi - self.theta_lo
    }

    /// True when the grid is mirror symmetric about `pi/2`.
    pub fn is_symmetric(&self) -> bool {
        (self.theta_lo + self.theta_hi - PI).abs() < 1e-12
    }

    /// Index of the node closest to `pi/2`.
    pub fn apex_index(&self) -> usize {
        let j = ((PI / 2.0 - self.theta_lo) / self.h()).round();
        (j.max(0.0) as usize).min(self.n_cells)
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::Dimension { expected: self.len(), got });
        }
        Ok(())
    }
}

impl PartialEq for AngularGrid {
    fn eq(&self, other: &Self) -> bool {
        self.theta_lo == other.theta_lo
            && self.theta_hi == other.theta_hi
            && self.n_cells == other.n_cells
    }
}

/// Radial function sampled at the grid nodes.
#[derive(Clone, Debug, Serialize)]
pub struct SurfaceProfile {
    grid: AngularGrid,
    rho: Vec<f64>,
}

impl SurfaceProfile {
    pub fn new(grid: AngularGrid, rho: Vec<f64>) -> Result<Self> {
        grid.check_len(rho.len())?;
        if let Some(j) = rho.iter().position(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidProfile(format!(
                "rho[{j}] = {} is not a positive finite radius",
                rho[j]
            )));
        }
        Ok(Self { grid, rho })
    }

    pub fn from_fn(grid: AngularGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let rho = grid.nodes().iter().map(|&t| f(t)).collect();
        Self::new(grid, rho)
    }

    pub fn constant(grid: AngularGrid, value: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n])
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn into_rho(self) -> Vec<f64> {
        self.rho
    }

    /// Same grid, new values.
    pub fn with_rho(&self, rho: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), rho)
    }

    pub fn max_rho(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn rho_lo(&self) -> f64 {
        self.rho[0]
    }
    pub fn rho_hi(&self) -> f64 {
        self.rho[self.rho.len() - 1]
    }
}

/// Open polyline `(x, y)` tracing the free surface from the right contact
/// point to the left one, `y >= 0`.
#[derive(Clone, Debug, Serialize)]
pub struct CartesianCurve {
    points: Vec<(f64, f64)>,
}

impl CartesianCurve {
    /// Points with `y` below `-1e-12` are rejected; tiny negative values from
    /// rounding are clamped to zero.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let mut points = points;
        for (i, p) in points.iter_mut().enumerate() {
            if !(p.0.is_finite() && p.1.is_finite()) {
                return Err(Error::InvalidProfile(format!("point {i} is not finite")));
            }
            if p.1 < -1e-12 {
                return Err(Error::InvalidProfile(format!(
                    "point {i} lies below the support (y = {})",
                    p.1
                )));
            }
            if p.1 <= 0.0 {
                p.1 = 0.0;
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Rigid horizontal translation.
    pub fn translated(&self, dx: f64) -> Self {
        Self { points: self.points.iter().map(|&(x, y)| (x + dx, y)).collect() }
    }
}

/// Second-order finite difference of nodal data: centered inside, one-sided
/// three-point stencils at the ends.
pub fn differentiate(values: &[f64], grid: &AngularGrid) -> Result<Vec<f64>> {
    grid.check_len(values.len())?;
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidGrid("derivative needs at least 3 nodes".into()));
    }
    let h = grid.h();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - values[j - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    Ok(d)
}

/// Second derivative, second order everywhere (four-point stencils at the ends).
pub fn differentiate2(values: &[f64], grid: &AngularGrid) -> Result<Vec<f64>> {
    grid.check_len(values.len())?;
    let n = values.len();
    if n < 4 {
        return Err(Error::InvalidGrid("second derivative needs at least 4 nodes".into()));
    }
    let h2 = grid.h() * grid.h();
    let mut d = vec![0.0; n];
    d[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h2;
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - 2.0 * values[j] + values[j - 1]) / h2;
    }
    d[n - 1] =
        (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3] - values[n - 4]) / h2;
    Ok(d)
}

/// Fourth-order first and second derivatives (five-point centered stencils,
/// six-point one-sided ones near the ends). Needs at least 6 nodes.
pub fn differentiate_fourth_order(values: &[f64], grid: &AngularGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.check_len(values.len())?;
    let n = values.len();
    if n < 6 {
        return Err(Error::InvalidGrid("fourth-order stencils need at least 6 nodes".into()));
    }
    let h = grid.h();
    let f = values;
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for j in 2..n - 2 {
        d1[j] = (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]) / (12.0 * h);
        d2[j] = (-f[j - 2] + 16.0 * f[j - 1] - 30.0 * f[j] + 16.0 * f[j + 1] - f[j + 2]) / (12.0 * h * h);
    }
    const A0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    const A1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
    const B0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
    const B1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
    for (j, (a, b)) in [(0, (A0, B0)), (1, (A1, B1))] {
        let lo: f64 = (0..5).map(|k| a[k] * f[k]).sum();
        let hi: f64 = (0..5).map(|k| a[k] * f[n - 1 - k]).sum();
        d1[j] = lo / (12.0 * h);
        d1[n - 1 - j] = -hi / (12.0 * h);
        let lo2: f64 = (0..6).map(|k| b[k] * f[k]).sum();
        let hi2: f64 = (0..6).map(|k| b[k] * f[n - 1 - k]).sum();
        d2[j] = lo2 / (12.0 * h * h);
        d2[n - 1 - j] = hi2 / (12.0 * h * h);
    }
    Ok((d1, d2))
}

/// `d rho / d theta` at the nodes.
pub fn derivative(profile: &SurfaceProfile) -> Result<Vec<f64>> {
    differentiate(profile.rho(), profile.grid())
}

pub fn second_derivative(profile: &SurfaceProfile) -> Result<Vec<f64>> {
    differentiate2(profile.rho(), profile.grid())
}

/// Composite Simpson (trapezoid for an odd cell count).
pub fn integrate(field: &[f64], grid: &AngularGrid) -> Result<f64> {
    grid.check_len(field.len())?;
    Ok(field.iter().zip(grid.weights()).map(|(f, w)| f * w).sum())
}

/// Running integral `F_i = int_{x_0}^{x_i} f` on uniform spacing `h`.
///
/// Even indices use composite Simpson; odd indices add one cell with a
/// three-point quadratic rule, so the local error is fourth order.
pub fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    for i in 1..n {
        if i % 2 == 0 {
            out[i] = out[i - 2]
                + h / 3.0 * (values[i - 2] + 4.0 * values[i - 1] + values[i]);
        } else if i + 1 < n {
            out[i] = out[i - 1]
                + h / 12.0 * (5.0 * values[i - 1] + 8.0 * values[i] - values[i + 1]);
        } else {
            out[i] = out[i - 1]
                + h / 12.0 * (-values[i - 2] + 8.0 * values[i - 1] + 5.0 * values[i]);
        }
    }
    out
}

pub fn to_cartesian(profile: &SurfaceProfile) -> CartesianCurve {
    let points = profile
        .grid()
        .nodes()
        .iter()
        .zip(profile.rho())
        .map(|(&t, &r)| (r * t.cos(), (r * t.sin()).max(0.0)))
        .collect();
    CartesianCurve { points }
}

/// Resample a curve in polar coordinates about `(pole_x, 0)`.
///
/// The polar angle of every point must increase strictly along the curve and
/// the angles must cover the grid interval; otherwise the pole is outside the
/// admissible range and a recentre-domain error is returned.
pub fn from_cartesian(
    curve: &CartesianCurve,
    pole_x: f64,
    grid: &AngularGrid,
) -> Result<SurfaceProfile> {
    let pts = curve.points();
    if pts.len() < 2 {
        return Err(Error::RecentreDomain("curve has fewer than two points".into()));
    }
    let mut phi = Vec::with_capacity(pts.len());
    let mut r = Vec::with_capacity(pts.len());
    for &(x, y) in pts {
        let dx = x - pole_x;
        // +0.0 keeps atan2 on the upper branch at the contact points.
        let y = if y <= 0.0 { 0.0 } else { y };
        phi.push(y.atan2(dx));
        r.push(dx.hypot(y));
    }
    if let Some(i) = phi.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::RecentreDomain(format!(
            "curve is not star-shaped about x = {pole_x}: angle stops increasing at point {}",
            i + 1
        )));
    }
    let tol = 1e-9;
    if phi[0] > grid.theta_lo() + tol || phi[phi.len() - 1] < grid.theta_hi() - tol {
        return Err(Error::RecentreDomain(format!(
            "angles about x = {pole_x} span [{}, {}], not the grid interval",
            phi[0],
            phi[phi.len() - 1]
        )));
    }
    let interp = crate::numerics::Pchip::new(&phi, &r)?;
    let rho = grid.nodes().iter().map(|&t| interp.eval(t)).collect();
    SurfaceProfile::new(grid.clone(), rho)
        .map_err(|e| Error::RecentreDomain(format!("resampled profile invalid: {e}")))
}
