//! Second variation at a sessile equilibrium, the (1, Sigma) form, the
//! translation kernel `xi_s`, the kernel-ODE constructions `Q`, `xi_5`,
//! `xi_6`, constrained eigenproblems and the spectral functional calculus.
//!
//! The bilinear form is written as
//! `int A xi' eta' + B (xi eta' + xi' eta) + C xi eta` with
//! `A = sigma rho^2 / s^3`, `B = -sigma rho rho' / s^3`,
//! `C = g rho sin(theta) + sigma (rho rho'' - rho^2 - rho'^2) / s^3` and
//! `s = sqrt(rho^2 + rho'^2)`. Terms with derivatives use the element Gauss
//! points of the energy discretization; the `C` term uses nodal weights.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::elements::{quadrature, QuadPoint};
use crate::energy::PhysicalParams;
use crate::error::{Error, Result};
use crate::geometry::{cumulative_integral, differentiate_fourth_order, AngularGrid, SurfaceProfile};

/// Which constraints the eigenproblem is restricted by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subspace {
    Unconstrained,
    /// Mass-orthogonal to `rho_0`.
    MassConstrained,
    /// Mass-orthogonal to `rho_0` and to `xi_s`.
    DoublyConstrained,
}

/// Coefficient convention for the first-order terms of the form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormVariant {
    /// `A = sigma rho^2 / s^3`, `B = -sigma rho rho' / s^3`: identical to the
    /// expanded second variation.
    Consistent,
    /// `A = sigma rho / s^3`, `B = -sigma rho' / s^3`, the coefficients as
    /// they are usually printed. They agree with the consistent ones only
    /// where `rho = 1`.
    AsPrinted,
}

/// Discretized (1, Sigma) form with its mass matrix and constraint vectors.
#[derive(Clone, Debug)]
pub struct SigmaForm {
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    /// Quadrature weights times `rho_0`.
    pub constraint_rho0: DVector<f64>,
    /// Quadrature weights times `xi_s`.
    pub constraint_xis: DVector<f64>,
}

/// Eigenpairs of a [`SigmaForm`] on a constraint subspace.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Mass-orthonormal nodal vectors.
    pub eigenvectors: Vec<Vec<f64>>,
    pub subspace: Subspace,
    #[serde(skip)]
    mass: DMatrix<f64>,
}

/// `Q`, `xi_5` and `xi_6` on the grid. The apex node carries no `Q` and no
/// `xi_6` value (`None`); `xi_5` there is its continuous limit.
#[derive(Clone, Debug, Serialize)]
pub struct KernelConstruction {
    pub q_values: Vec<Option<f64>>,
    pub xi5: Vec<f64>,
    pub xi6: Vec<Option<f64>>,
    /// `(C1, C2, D1, D2)`.
    pub constants: (f64, f64, f64, f64),
    pub apex_index: usize,
    /// One-sided limits of `xi_6` at the apex, `(left, right)`.
    pub xi6_limits: (f64, f64),
}

impl KernelConstruction {
    /// `xi_6(pi/2 + 0) - xi_6(pi/2 - 0)` from the analytic one-sided limits.
    pub fn xi6_jump(&self) -> f64 {
        self.xi6_limits.1 - self.xi6_limits.0
    }
}

fn require_sessile(grid: &AngularGrid) -> Result<()> {
    if grid.theta_lo() != 0.0 || (grid.theta_hi() - PI).abs() > 1e-12 {
        return Err(Error::InvalidGrid("kernel analysis needs the sessile grid on [0, pi]".into()));
    }
    Ok(())
}

/// Translation mode `xi_s = cos(theta) + (rho_0'/rho_0) sin(theta)`.
pub fn shift_function(rho0: &SurfaceProfile) -> Result<Vec<f64>> {
    let grid = rho0.grid();
    require_sessile(grid)?;
    let (d1, _) = differentiate_fourth_order(rho0.rho(), grid)?;
    Ok(grid
        .nodes()
        .iter()
        .zip(rho0.rho().iter().zip(&d1))
        .map(|(t, (r, d))| t.cos() + d / r * t.sin())
        .collect())
}

/// `xi_s'` from the closed form
/// `-sin + (rho''/rho - (rho'/rho)^2) sin + (rho'/rho) cos`.
pub fn shift_function_derivative(rho0: &SurfaceProfile) -> Result<Vec<f64>> {
    let grid = rho0.grid();
    require_sessile(grid)?;
    let (d1, d2) = differentiate_fourth_order(rho0.rho(), grid)?;
    Ok((0..grid.len())
        .map(|j| {
            let t = grid.nodes()[j];
            let r = rho0.rho()[j];
            let l = d1[j] / r;
            -t.sin() + (d2[j] / r - l * l) * t.sin() + l * t.cos()
        })
        .collect())
}

struct Coefficients {
    points: Vec<(QuadPoint, f64, f64)>,
    nodal: Vec<f64>,
}

fn coefficients(rho0: &SurfaceProfile, params: &PhysicalParams, variant: FormVariant) -> Result<Coefficients> {
    let grid = rho0.grid();
    let rho = rho0.rho();
    let sigma = params.sigma;
    let points = quadrature(grid)
        .into_iter()
        .map(|q| {
            let r = q.value(rho);
            let d = q.slope(rho);
            let s2 = r * r + d * d;
            let s3 = s2 * s2.sqrt();
            let (a, b) = match variant {
                FormVariant::Consistent => (sigma * r * r / s3, -sigma * r * d / s3),
                FormVariant::AsPrinted => (sigma * r / s3, -sigma * d / s3),
            };
            (q, a, b)
        })
        .collect();
    let (d1, d2) = differentiate_fourth_order(rho, grid)?;
    let nodal = (0..grid.len())
        .map(|j| {
            let (r, d, dd) = (rho[j], d1[j], d2[j]);
            let s2 = r * r + d * d;
            let s3 = s2 * s2.sqrt();
            params.g * r * grid.nodes()[j].sin() + sigma * (r * dd - r * r - d * d) / s3
        })
        .collect();
    Ok(Coefficients { points, nodal })
}

/// Second variation `H(xi, xi_tilde)` at `rho0`; `F_0(xi) = H(xi, xi)`.
pub fn second_variation(rho0: &SurfaceProfile, params: &PhysicalParams, xi: &[f64], xi_tilde: &[f64]) -> Result<f64> {
    let grid = rho0.grid();
    grid.check_len(xi.len())?;
    grid.check_len(xi_tilde.len())?;
    let c = coefficients(rho0, params, FormVariant::Consistent)?;
    let mut total = 0.0;
    for (q, a, b) in &c.points {
        let (u, du) = (q.value(xi), q.slope(xi));
        let (v, dv) = (q.value(xi_tilde), q.slope(xi_tilde));
        total += q.weight * (a * du * dv + b * (u * dv + du * v));
    }
    for j in 0..grid.len() {
        total += grid.weights()[j] * c.nodal[j] * xi[j] * xi_tilde[j];
    }
    Ok(total)
}

/// Discrete `||xi||_{H^1}^2 = int xi^2 + int xi'^2` with the same quadrature
/// as the form.
pub fn h1_norm_sq(xi: &[f64], grid: &AngularGrid) -> Result<f64> {
    grid.check_len(xi.len())?;
    let l2: f64 = xi.iter().zip(grid.weights()).map(|(x, w)| w * x * x).sum();
    let semi: f64 = quadrature(grid).iter().map(|q| q.weight * q.slope(xi).powi(2)).sum();
    Ok(l2 + semi)
}

/// Assemble the (1, Sigma) form with consistent coefficients.
pub fn sigma_form(rho0: &SurfaceProfile, params: &PhysicalParams) -> Result<SigmaForm> {
    sigma_form_with(rho0, params, FormVariant::Consistent)
}

pub fn sigma_form_with(rho0: &SurfaceProfile, params: &PhysicalParams, variant: FormVariant) -> Result<SigmaForm> {
    let grid = rho0.grid();
    let xis = shift_function(rho0)?;
    let c = coefficients(rho0, params, variant)?;
    let n = grid.len();
    let mut k = DMatrix::zeros(n, n);
    for (q, a, b) in &c.points {
        for i in 0..q.len {
            for j in 0..q.len {
                k[(q.idx[i], q.idx[j])] += q.weight
                    * (a * q.dphi[i] * q.dphi[j] + b * (q.phi[i] * q.dphi[j] + q.dphi[i] * q.phi[j]));
            }
        }
    }
    for j in 0..n {
        k[(j, j)] += grid.weights()[j] * c.nodal[j];
    }
    let stiffness = (&k + k.transpose()) * 0.5;
    let w = DVector::from_column_slice(grid.weights());
    Ok(SigmaForm {
        stiffness,
        mass: DMatrix::from_diagonal(&w),
        constraint_rho0: w.component_mul(&DVector::from_column_slice(rho0.rho())),
        constraint_xis: w.component_mul(&DVector::from_vec(xis)),
    })
}

impl SigmaForm {
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let a = DVector::from_column_slice(a);
        let b = DVector::from_column_slice(b);
        a.dot(&(&self.stiffness * b))
    }

    fn constraints(&self, subspace: Subspace) -> Vec<&DVector<f64>> {
        match subspace {
            Subspace::Unconstrained => vec![],
            Subspace::MassConstrained => vec![&self.constraint_rho0],
            Subspace::DoublyConstrained => vec![&self.constraint_rho0, &self.constraint_xis],
        }
    }

    /// Norms of `S w - lambda M w` after removing the component along the
    /// constraint vectors (the Lagrange-multiplier directions), one per
    /// eigenpair.
    pub fn eigen_residuals(&self, decomp: &SpectralDecomposition) -> Vec<f64> {
        let cons = self.constraints(decomp.subspace);
        let k = cons.len();
        let n = self.mass.nrows();
        let c = DMatrix::from_fn(n, k, |i, j| cons[j][i]);
        let gram = c.transpose() * &c;
        let chol = gram.cholesky();
        decomp
            .eigenvalues
            .iter()
            .zip(&decomp.eigenvectors)
            .map(|(lam, w)| {
                let w = DVector::from_column_slice(w);
                let mut r = &self.stiffness * &w - &self.mass * &w * *lam;
                if let Some(ch) = &chol {
                    let coef = ch.solve(&(c.transpose() * &r));
                    r -= &c * coef;
                }
                r.norm()
            })
            .collect()
    }
}

/// Generalized eigenproblem `S w = lambda M w` on the chosen subspace.
///
/// With `M = L L^T`, the problem becomes `L^-1 S L^-T y = lambda y`. The
/// constraints `c^T x = 0` turn into `(L^-1 c)^T y = 0`; an orthonormal basis
/// `Z` of their complement comes from Householder reflections, the reduced
/// symmetric problem `Z^T A Z` is solved densely and eigenvectors are lifted
/// back as `x = L^-T Z v`.
pub fn constrained_eigen(form: &SigmaForm, subspace: Subspace) -> Result<SpectralDecomposition> {
    let n = form.mass.nrows();
    if form.stiffness.nrows() != n || form.stiffness.ncols() != n {
        return Err(Error::Dimension { expected: n, got: form.stiffness.nrows() });
    }
    let chol = form.mass.clone().cholesky().ok_or(Error::Conditioning(f64::INFINITY))?;
    let l = chol.l();
    let diag: Vec<f64> = (0..n).map(|i| l[(i, i)]).collect();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let cond = (hi / lo).powi(2);
    if !(cond <= 1e12) {
        return Err(Error::Conditioning(cond));
    }
    let linv_s = l.solve_lower_triangular(&form.stiffness).expect("nonzero diagonal");
    let a = l.solve_lower_triangular(&linv_s.transpose()).expect("nonzero diagonal");
    let a = (&a + a.transpose()) * 0.5;

    let cons = form.constraints(subspace);
    let z = if cons.is_empty() {
        DMatrix::identity(n, n)
    } else {
        let k = cons.len();
        let mut f = DMatrix::zeros(n, k);
        for (j, c) in cons.iter().enumerate() {
            let y = l.solve_lower_triangular(c).expect("nonzero diagonal");
            f.set_column(j, &y);
        }
        let qr = f.qr();
        let mut qt = DMatrix::identity(n, n);
        qr.q_tr_mul(&mut qt);
        qt.transpose().columns(k, n - k).into_owned()
    };
    let reduced = z.transpose() * &a * &z;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut eigenvalues = Vec::with_capacity(order.len());
    let mut eigenvectors = Vec::with_capacity(order.len());
    for i in order {
        let y = &z * eig.eigenvectors.column(i);
        let x = lt.solve_upper_triangular(&y).expect("nonzero diagonal");
        eigenvalues.push(eig.eigenvalues[i]);
        eigenvectors.push(x.iter().cloned().collect());
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors, subspace, mass: form.mass.clone() })
}

impl SpectralDecomposition {
    /// Smallest eigenvalue.
    pub fn gap(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    /// Mass inner product `a^T M b`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        DVector::from_column_slice(a).dot(&(&self.mass * DVector::from_column_slice(b)))
    }

    /// `|<w_0, v>_M| / (|w_0|_M |v|_M)` for the lowest mode.
    pub fn alignment(&self, v: &[f64]) -> f64 {
        let w = &self.eigenvectors[0];
        self.inner(w, v).abs() / (self.inner(w, w) * self.inner(v, v)).sqrt()
    }

    /// Mass-coefficients `u_hat(k) = w_k^T M u`.
    pub fn coefficients(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.mass.nrows() {
            return Err(Error::Dimension { expected: self.mass.nrows(), got: u.len() });
        }
        let mu = &self.mass * DVector::from_column_slice(u);
        Ok(self.eigenvectors.iter().map(|w| DVector::from_column_slice(w).dot(&mu)).collect())
    }
}

/// `f(K) u = sum_k f(lambda_k) u_hat(k) w_k` over every mode of the
/// decomposition. A non-finite `f(lambda_k)` is a domain error.
pub fn functional_calculus(decomp: &SpectralDecomposition, f: impl Fn(f64) -> f64, u: &[f64]) -> Result<Vec<f64>> {
    truncated_calculus(decomp, f, u, decomp.eigenvalues.len())
}

fn truncated_calculus(decomp: &SpectralDecomposition, f: impl Fn(f64) -> f64, u: &[f64], j: usize) -> Result<Vec<f64>> {
    let coef = decomp.coefficients(u)?;
    let mut out = vec![0.0; u.len()];
    for k in 0..j.min(coef.len()) {
        let lam = decomp.eigenvalues[k];
        let fk = f(lam);
        if !fk.is_finite() {
            return Err(Error::SpectralDomain(format!("f(lambda_{k}) is not finite at lambda = {lam:e}")));
        }
        let c = fk * coef[k];
        for (o, w) in out.iter_mut().zip(&decomp.eigenvectors[k]) {
            *o += c * w;
        }
    }
    Ok(out)
}

/// `D_j^s u = sum_{k < j} lambda_k^s u_hat(k) w_k`. Fractional `s` needs
/// every retained eigenvalue to be positive.
pub fn truncated_power(decomp: &SpectralDecomposition, s: f64, j: usize, u: &[f64]) -> Result<Vec<f64>> {
    let integer = s.fract() == 0.0;
    if !integer {
        if let Some((k, lam)) = decomp.eigenvalues.iter().take(j).enumerate().find(|(_, l)| **l <= 0.0) {
            return Err(Error::SpectralDomain(format!(
                "fractional power {s} of nonpositive eigenvalue lambda_{k} = {lam:e}"
            )));
        }
    }
    truncated_calculus(decomp, |l| l.powf(s), u, j)
}

/// Volume-correction coefficients `(a0, a1, a2)` for a perturbation and its
/// first two time derivatives.
pub fn a_coefficients(rho0: &SurfaceProfile, xi: &[f64], xi_t: &[f64], xi_tt: &[f64]) -> Result<(f64, f64, f64)> {
    let grid = rho0.grid();
    for v in [xi, xi_t, xi_tt] {
        grid.check_len(v.len())?;
    }
    let w = grid.weights();
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum() };
    let c = dot(rho0.rho(), rho0.rho());
    if !(c > 0.0) {
        return Err(Error::DegenerateProfile("int rho_0^2 vanishes".into()));
    }
    Ok((-0.5 * dot(xi, xi) / c, -dot(xi, xi_t) / c, -(dot(xi_t, xi_t) + dot(xi_tt, xi)) / c))
}

/// Pointwise residual of the linearized equation
/// `g xi sin - sigma rho xi''/s^3 + sigma (rho' rho^2 - 2 rho'^3 + 3 rho rho' rho'') xi'/s^5
///  + sigma (2 rho^2 rho'' - rho^3 - 4 rho rho'^2 - rho'' rho'^2) xi/s^5 - C`,
/// with fourth-order differences for every derivative.
pub fn kernel_ode_residual(rho0: &SurfaceProfile, params: &PhysicalParams, xi: &[f64], c: f64) -> Result<Vec<f64>> {
    let grid = rho0.grid();
    grid.check_len(xi.len())?;
    let (r1, r2) = differentiate_fourth_order(rho0.rho(), grid)?;
    let (x1, x2) = differentiate_fourth_order(xi, grid)?;
    let sigma = params.sigma;
    Ok((0..grid.len())
        .map(|j| {
            let (r, d, dd) = (rho0.rho()[j], r1[j], r2[j]);
            let s2 = r * r + d * d;
            let s3 = s2 * s2.sqrt();
            let s5 = s3 * s2;
            params.g * xi[j] * grid.nodes()[j].sin() - sigma * r * x2[j] / s3
                + sigma * (d * r * r - 2.0 * d.powi(3) + 3.0 * r * d * dd) / s5 * x1[j]
                + sigma * (2.0 * r * r * dd - r.powi(3) - 4.0 * r * d * d - dd * d * d) / s5 * xi[j]
                - c
        })
        .collect())
}

/// `Q = 2 xi_s'/xi_s - (rho^2 rho' + 3 rho rho' rho'' - 2 rho'^3) / (rho (rho^2 + rho'^2))`.
/// The apex node, where `xi_s` vanishes, is masked.
pub fn build_q(rho0: &SurfaceProfile) -> Result<Vec<Option<f64>>> {
    let grid = rho0.grid();
    require_sessile(grid)?;
    if grid.n_cells() % 2 != 0 {
        return Err(Error::InvalidGrid("kernel construction needs an even cell count".into()));
    }
    let xis = shift_function(rho0)?;
    let dxis = shift_function_derivative(rho0)?;
    let (d1, d2) = differentiate_fourth_order(rho0.rho(), grid)?;
    let apex = grid.apex_index();
    Ok((0..grid.len())
        .map(|j| {
            if j == apex {
                return None;
            }
            let (r, d, dd) = (rho0.rho()[j], d1[j], d2[j]);
            Some(2.0 * dxis[j] / xis[j] - (r * r * d + 3.0 * r * d * dd - 2.0 * d.powi(3)) / (r * (r * r + d * d)))
        })
        .collect())
}

const COLLAR: f64 = 0.05;

/// One half of the construction, in the distance `u` from the anchor
/// contact point. Holds `F = int_0^u e^{-int q}` and
/// `X6 = int_0^u (int_0^g e^{int q}) e^{-int_0^g q} dg` on nodes before the
/// apex, and the apex limits `A(pi/2)` and `G(pi/2) A(pi/2)`.
struct Half {
    f: Vec<f64>,
    x6: Vec<f64>,
    a_apex: f64,
    ga_apex: f64,
}

fn half_construction(q: &[f64], h: f64) -> Half {
    // q holds nodes u_0 = 0 .. u_{m-1}; the apex u_m = pi/2 is missing.
    let m = q.len();
    let u = |j: usize| j as f64 * h;
    let mut k: Vec<f64> = (0..m).map(|j| q[j] - 2.0 / (u(j) - FRAC_PI_2)).collect();
    k.push(3.0 * k[m - 1] - 3.0 * k[m - 2] + k[m - 3]);
    let ik = cumulative_integral(&k, h);
    let scale = FRAC_PI_2 * FRAC_PI_2;
    let a: Vec<f64> = ik.iter().map(|v| scale * (-v).exp()).collect();
    let b: Vec<f64> = (0..=m).map(|j| ((FRAC_PI_2 - u(j)) / FRAC_PI_2).powi(2) * ik[j].exp()).collect();
    let g = cumulative_integral(&b, h);
    let ga: Vec<f64> = g.iter().zip(&a).map(|(x, y)| x * y).collect();
    let (k_apex, a_apex, g_apex) = (k[m], a[m], g[m]);
    // a' = -K a, (g a)' = b a - g K a, with b(pi/2) = 0.
    let f = collar_integral(&a, a_apex, -k_apex * a_apex, h);
    let x6 = collar_integral(&ga, g_apex * a_apex, -g_apex * k_apex * a_apex, h);
    Half { f, x6, a_apex, ga_apex: g_apex * a_apex }
}

// int_0^u a(s) / (pi/2 - s)^2 ds at nodes 0..m-1, where a has m+1 samples
// and a(pi/2) = a0, a'(pi/2) = a1. Inside the collar the first two Taylor
// terms are integrated in closed form and only the bounded remainder is
// integrated numerically.
fn collar_integral(a: &[f64], a0: f64, a1: f64, h: f64) -> Vec<f64> {
    let m = a.len() - 1;
    let u = |j: usize| j as f64 * h;
    let first = (0..m).find(|&j| u(j) >= FRAC_PI_2 - COLLAR).unwrap_or(m - 1);
    let c = first.min(m.saturating_sub(3));
    let outer: Vec<f64> = (0..=c).map(|j| a[j] / (FRAC_PI_2 - u(j)).powi(2)).collect();
    let mut out = cumulative_integral(&outer, h);
    let base = out[c];
    let rem: Vec<f64> =
        (c..m).map(|j| (a[j] - a0 - a1 * (u(j) - FRAC_PI_2)) / (FRAC_PI_2 - u(j)).powi(2)).collect();
    let rem_int = cumulative_integral(&rem, h);
    let dc = FRAC_PI_2 - u(c);
    for j in c + 1..m {
        let d = FRAC_PI_2 - u(j);
        out.push(base + rem_int[j - c] + a0 * (1.0 / d - 1.0 / dc) + a1 * (d.ln() - dc.ln()));
    }
    out
}

/// `xi_5` and `xi_6` from nested quadrature of `exp(-+ int Q)`.
///
/// On the left half `xi_5 = (C1 int_0^t e^{-int_0 Q} + D1) xi_s` and
/// `xi_6 = (int_0^t (int_0^g e^{int_0 Q}) e^{-int_0^g Q} dg) xi_s`; the right
/// half is anchored at `theta = pi` with `C2`, `D2`. The pole of `Q` at
/// `pi/2` is split off as `2 / (theta - pi/2)` and the resulting double pole
/// of the integrands is handled on a collar of half-width 0.05 rad.
pub fn build_xi56(rho0: &SurfaceProfile, constants: (f64, f64, f64, f64)) -> Result<KernelConstruction> {
    let grid = rho0.grid();
    let q_values = build_q(rho0)?;
    let m = grid.apex_index();
    if m < 6 {
        return Err(Error::InvalidGrid("kernel construction needs at least 12 cells".into()));
    }
    let n = grid.len();
    let h = grid.h();
    let xis = shift_function(rho0)?;
    let dxis = shift_function_derivative(rho0)?;
    let (c1, c2, d1, d2) = constants;

    let left_q: Vec<f64> = (0..m).map(|j| q_values[j].expect("unmasked")).collect();
    // Oriented from theta = pi: q~(u) = -Q(pi - u).
    let right_q: Vec<f64> = (0..m).map(|j| -q_values[n - 1 - j].expect("unmasked")).collect();
    let left = half_construction(&left_q, h);
    let right = half_construction(&right_q, h);

    let mut xi5 = vec![0.0; n];
    let mut xi6 = vec![None; n];
    for j in 0..m {
        xi5[j] = (c1 * left.f[j] + d1) * xis[j];
        xi6[j] = Some(left.x6[j] * xis[j]);
        let r = n - 1 - j;
        xi5[r] = (-c2 * right.f[j] + d2) * xis[r];
        xi6[r] = Some(right.x6[j] * xis[r]);
    }
    let slope = dxis[m];
    xi5[m] = 0.5 * (-c1 * left.a_apex * slope - c2 * right.a_apex * slope);
    Ok(KernelConstruction {
        q_values,
        xi5,
        xi6,
        constants,
        apex_index: m,
        xi6_limits: (-left.ga_apex * slope, right.ga_apex * slope),
    })
}
