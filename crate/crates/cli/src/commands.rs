//! One function per subcommand. Each computes its result with the core
//! library and writes artifacts through a [`Sink`].

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use capdrop::energy::{energy_gradient, energy_eps, energy_lower_bound, volume_functional};
use capdrop::equilibrium::{continuation, verify_symmetry, ContinuationReport, EquilibriumSolution};
use capdrop::geometry::{integrate, to_cartesian};
use capdrop::moving_frame::recentre;
use capdrop::relax::{predicted_decay_rate, run, RelaxOptions};
use capdrop::spectral::{
    build_xi56, constrained_eigen, h1_norm_sq, kernel_ode_residual, second_variation, shift_function, sigma_form,
};
use capdrop::{CartesianCurve, PhysicalParams, Subspace, SurfaceProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{cell, Sink};
use crate::svg;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Equilibrate,
    SweepEps,
    Spectrum,
    Kernel,
    Recentre,
    Relax,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Equilibrate => "equilibrate",
            Command::SweepEps => "sweep-eps",
            Command::Spectrum => "spectrum",
            Command::Kernel => "kernel",
            Command::Recentre => "recentre",
            Command::Relax => "relax",
            Command::Verify => "verify",
        }
    }
}

pub struct Options {
    pub out: PathBuf,
    pub plots: bool,
}

type Out<T = ()> = Result<T, CliError>;

pub fn dispatch(cmd: Command, cfg: &RunConfig, opts: &Options) -> Out<Vec<PathBuf>> {
    let mut sink = Sink::new(&opts.out)?;
    let result = match cmd {
        Command::Equilibrate => equilibrate(cfg, opts, &mut sink),
        Command::SweepEps => sweep_eps(cfg, opts, &mut sink),
        Command::Spectrum => spectrum(cfg, opts, &mut sink),
        Command::Kernel => kernel(cfg, opts, &mut sink),
        Command::Recentre => recentre_cmd(cfg, opts, &mut sink),
        Command::Relax => relax(cfg, opts, &mut sink),
        Command::Verify => verify(cfg, &mut sink),
    };
    if let Err(CliError::Numerical(e)) = &result {
        diagnose(cmd, e, &mut sink)?;
    }
    result.map(|_| sink.written)
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    command: &'a str,
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
}

fn diagnose(cmd: Command, e: &capdrop::Error, sink: &mut Sink) -> Out {
    let mut d = Diagnostic { command: cmd.name(), error: e.to_string(), eps: None, iterations: None, residual: None };
    if let capdrop::Error::Convergence { eps, iterations, residual, last } = e {
        d.eps = Some(*eps);
        d.iterations = Some(*iterations);
        d.residual = Some(*residual);
        profile_csv(sink, "last_iterate.csv", last)?;
    }
    sink.json("error.json", &d)
}

fn equilibrium(cfg: &RunConfig) -> Out<(EquilibriumSolution, ContinuationReport)> {
    let grid = cfg.params.grid(cfg.grid_n)?;
    let r = (cfg.params.volume / grid.length()).sqrt();
    let init = SurfaceProfile::constant(grid, r)?;
    Ok(continuation(&cfg.params, &cfg.eps_schedule, &init)?)
}

fn profile_csv(sink: &mut Sink, name: &str, p: &SurfaceProfile) -> Out {
    let curve = to_cartesian(p);
    let rows: Vec<Vec<String>> = p
        .grid()
        .nodes()
        .iter()
        .zip(p.rho())
        .zip(curve.points())
        .map(|((t, r), (x, y))| vec![cell(Some(*t)), cell(Some(*r)), cell(Some(*x)), cell(Some(*y))])
        .collect();
    sink.csv(name, &["theta", "rho", "x", "y"], &rows)
}

fn profile_svg(sink: &mut Sink, name: &str, title: &str, curves: &[(&str, &SurfaceProfile)]) -> Out {
    let series: Vec<(&str, Vec<(f64, f64)>)> =
        curves.iter().map(|(n, p)| (*n, to_cartesian(p).points().to_vec())).collect();
    sink.text(name, &svg::line_plot(title, "x", "y", &series))
}

#[derive(Serialize)]
struct SolutionSummary {
    params: PhysicalParams,
    n_cells: usize,
    multiplier: f64,
    eps_used: f64,
    energy: f64,
    volume: f64,
    el_residual: f64,
    bc_residuals: (f64, f64),
    contact_angles: (f64, f64),
    young_angles: (f64, f64),
    young_target: f64,
    iterations: usize,
}

fn summary(cfg: &RunConfig, sol: &EquilibriumSolution) -> SolutionSummary {
    SolutionSummary {
        params: cfg.params,
        n_cells: cfg.grid_n,
        multiplier: sol.multiplier,
        eps_used: sol.eps_used,
        energy: sol.energy,
        volume: volume_functional(&sol.profile),
        el_residual: sol.el_residual,
        bc_residuals: sol.bc_residuals,
        contact_angles: sol.contact_angles,
        young_angles: sol.young_angles(),
        young_target: (-cfg.params.gamma_jump / cfg.params.sigma).acos(),
        iterations: sol.iterations,
    }
}

fn equilibrate(cfg: &RunConfig, opts: &Options, sink: &mut Sink) -> Out {
    let (sol, _) = equilibrium(cfg)?;
    profile_csv(sink, "profile.csv", &sol.profile)?;
    sink.json("solution.json", &summary(cfg, &sol))?;
    if opts.plots {
        profile_svg(sink, "profile.svg", "equilibrium profile", &[("rho_0", &sol.profile)])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepOut<'a> {
    report: &'a ContinuationReport,
    solution: SolutionSummary,
}

fn sweep_eps(cfg: &RunConfig, opts: &Options, sink: &mut Sink) -> Out {
    let (sol, rep) = equilibrium(cfg)?;
    sink.json("continuation.json", &SweepOut { report: &rep, solution: summary(cfg, &sol) })?;
    profile_csv(sink, "profile.csv", &sol.profile)?;
    if opts.plots {
        let pts: Vec<(f64, f64)> = rep.eps_schedule.iter().zip(&rep.energies).map(|(e, en)| (e.log10(), *en)).collect();
        sink.text("energy_vs_eps.svg", &svg::line_plot("regularized energy", "log10 eps", "E^eps", &[("E^eps", pts)]))?;
        profile_svg(sink, "profile.svg", "equilibrium profile", &[("rho_0", &sol.profile)])?;
    }
    Ok(())
}

fn sessile(cfg: &RunConfig, what: &str) -> Out {
    if !cfg.params.is_sessile() {
        return Err(CliError::Validation(format!("{what} needs theta1 = theta2 = 0")));
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumOut {
    subspace: Subspace,
    n_cells: usize,
    eigenvalues: Vec<f64>,
    gap: f64,
    xis_alignment: f64,
    max_eigen_residual: f64,
}

fn spectrum(cfg: &RunConfig, opts: &Options, sink: &mut Sink) -> Out {
    sessile(cfg, "spectrum")?;
    let (sol, _) = equilibrium(cfg)?;
    let rho0 = &sol.profile;
    let form = sigma_form(rho0, &cfg.params)?;
    let d = constrained_eigen(&form, cfg.subspace)?;
    let xis = shift_function(rho0)?;
    let shown: Vec<f64> = d.eigenvalues.iter().take(cfg.eigen_count).copied().collect();
    sink.json(
        "spectrum.json",
        &SpectrumOut {
            subspace: cfg.subspace,
            n_cells: cfg.grid_n,
            eigenvalues: shown.clone(),
            gap: d.gap(),
            xis_alignment: d.alignment(&xis),
            max_eigen_residual: form.eigen_residuals(&d).into_iter().fold(0.0, f64::max),
        },
    )?;
    if cfg.eigenvectors > 0 {
        let k = cfg.eigenvectors.min(d.eigenvectors.len());
        let mut header = vec!["theta".to_string()];
        header.extend((0..k).map(|j| format!("w{j}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = rho0
            .grid()
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, t)| std::iter::once(cell(Some(*t))).chain((0..k).map(|j| cell(Some(d.eigenvectors[j][i])))).collect())
            .collect();
        sink.csv("eigenvectors.csv", &header, &rows)?;
    }
    if opts.plots {
        sink.text("spectrum.svg", &svg::stem_plot("constrained spectrum", "lambda_k", &shown))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct KernelOut {
    constants: (f64, f64, f64, f64),
    apex_index: usize,
    kernel_ratio: f64,
    residual_sup_interior: f64,
    sup_xi5: f64,
    xi6_limits: (f64, f64),
    xi6_jump: f64,
}

fn kernel(cfg: &RunConfig, opts: &Options, sink: &mut Sink) -> Out {
    sessile(cfg, "kernel")?;
    let (sol, _) = equilibrium(cfg)?;
    let rho0 = &sol.profile;
    let k = build_xi56(rho0, cfg.constants)?;
    let xis = shift_function(rho0)?;
    let res = kernel_ode_residual(rho0, &cfg.params, &xis, 0.0)?;
    let nodes = rho0.grid().nodes();
    let rows: Vec<Vec<String>> = (0..nodes.len())
        .map(|j| {
            vec![cell(Some(nodes[j])), cell(Some(xis[j])), cell(k.q_values[j]), cell(Some(k.xi5[j])), cell(k.xi6[j]), cell(Some(res[j]))]
        })
        .collect();
    sink.csv("kernel.csv", &["theta", "xi_s", "q", "xi5", "xi6", "residual"], &rows)?;
    let interior = res
        .iter()
        .zip(nodes)
        .filter(|(_, t)| **t > 0.1 && **t < PI - 0.1)
        .fold(0.0f64, |m, (r, _)| m.max(r.abs()));
    let ratio = second_variation(rho0, &cfg.params, &xis, &xis)?.abs() / h1_norm_sq(&xis, rho0.grid())?;
    sink.json(
        "kernel.json",
        &KernelOut {
            constants: k.constants,
            apex_index: k.apex_index,
            kernel_ratio: ratio,
            residual_sup_interior: interior,
            sup_xi5: k.xi5.iter().fold(0.0, |m, x| m.max(x.abs())),
            xi6_limits: k.xi6_limits,
            xi6_jump: k.xi6_jump(),
        },
    )?;
    if opts.plots {
        let s5 = nodes.iter().zip(&k.xi5).map(|(t, v)| (*t, *v)).collect();
        let s6 = nodes.iter().zip(&k.xi6).map(|(t, v)| (*t, v.unwrap_or(f64::NAN))).collect();
        sink.text("kernel.svg", &svg::line_plot("kernel constructions", "theta", "value", &[("xi5", s5), ("xi6", s6)]))?;
    }
    Ok(())
}

/// `rho0` plus the configured modes and seeded random Fourier noise,
/// rescaled to the volume of `rho0`.
pub fn perturb(rho0: &SurfaceProfile, cfg: &RunConfig, seed: u64) -> Out<SurfaceProfile> {
    let nodes = rho0.grid().nodes();
    let mut delta: Vec<f64> = nodes.iter().map(|t| cfg.perturbation.iter().map(|m| m.eval(*t)).sum()).collect();
    if cfg.random_amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef: Vec<(f64, f64)> =
            (0..cfg.random_modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let noise: Vec<f64> = nodes
            .iter()
            .map(|t| coef.iter().enumerate().map(|(k, (a, b))| {
                let kt = (k + 1) as f64 * t;
                a * kt.cos() + b * kt.sin()
            }).sum())
            .collect();
        let peak = noise.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            delta.iter_mut().zip(&noise).for_each(|(d, n)| *d += cfg.random_amplitude * n / peak);
        }
    }
    let rho: Vec<f64> = rho0.rho().iter().zip(&delta).map(|(r, d)| r + d).collect();
    let p = rho0
        .with_rho(rho)
        .map_err(|e| CliError::Validation(format!("perturbation makes the radius nonpositive: {e}")))?;
    let k = (volume_functional(rho0) / volume_functional(&p)).sqrt();
    Ok(p.with_rho(p.rho().iter().map(|r| r * k).collect())?)
}

fn read_curve(path: &Path) -> Out<CartesianCurve> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut pts = vec![];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let num = |j: usize| -> Out<f64> {
            rec.get(j)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::Validation(format!("{}: row {} needs numeric x,y", path.display(), i + 1)))
        };
        pts.push((num(0)?, num(1)?));
    }
    CartesianCurve::new(pts).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct FrameOut {
    pole_x: f64,
    lambda: f64,
    ortho_residual: f64,
    l2_perturbation: f64,
    objective_minimizer: f64,
    local_minima: Vec<f64>,
    applied_shift: Option<f64>,
}

fn recentre_cmd(cfg: &RunConfig, opts: &Options, sink: &mut Sink) -> Out {
    sessile(cfg, "recentre")?;
    let (sol, _) = equilibrium(cfg)?;
    let rho0 = &sol.profile;
    let (curve, shift) = match &cfg.curve {
        Some(path) => (read_curve(path)?, None),
        None => (to_cartesian(&perturb(rho0, cfg, cfg.seed)?).translated(cfg.shift), Some(cfg.shift)),
    };
    let s = recentre(&curve, rho0)?;
    sink.json(
        "frame.json",
        &FrameOut {
            pole_x: s.pole_x,
            lambda: s.lambda,
            ortho_residual: s.ortho_residual,
            l2_perturbation: s.l2_perturbation,
            objective_minimizer: s.objective_minimizer,
            local_minima: s.local_minima.clone(),
            applied_shift: shift,
        },
    )?;
    if opts.plots {
        profile_svg(sink, "frame.svg", "recentred drop", &[("rho_0", rho0), ("in frame", &s.profile_in_frame)])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TraceOut {
    decay_rate: f64,
    fit_r2: f64,
    predicted_decay_rate: Option<f64>,
    final_pole: f64,
    final_err: f64,
    accepted_steps: usize,
    rejected_steps: usize,
    max_energy_increase: f64,
    max_dissipation_mismatch: f64,
    max_volume_drift: f64,
}

fn relax(cfg: &RunConfig, opts: &Options, sink: &mut Sink) -> Out {
    sessile(cfg, "relax")?;
    let (sol, _) = equilibrium(cfg)?;
    let rho0 = &sol.profile;
    let start = perturb(rho0, cfg, cfg.seed)?;
    let ropts = RelaxOptions {
        t_end: cfg.t_end,
        dt0: cfg.dt0,
        dt_max: cfg.dt_max,
        snapshot_interval: cfg.snapshot_interval,
        ..RelaxOptions::default()
    };
    let tr = run(&start, &cfg.params, rho0, &ropts)?;
    let rows: Vec<Vec<String>> = (0..tr.times.len())
        .map(|k| {
            [tr.times[k], tr.energies[k], tr.volumes[k], tr.pole_positions[k], tr.contact_rhos[k].0, tr.contact_rhos[k].1, tr.l2_distance_to_equilibrium[k]]
                .iter()
                .map(|v| cell(Some(*v)))
                .collect()
        })
        .collect();
    sink.csv("trace.csv", &["t", "E", "V", "pole_x", "rho_lo", "rho_hi", "dist"], &rows)?;
    let predicted = if cfg.grid_n % 2 == 0 { predicted_decay_rate(rho0, &cfg.params).ok() } else { None };
    sink.json(
        "trace.json",
        &TraceOut {
            decay_rate: tr.decay_rate,
            fit_r2: tr.fit_r2,
            predicted_decay_rate: predicted,
            final_pole: *tr.pole_positions.last().expect("initial snapshot"),
            final_err: *tr.l2_distance_to_equilibrium.last().expect("initial snapshot"),
            accepted_steps: tr.accepted_steps,
            rejected_steps: tr.rejected_steps,
            max_energy_increase: tr.max_energy_increase,
            max_dissipation_mismatch: tr.max_dissipation_mismatch,
            max_volume_drift: tr.max_volume_drift,
        },
    )?;
    if opts.plots {
        let e = tr.times.iter().zip(&tr.energies).map(|(t, e)| (*t, *e)).collect();
        let d = tr.times.iter().zip(&tr.l2_distance_to_equilibrium).map(|(t, d)| (*t, d.max(1e-300).log10())).collect();
        sink.text("energy.svg", &svg::line_plot("energy along the flow", "t", "E", &[("E(t)", e)]))?;
        sink.text("distance.svg", &svg::line_plot("distance to the recentred equilibrium", "t", "log10 |xi|", &[("log10 |xi|", d)]))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    passed: bool,
}

#[derive(Serialize)]
struct VerifyOut<'a> {
    passed: bool,
    checks: &'a [Check],
}

fn at_most(name: &'static str, value: f64, threshold: f64) -> Check {
    Check { name, value, threshold, passed: value <= threshold }
}

fn at_least(name: &'static str, value: f64, threshold: f64) -> Check {
    Check { name, value, threshold, passed: value >= threshold }
}

fn verify(cfg: &RunConfig, sink: &mut Sink) -> Out {
    let p = &cfg.params;
    let (sol, rep) = equilibrium(cfg)?;
    let rho0 = &sol.profile;
    let grid = rho0.grid();
    let mut checks = vec![
        at_most("el_residual", sol.el_residual, 1e-8 * p.sigma),
        at_most("bc_residual", sol.bc_residuals.0.abs().max(sol.bc_residuals.1.abs()), 1e-7 * p.sigma),
        at_most("volume_error", (volume_functional(rho0) - p.volume).abs() / p.volume, 1e-10),
        at_least("energy_minus_lower_bound", sol.energy - energy_lower_bound(p), 0.0),
    ];
    let target = (-p.gamma_jump / p.sigma).acos();
    let (a, b) = sol.young_angles();
    checks.push(at_most("young_angle_error", (a - target).abs().max((b - target).abs()), 1e-3));
    let monotone = rep.energies.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    if rep.energies.len() > 1 {
        let scale = rep.energies.iter().fold(1.0f64, |m, e| m.max(e.abs()));
        checks.push(at_most("continuation_energy_increase", monotone, 1e-12 * scale));
    }
    if p.gamma_jump < 0.0 {
        checks.push(at_least("min_multiplier", rep.multipliers.iter().copied().fold(f64::INFINITY, f64::min), 0.0));
    }
    let (lo, hi) = rep.sup_rho_prime.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    if hi > 1e-8 {
        checks.push(at_most("sup_rho_prime_variation", (hi - lo) / hi, 0.05));
    }

    // Directional derivative of the regularized energy.
    let eps = 1e-3;
    let h: Vec<f64> = grid.nodes().iter().map(|t| (2.0 * t).cos() + 0.3 * t.sin()).collect();
    let analytic: f64 = energy_gradient(rho0, p, eps).iter().zip(&h).map(|(g, v)| g * v).sum();
    let s = 1e-5;
    let shifted = |sign: f64| rho0.with_rho(rho0.rho().iter().zip(&h).map(|(r, v)| r + sign * s * v).collect());
    let fd = (energy_eps(&shifted(1.0)?, p, eps) - energy_eps(&shifted(-1.0)?, p, eps)) / (2.0 * s);
    checks.push(at_most("directional_derivative_rel", (fd - analytic).abs() / analytic.abs().max(1e-300), 1e-6));

    if p.is_sessile() && cfg.grid_n % 2 == 0 {
        checks.push(at_most("symmetry", verify_symmetry(&sol)?.max_asymmetry / rho0.max_rho(), 1e-8));
        let xis = shift_function(rho0)?;
        let orth: Vec<f64> = xis.iter().zip(rho0.rho()).map(|(a, b)| a * b).collect();
        checks.push(at_most("xis_rho0_orthogonality", integrate(&orth, grid)?.abs(), 1e-8));
        let ratio = second_variation(rho0, p, &xis, &xis)?.abs() / h1_norm_sq(&xis, grid)?;
        checks.push(at_most("kernel_ratio", ratio, 1e-4));
        let form = sigma_form(rho0, p)?;
        let asym = (&form.stiffness - form.stiffness.transpose()).abs().max() / form.stiffness.abs().max();
        checks.push(at_most("stiffness_asymmetry", asym, 1e-12));
        let mass = constrained_eigen(&form, Subspace::MassConstrained)?;
        let doubly = constrained_eigen(&form, Subspace::DoublyConstrained)?;
        checks.push(at_most("mass_constrained_gap", mass.gap().abs(), 1e-3));
        checks.push(at_least("kernel_alignment", mass.alignment(&xis), 0.99));
        checks.push(at_least("gap_ratio", doubly.gap() / mass.gap().abs().max(1e-300), 10.0));
        let smax = form.stiffness.abs().max();
        let worst = form.eigen_residuals(&doubly).into_iter().fold(0.0, f64::max);
        checks.push(at_most("eigen_residual", worst / smax, 1e-8));
        let frame = recentre(&to_cartesian(rho0).translated(0.05), rho0)?;
        checks.push(at_most("recentre_shift_error", (frame.pole_x - 0.05).abs(), 1e-3));
    }
    let passed = checks.iter().all(|c| c.passed);
    sink.json("verify.json", &VerifyOut { passed, checks: &checks })?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Checks(failed));
    }
    Ok(())
}

/// Wall-clock helper for progress lines on stderr.
pub fn elapsed(start: Instant) -> String {
    format!("{:.2} s", start.elapsed().as_secs_f64())
}
