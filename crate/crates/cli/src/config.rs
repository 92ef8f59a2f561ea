//! `key = value` run configuration with `[params]`, `[grid]` and `[run]`
//! sections. Parsing is fail-closed: unknown sections or keys, duplicates and
//! missing required keys are errors that name the offending key.

use std::collections::BTreeMap;
use std::path::PathBuf;

use capdrop::{PhysicalParams, Subspace};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {msg}")]
    Value { key: String, msg: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

/// One term `amplitude * cos(k theta)` or `amplitude * sin(k theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub sine: bool,
    pub k: u32,
    pub amplitude: f64,
}

impl Mode {
    pub fn eval(&self, theta: f64) -> f64 {
        let a = self.k as f64 * theta;
        self.amplitude * if self.sine { a.sin() } else { a.cos() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub grid_n: usize,
    /// Strictly decreasing.
    pub eps_schedule: Vec<f64>,
    pub seed: u64,
    /// Deterministic part of the perturbation used by `recentre` and `relax`.
    pub perturbation: Vec<Mode>,
    /// Amplitude of the seeded random Fourier perturbation (0 disables it).
    pub random_amplitude: f64,
    pub random_modes: u32,
    /// Horizontal translation applied to the drop in `recentre`.
    pub shift: f64,
    /// Optional `x,y` CSV outline for `recentre`, replacing the synthetic one.
    pub curve: Option<PathBuf>,
    pub subspace: Subspace,
    /// Eigenvalues written by `spectrum`.
    pub eigen_count: usize,
    /// Eigenvectors written to CSV by `spectrum` (0 disables the file).
    pub eigenvectors: usize,
    /// `(C1, C2, D1, D2)` for `kernel`.
    pub constants: (f64, f64, f64, f64),
    pub t_end: f64,
    pub dt0: f64,
    pub dt_max: f64,
    pub snapshot_interval: f64,
}

const SECTIONS: [&str; 3] = ["params", "grid", "run"];
const PARAM_KEYS: [&str; 7] = ["g", "sigma", "gamma_jump", "volume", "theta1", "theta2", "kappa"];
const GRID_KEYS: [&str; 1] = ["n"];
const RUN_KEYS: [&str; 15] = [
    "eps_schedule",
    "seed",
    "perturbation",
    "random_amplitude",
    "random_modes",
    "shift",
    "curve",
    "subspace",
    "eigen_count",
    "eigenvectors",
    "constants",
    "t_end",
    "dt0",
    "dt_max",
    "snapshot_interval",
];

fn allowed(section: &str, key: &str) -> bool {
    match section {
        "params" => PARAM_KEYS.contains(&key),
        "grid" => GRID_KEYS.contains(&key),
        "run" => RUN_KEYS.contains(&key),
        _ => false,
    }
}

struct Table(BTreeMap<String, String>);

impl Table {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn f64(&self, key: &'static str) -> Result<Option<f64>> {
        self.raw(key).map(|v| parse_f64(key, v)).transpose()
    }

    fn required(&self, key: &'static str) -> Result<f64> {
        self.f64(key)?.ok_or(ConfigError::Missing(key))
    }

    fn uint(&self, key: &'static str) -> Result<Option<u64>> {
        self.raw(key)
            .map(|v| v.parse::<u64>().map_err(|e| value_err(key, format!("`{v}` is not a nonnegative integer ({e})"))))
            .transpose()
    }
}

fn value_err(key: &str, msg: String) -> ConfigError {
    ConfigError::Value { key: key.to_string(), msg }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| value_err(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(value_err(key, format!("`{v}` is not finite")));
    }
    Ok(x)
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

fn parse_modes(v: &str) -> Result<Vec<Mode>> {
    let key = "perturbation";
    if v.trim().is_empty() {
        return Ok(vec![]);
    }
    v.split(',')
        .map(|term| {
            let parts: Vec<&str> = term.trim().split(':').collect();
            let [kind, k, amp] = parts[..] else {
                return Err(value_err(key, format!("`{}` is not of the form cos:k:amplitude", term.trim())));
            };
            let sine = match kind {
                "cos" => false,
                "sin" => true,
                other => return Err(value_err(key, format!("unknown mode `{other}`, expected cos or sin"))),
            };
            let k = k.parse().map_err(|_| value_err(key, format!("`{k}` is not a mode number")))?;
            Ok(Mode { sine, k, amplitude: parse_f64(key, amp)? })
        })
        .collect()
}

fn parse_subspace(v: &str) -> Result<Subspace> {
    match v {
        "unconstrained" => Ok(Subspace::Unconstrained),
        "mass-constrained" => Ok(Subspace::MassConstrained),
        "doubly-constrained" => Ok(Subspace::DoublyConstrained),
        other => Err(value_err(
            "subspace",
            format!("`{other}`; expected unconstrained, mass-constrained or doubly-constrained"),
        )),
    }
}

fn sections(text: &str) -> Result<BTreeMap<&'static str, Table>> {
    let mut out: BTreeMap<&'static str, Table> =
        SECTIONS.iter().map(|s| (*s, Table(BTreeMap::new()))).collect();
    let mut current: Option<&'static str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line: lineno, msg: format!("malformed section header `{line}`") })?
                .trim();
            current = Some(
                SECTIONS
                    .iter()
                    .copied()
                    .find(|s| *s == name)
                    .ok_or_else(|| ConfigError::UnknownSection(name.to_string()))?,
            );
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: lineno, msg: format!("expected key = value, got `{line}`") })?;
        let (key, value) = (key.trim(), value.trim());
        let section = current
            .ok_or_else(|| ConfigError::Syntax { line: lineno, msg: format!("`{key}` appears before any section") })?;
        if !allowed(section, key) {
            return Err(ConfigError::UnknownKey { section: section.to_string(), key: key.to_string() });
        }
        let table = out.get_mut(section).expect("known section");
        if table.0.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ConfigError::Duplicate(key.to_string()));
        }
    }
    Ok(out)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let s = sections(text)?;
    let (p, g, r) = (&s["params"], &s["grid"], &s["run"]);

    let params = PhysicalParams {
        g: p.required("g")?,
        sigma: p.required("sigma")?,
        gamma_jump: p.required("gamma_jump")?,
        volume: p.required("volume")?,
        theta1: p.f64("theta1")?.unwrap_or(0.0),
        theta2: p.f64("theta2")?.unwrap_or(0.0),
        kappa: p.f64("kappa")?.unwrap_or(1.0),
    };
    params.validate().map_err(|e| match e {
        capdrop::Error::InvalidParams { name, reason } => value_err(name, reason),
        other => value_err("params", other.to_string()),
    })?;

    let grid_n = g.uint("n")?.unwrap_or(400) as usize;
    if grid_n < 12 {
        return Err(value_err("n", format!("need at least 12 cells, got {grid_n}")));
    }

    let eps_schedule = match r.raw("eps_schedule") {
        Some(v) => parse_list("eps_schedule", v)?,
        None => vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
    };
    if eps_schedule.is_empty()
        || eps_schedule.iter().any(|e| *e <= 0.0)
        || eps_schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(value_err("eps_schedule", "must be positive and strictly decreasing".into()));
    }

    let positive = |key: &'static str, default: f64| -> Result<f64> {
        let v = r.f64(key)?.unwrap_or(default);
        if v <= 0.0 {
            return Err(value_err(key, format!("must be > 0, got {v}")));
        }
        Ok(v)
    };
    let t_end = positive("t_end", 8.0)?;
    let dt0 = positive("dt0", 1e-6)?;
    let dt_max = positive("dt_max", 1e-2)?;
    if dt_max < dt0 {
        return Err(value_err("dt_max", format!("must be >= dt0 = {dt0}")));
    }
    let snapshot_interval = positive("snapshot_interval", 0.05)?;

    let random_amplitude = r.f64("random_amplitude")?.unwrap_or(0.0);
    if random_amplitude < 0.0 {
        return Err(value_err("random_amplitude", "must be >= 0".into()));
    }
    let random_modes = r.uint("random_modes")?.unwrap_or(6);
    if random_modes == 0 || random_modes > 64 {
        return Err(value_err("random_modes", format!("must lie in 1..=64, got {random_modes}")));
    }

    let constants = match r.raw("constants") {
        Some(v) => match parse_list("constants", v)?[..] {
            [c1, c2, d1, d2] => (c1, c2, d1, d2),
            _ => return Err(value_err("constants", "expected four values C1, C2, D1, D2".into())),
        },
        None => (1.0, 1.0, 0.0, 0.0),
    };

    Ok(RunConfig {
        params,
        grid_n,
        eps_schedule,
        seed: r.uint("seed")?.unwrap_or(0),
        perturbation: r.raw("perturbation").map(parse_modes).transpose()?.unwrap_or_default(),
        random_amplitude,
        random_modes: random_modes as u32,
        shift: r.f64("shift")?.unwrap_or(0.0),
        curve: r.raw("curve").filter(|v| !v.is_empty()).map(PathBuf::from),
        subspace: r.raw("subspace").map(parse_subspace).transpose()?.unwrap_or(Subspace::DoublyConstrained),
        eigen_count: r.uint("eigen_count")?.unwrap_or(10) as usize,
        eigenvectors: r.uint("eigenvectors")?.unwrap_or(0) as usize,
        constants,
        t_end,
        dt0,
        dt_max,
        snapshot_interval,
    })
}
