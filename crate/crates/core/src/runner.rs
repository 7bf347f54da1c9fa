//! Named experiments, run configuration and the command-line front end.
//!
//! A [`RunConfig`] is a flat set of `key=value` pairs. Values come from the
//! built-in defaults, then an optional config file, then `--key value`
//! flags (flags win). The resolved config is echoed at the top of every CSV
//! and in `manifest.json`; either echo parses back into an identical config.
//!
//! Times (`t-final`, `dt*`, `sample-every`, `snapshots`) are in units of the
//! natural period `T = 2π/ω`; `horizon` and `check-interval` are in units of
//! `T_γ = 2π/γ`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::basins::{
    basin_fraction_sweep, classify_grid, crossing_bracket, ensemble_mean_action, ActionSeries, Bounds,
    CircleEnsemble, GridSpec, Horizon,
};
use crate::classical::{
    critical_frequencies, find_fixed_points, integrate_classical, root_residual, stability,
    FixedPointSet, FrequencyScan, ROOT_TOL,
};
use crate::error::{exit, Error, Result};
use crate::export::{ArtifactWriter, Cell};
use crate::fock::{evolve_density_matrix, husimi, AlphaGrid, DensityMatrix};
use crate::langevin::{run_ensemble, survival_curve, Attractor, EscapeConfig, InitialCondition, LangevinConfig};
use crate::liouvillian::{build_liouvillian_capped, lifetime, mode_diagonals, spectrum, spectrum_sweep};
use crate::params::OscillatorParams;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "KERRSIM_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Experiment {
    FixedPoints,
    Basins,
    BasinSweep,
    ClassicalEnsemble,
    QuantumEvolve,
    Husimi,
    SpectrumSweep,
    ModeDiagonals,
    LangevinEnsemble,
    Escape,
    CompareFig3,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::FixedPoints,
        Experiment::Basins,
        Experiment::BasinSweep,
        Experiment::ClassicalEnsemble,
        Experiment::QuantumEvolve,
        Experiment::Husimi,
        Experiment::SpectrumSweep,
        Experiment::ModeDiagonals,
        Experiment::LangevinEnsemble,
        Experiment::Escape,
        Experiment::CompareFig3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FixedPoints => "fixed-points",
            Experiment::Basins => "basins",
            Experiment::BasinSweep => "basin-sweep",
            Experiment::ClassicalEnsemble => "classical-ensemble",
            Experiment::QuantumEvolve => "quantum-evolve",
            Experiment::Husimi => "husimi",
            Experiment::SpectrumSweep => "spectrum-sweep",
            Experiment::ModeDiagonals => "mode-diagonals",
            Experiment::LangevinEnsemble => "langevin-ensemble",
            Experiment::Escape => "escape",
            Experiment::CompareFig3 => "compare-fig3",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::Config(format!("experiment: unknown `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// `auto` or an explicit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto<T> {
    Auto,
    Value(T),
}

impl<T: fmt::Display> fmt::Display for Auto<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Auto::Auto => f.write_str("auto"),
            Auto::Value(v) => v.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub omega: f64,
    pub g: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub nu: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    pub nu_step: f64,
    pub resolution: usize,
    pub half_width: f64,
    pub horizon: f64,
    pub dt: f64,
    pub dt_quantum: f64,
    pub dt_langevin: f64,
    pub t_final: f64,
    pub sample_every: f64,
    pub snapshots: Vec<f64>,
    pub dim: usize,
    pub liouville_dim: usize,
    pub max_dim: usize,
    pub k: usize,
    pub n_traj: usize,
    pub nbar: f64,
    pub seed: u64,
    pub a0: Auto<f64>,
    pub n0: Auto<usize>,
    pub start: Attractor,
    pub check_interval: f64,
    pub min_events: usize,
    pub husimi_half_width: f64,
    pub husimi_resolution: usize,
    pub threads: Auto<usize>,
    pub out_dir: PathBuf,
}

/// Config keys with their help text, in echo order.
pub const KEYS: &[(&str, &str)] = &[
    ("experiment", "experiment to run"),
    ("omega", "natural frequency ω"),
    ("g", "Kerr nonlinearity g"),
    ("gamma", "decay rate γ"),
    ("epsilon", "drive amplitude ε"),
    ("nu", "drive frequency ν"),
    ("nu-min", "sweep start"),
    ("nu-max", "sweep end"),
    ("nu-step", "sweep step"),
    ("resolution", "basin grid pixels per side"),
    ("half-width", "basin grid half width in Re a and Im a"),
    ("horizon", "basin classification horizon [T_γ]"),
    ("dt", "classical step [T]"),
    ("dt-quantum", "master-equation step [T]"),
    ("dt-langevin", "Langevin step [T]"),
    ("t-final", "evolution time [T]"),
    ("sample-every", "output sampling interval [T]"),
    ("snapshots", "density-matrix snapshot times [T], comma separated"),
    ("dim", "Fock truncation N for time evolution"),
    ("liouville-dim", "Fock truncation N for the dense Liouvillian"),
    ("max-dim", "largest N admitted for the dense Liouvillian"),
    ("k", "number of nonzero Liouvillian eigenvalues reported"),
    ("n-traj", "trajectories or ensemble particles"),
    ("nbar", "thermal occupation n̄ of the bath"),
    ("seed", "random seed"),
    ("a0", "initial circle radius (auto = |b| of the outer root)"),
    ("n0", "initial Fock level (auto = round(|b|²) of the outer root)"),
    ("start", "escape start attractor: inner | outer"),
    ("check-interval", "escape check interval [T_γ]"),
    ("min-events", "escapes required for a rate estimate"),
    ("husimi-half-width", "Husimi grid half width"),
    ("husimi-resolution", "Husimi grid nodes per side"),
    ("threads", "worker threads (auto = all cores)"),
    ("out-dir", "output directory"),
];

impl Default for RunConfig {
    fn default() -> Self {
        let p = OscillatorParams::default();
        let out_dir = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("kerrsim-out"));
        Self {
            experiment: Experiment::FixedPoints,
            omega: p.omega,
            g: p.g,
            gamma: p.gamma,
            epsilon: p.epsilon,
            nu: p.nu,
            nu_min: 0.6,
            nu_max: 2.4,
            nu_step: 0.01,
            resolution: 400,
            half_width: 10.0,
            horizon: 20.0,
            dt: 0.01,
            dt_quantum: 0.005,
            dt_langevin: 0.005,
            t_final: 20.0,
            sample_every: 0.1,
            snapshots: vec![20.0],
            dim: 80,
            liouville_dim: 40,
            max_dim: crate::liouvillian::DEFAULT_MAX_DIM,
            k: 100,
            n_traj: 10_000,
            nbar: 0.0,
            seed: 1,
            a0: Auto::Auto,
            n0: Auto::Auto,
            start: Attractor::Outer,
            check_interval: 0.25,
            min_events: 50,
            husimi_half_width: 6.0,
            husimi_resolution: 121,
            threads: Auto::Auto,
            out_dir,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> Result<Auto<T>>
where
    T::Err: fmt::Display,
{
    if value.trim() == "auto" {
        Ok(Auto::Auto)
    } else {
        parse(key, value).map(Auto::Value)
    }
}

impl RunConfig {
    pub fn params(&self) -> Result<OscillatorParams> {
        OscillatorParams::new(self.omega, self.g, self.gamma, self.epsilon, self.nu)
    }

    /// Sets one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.trim().parse()?,
            "omega" => self.omega = parse(key, value)?,
            "g" => self.g = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "nu" => self.nu = parse(key, value)?,
            "nu-min" => self.nu_min = parse(key, value)?,
            "nu-max" => self.nu_max = parse(key, value)?,
            "nu-step" => self.nu_step = parse(key, value)?,
            "resolution" => self.resolution = parse(key, value)?,
            "half-width" => self.half_width = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "dt-quantum" => self.dt_quantum = parse(key, value)?,
            "dt-langevin" => self.dt_langevin = parse(key, value)?,
            "t-final" => self.t_final = parse(key, value)?,
            "sample-every" => self.sample_every = parse(key, value)?,
            "snapshots" => {
                self.snapshots = if value.trim().is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|s| parse(key, s)).collect::<Result<_>>()?
                }
            }
            "dim" => self.dim = parse(key, value)?,
            "liouville-dim" => self.liouville_dim = parse(key, value)?,
            "max-dim" => self.max_dim = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "n-traj" => self.n_traj = parse(key, value)?,
            "nbar" => self.nbar = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "a0" => self.a0 = parse_auto(key, value)?,
            "n0" => self.n0 = parse_auto(key, value)?,
            "start" => {
                self.start = match value.trim() {
                    "inner" => Attractor::Inner,
                    "outer" => Attractor::Outer,
                    other => {
                        return Err(Error::Config(format!("start: expected inner or outer, got `{other}`")))
                    }
                }
            }
            "check-interval" => self.check_interval = parse(key, value)?,
            "min-events" => self.min_events = parse(key, value)?,
            "husimi-half-width" => self.husimi_half_width = parse(key, value)?,
            "husimi-resolution" => self.husimi_resolution = parse(key, value)?,
            "threads" => self.threads = parse_auto(key, value)?,
            "out-dir" => self.out_dir = PathBuf::from(value.trim()),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "experiment" => self.experiment.to_string(),
            "omega" => self.omega.to_string(),
            "g" => self.g.to_string(),
            "gamma" => self.gamma.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "nu" => self.nu.to_string(),
            "nu-min" => self.nu_min.to_string(),
            "nu-max" => self.nu_max.to_string(),
            "nu-step" => self.nu_step.to_string(),
            "resolution" => self.resolution.to_string(),
            "half-width" => self.half_width.to_string(),
            "horizon" => self.horizon.to_string(),
            "dt" => self.dt.to_string(),
            "dt-quantum" => self.dt_quantum.to_string(),
            "dt-langevin" => self.dt_langevin.to_string(),
            "t-final" => self.t_final.to_string(),
            "sample-every" => self.sample_every.to_string(),
            "snapshots" => self.snapshots.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
            "dim" => self.dim.to_string(),
            "liouville-dim" => self.liouville_dim.to_string(),
            "max-dim" => self.max_dim.to_string(),
            "k" => self.k.to_string(),
            "n-traj" => self.n_traj.to_string(),
            "nbar" => self.nbar.to_string(),
            "seed" => self.seed.to_string(),
            "a0" => self.a0.to_string(),
            "n0" => self.n0.to_string(),
            "start" => match self.start {
                Attractor::Inner => "inner".into(),
                Attractor::Outer => "outer".into(),
            },
            "check-interval" => self.check_interval.to_string(),
            "min-events" => self.min_events.to_string(),
            "husimi-half-width" => self.husimi_half_width.to_string(),
            "husimi-resolution" => self.husimi_resolution.to_string(),
            "threads" => self.threads.to_string(),
            "out-dir" => self.out_dir.display().to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Ordered `(key, value)` echo.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        KEYS.iter()
            .map(|(k, _)| (*k, self.get(k).expect("every listed key has a getter")))
            .collect()
    }

    pub fn to_kv(&self) -> String {
        self.pairs().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are ignored; a leading `# ` is stripped first so
    /// that CSV header blocks can be fed back in.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let echoed = raw.strip_prefix("# ");
            let line = echoed.unwrap_or(raw).trim();
            // echoed CSV headers also carry free-text lines
            if line.is_empty() || line.starts_with('#') || (echoed.is_some() && !line.contains('=')) {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_kv(text)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        let positive = [
            ("nu-step", self.nu_step),
            ("half-width", self.half_width),
            ("horizon", self.horizon),
            ("dt", self.dt),
            ("dt-quantum", self.dt_quantum),
            ("dt-langevin", self.dt_langevin),
            ("sample-every", self.sample_every),
            ("check-interval", self.check_interval),
            ("husimi-half-width", self.husimi_half_width),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k}: must be finite and > 0, got {v}")));
            }
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t-final: must be finite and ≥ 0, got {}", self.t_final)));
        }
        if !(self.nu_min < self.nu_max) {
            return Err(Error::Config("nu-min: must be below nu-max".into()));
        }
        if !(self.nbar >= 0.0) {
            return Err(Error::Config("nbar: must be ≥ 0".into()));
        }
        for (k, v) in [
            ("resolution", self.resolution),
            ("n-traj", self.n_traj),
            ("k", self.k),
            ("husimi-resolution", self.husimi_resolution),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{k}: must be ≥ 1")));
            }
        }
        if self.dim < 2 || self.liouville_dim < 2 {
            return Err(Error::Config("dim: truncation must be ≥ 2".into()));
        }
        if let Auto::Value(a0) = self.a0 {
            if !(a0 >= 0.0 && a0.is_finite()) {
                return Err(Error::Config("a0: must be finite and ≥ 0".into()));
            }
        }
        if self.threads == Auto::Value(0) {
            return Err(Error::Config("threads: must be ≥ 1 or auto".into()));
        }
        Ok(())
    }

    /// Sweep grid `nu-min, nu-min + nu-step, …` up to `nu-max`.
    pub fn nu_grid(&self) -> Vec<f64> {
        let n = ((self.nu_max - self.nu_min) / self.nu_step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.nu_min + k as f64 * self.nu_step).collect()
    }
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub experiment: String,
    /// Resolved config as `key=value` lines; parses back via [`RunConfig::from_kv`].
    pub config: String,
    pub config_map: BTreeMap<String, String>,
    /// Values derived at run time (resolved `auto` settings, critical points).
    pub derived: BTreeMap<String, f64>,
    pub files: Vec<crate::export::Artifact>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    p: OscillatorParams,
    out: ArtifactWriter,
    derived: BTreeMap<String, f64>,
}

impl Ctx<'_> {
    fn period(&self) -> f64 {
        self.p.period()
    }

    /// Steps per output sample for a step of `dt` (both in units of T).
    fn stride(&self, key: &str, dt: f64) -> Result<usize> {
        let s = (self.cfg.sample_every / dt).round();
        if s < 1.0 || ((s * dt) - self.cfg.sample_every).abs() > 1e-9 * self.cfg.sample_every {
            return Err(Error::Config(format!(
                "sample-every: {} is not a multiple of {key} = {dt}",
                self.cfg.sample_every
            )));
        }
        Ok(s as usize)
    }

    fn roots(&self) -> Result<FixedPointSet> {
        find_fixed_points(&self.p, ROOT_TOL)
    }

    fn a0(&mut self) -> Result<f64> {
        let a0 = match self.cfg.a0 {
            Auto::Value(v) => v,
            Auto::Auto => self.roots()?.outer().b.norm(),
        };
        self.derived.insert("a0".into(), a0);
        Ok(a0)
    }

    fn n0(&mut self) -> Result<usize> {
        let n0 = match self.cfg.n0 {
            Auto::Value(v) => v,
            Auto::Auto => self.roots()?.outer().action.round() as usize,
        };
        if n0 >= self.cfg.dim {
            return Err(Error::Config(format!("n0: level {n0} does not fit in dim = {}", self.cfg.dim)));
        }
        self.derived.insert("n0".into(), n0 as f64);
        Ok(n0)
    }

    fn horizon(&self) -> Horizon {
        Horizon {
            t_horizon: self.cfg.horizon * self.p.relaxation_period(),
            dt: self.cfg.dt * self.period(),
            check_every: 10,
        }
    }

    fn grid(&self) -> GridSpec {
        GridSpec {
            bounds: Bounds::square(self.cfg.half_width),
            resolution: self.cfg.resolution,
        }
    }
}

/// Sample times in units of T, rebuilt from step indices so that e.g.
/// `400 · 0.005` prints as `2` rather than carrying the `/T` round-off.
fn in_periods(times: &[f64], dt_abs: f64, dt_periods: f64) -> Vec<f64> {
    times.iter().map(|t| (t / dt_abs).round() * dt_periods).collect()
}

fn rescaled(s: &ActionSeries, dt_abs: f64, dt_periods: f64) -> ActionSeries {
    ActionSeries {
        times: in_periods(&s.times, dt_abs, dt_periods),
        ..s.clone()
    }
}

fn root_rows(set: &FixedPointSet, p: &OscillatorParams) -> Result<Vec<[Cell; 7]>> {
    set.roots
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s = stability(p, r.b, ROOT_TOL)?;
            let lead = s.jacobian_eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            Ok([
                Cell::F(p.nu),
                Cell::U(i),
                Cell::F(r.b.re),
                Cell::F(r.b.im),
                Cell::F(r.action),
                Cell::B(r.stable),
                Cell::F(lead),
            ])
        })
        .collect()
}

const ROOT_COLUMNS: [&str; 7] = ["nu", "index", "re", "im", "action", "stable", "max_re_jacobian"];

fn fixed_points(c: &mut Ctx) -> Result<()> {
    let set = c.roots()?;
    let residual = set.roots.iter().map(|r| root_residual(&c.p, r.b)).fold(0.0, f64::max);
    c.derived.insert("max_residual".into(), residual);
    let rows = root_rows(&set, &c.p)?;
    c.out.csv("roots.csv", &ROOT_COLUMNS, rows, "fixed points at nu, ascending action")?;

    let mut sweep = Vec::new();
    for nu in c.cfg.nu_grid() {
        let p = c.p.with_nu(nu);
        match find_fixed_points(&p, ROOT_TOL) {
            Ok(s) => sweep.extend(root_rows(&s, &p)?),
            // exactly at a fold the pair is reported by neither branch
            Err(Error::DegenerateRoots { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    c.out.csv("roots_sweep.csv", &ROOT_COLUMNS, sweep, "fixed points over the nu grid")?;

    let scan = FrequencyScan {
        nu_min: c.cfg.nu_min,
        nu_max: c.cfg.nu_max,
        n_points: c.cfg.nu_grid().len(),
    };
    let cf = critical_frequencies(&c.p, &scan)?;
    if let Some(v) = cf.nu1 {
        c.derived.insert("nu1".into(), v);
    }
    if let Some(v) = cf.nu2 {
        c.derived.insert("nu2".into(), v);
    }
    c.out.json("critical.json", &cf, "saddle-node frequencies")
}

fn basins(c: &mut Ctx) -> Result<()> {
    let set = c.roots()?;
    let map = classify_grid(&c.p, &c.grid(), &c.horizon())?;
    let roots: Vec<Complex64> = set.roots.iter().map(|r| r.b).collect();
    c.derived.insert("outer_fraction".into(), map.fractions.outer);
    c.out.basin_map("basins", &map, &roots)
}

fn basin_sweep(c: &mut Ctx) -> Result<()> {
    let nus = c.cfg.nu_grid();
    let sweep = basin_fraction_sweep(&c.p, &nus, &c.grid(), &c.horizon())?;
    let rows = sweep.iter().map(|s| {
        [
            Cell::F(s.nu),
            Cell::F(s.fractions.outer),
            Cell::F(s.fractions.inner),
            Cell::F(s.fractions.unresolved),
        ]
    });
    c.out.csv(
        "basin_sweep.csv",
        &["nu", "outer", "inner", "unresolved"],
        rows,
        "basin fractions over the nu grid",
    )?;
    if let Some((lo, hi)) = crossing_bracket(&sweep) {
        let f = |nu: f64| sweep.iter().find(|s| s.nu == nu).map(|s| s.fractions.outer).unwrap_or(0.5);
        let (flo, fhi) = (f(lo), f(hi));
        let nu3 = lo + (hi - lo) * (flo - 0.5) / (flo - fhi);
        c.derived.insert("nu3_interpolated".into(), nu3);
    }
    Ok(())
}

fn classical_ensemble(c: &mut Ctx) -> Result<()> {
    let t = c.period();
    let a0 = c.a0()?;
    let stride = c.stride("dt", c.cfg.dt)?;
    let ens = CircleEnsemble {
        a0,
        n_particles: c.cfg.n_traj,
    };
    let dt = c.cfg.dt * t;
    let s = ensemble_mean_action(&c.p, &ens, c.cfg.t_final * t, dt, stride)?;
    let s = rescaled(&s, dt, c.cfg.dt);
    c.out.action_series("classical_action.csv", &s, 1.0, "circle-ensemble mean action (t in T)")?;
    let mut tr = integrate_classical(&c.p, Complex64::new(a0, 0.0), c.cfg.t_final * t, dt, stride)?;
    tr.times = in_periods(&tr.times, dt, c.cfg.dt);
    c.out.trajectory("trajectory.csv", &tr, 1.0)
}

fn quantum_states(c: &mut Ctx) -> Result<(DensityMatrix, crate::fock::Evolution)> {
    let t = c.period();
    let n0 = c.n0()?;
    let rho0 = DensityMatrix::fock(c.cfg.dim, n0)?;
    let stride = c.stride("dt-quantum", c.cfg.dt_quantum)?;
    let ev = evolve_density_matrix(&c.p, &rho0, c.cfg.t_final * t, c.cfg.dt_quantum * t, stride)?;
    Ok((rho0, ev))
}

fn quantum_evolve(c: &mut Ctx) -> Result<()> {
    let t = c.period();
    let (_, ev) = quantum_states(c)?;
    let times = in_periods(&ev.times, c.cfg.dt_quantum * t, c.cfg.dt_quantum);
    let rows = times
        .iter()
        .zip(ev.occupations())
        .map(|(tt, n)| [Cell::F(*tt), Cell::F(n)]);
    c.out.csv("occupation.csv", &["t", "n"], rows, "mean occupation (t in T)")?;
    for &s in &c.cfg.snapshots.clone() {
        if !(s >= 0.0 && s <= c.cfg.t_final) {
            return Err(Error::Config(format!("snapshots: {s} outside [0, t-final]")));
        }
        let idx = times
            .iter()
            .position(|tt| (tt - s).abs() < 1e-9 * s.max(1.0))
            .ok_or_else(|| Error::Config(format!("snapshots: {s} is not a sampled time")))?;
        c.out.density_matrix(&format!("rho_t{s}"), &ev.states[idx])?;
    }
    Ok(())
}

fn husimi_exp(c: &mut Ctx) -> Result<()> {
    let (rho0, ev) = quantum_states(c)?;
    let grid = AlphaGrid::square(c.cfg.husimi_half_width, c.cfg.husimi_resolution);
    let q0 = husimi(&rho0, &grid)?;
    c.out.husimi("husimi_t0", &q0)?;
    let q1 = husimi(ev.last(), &grid)?;
    c.out.husimi(&format!("husimi_t{}", c.cfg.t_final), &q1)
}

fn spectrum_sweep_exp(c: &mut Ctx) -> Result<()> {
    let nus = c.cfg.nu_grid();
    let k = c.cfg.k;
    let rows = spectrum_sweep(&c.p, &nus, c.cfg.liouville_dim, k + 1, c.cfg.max_dim)?;
    let long = rows.iter().flat_map(|r| {
        r.eigenvalues
            .iter()
            .enumerate()
            .map(move |(j, z)| [Cell::F(r.nu), Cell::U(j), Cell::F(z.re), Cell::F(z.im)])
    });
    c.out.csv("spectrum.csv", &["nu", "j", "re", "im"], long, "sorted Liouvillian eigenvalues per nu")?;

    let names: Vec<String> = std::iter::once("nu".to_string())
        .chain((1..=k).map(|j| format!("re_{j}")))
        .collect();
    let cols: Vec<&str> = names.iter().map(String::as_str).collect();
    let wide = rows.iter().map(|r| {
        std::iter::once(Cell::F(r.nu))
            .chain((1..=k).map(|j| Cell::F(r.eigenvalues.get(j).map_or(f64::NAN, |z| z.re))))
            .collect::<Vec<_>>()
    });
    c.out.csv("spectrum_sweep.csv", &cols, wide, "Re λ_1..Re λ_k per nu")
}

fn mode_diagonals_exp(c: &mut Ctx) -> Result<()> {
    let lm = build_liouvillian_capped(&c.p, c.cfg.liouville_dim, c.cfg.max_dim)?;
    let sd = spectrum(&lm, 2)?;
    let (d0, d1) = mode_diagonals(&sd);
    let rows = d0
        .iter()
        .zip(&d1)
        .enumerate()
        .map(|(n, (a, b))| [Cell::U(n), Cell::F(*a), Cell::F(*b)]);
    c.out.csv("mode_diagonals.csv", &["n", "rho0_nn", "rho1_nn"], rows, "steady state and metastable mode diagonals")?;
    let k = (c.cfg.k + 1).min(sd.eigenvalues.len());
    let ev = sd.eigenvalues[..k]
        .iter()
        .enumerate()
        .map(|(j, z)| [Cell::U(j), Cell::F(z.re), Cell::F(z.im)]);
    c.out.csv("spectrum.csv", &["j", "re", "im"], ev, "sorted Liouvillian eigenvalues")?;
    c.derived.insert("re_lambda1".into(), sd.lambda(1).re);
    c.derived.insert("im_lambda1".into(), sd.lambda(1).im);
    if let Ok(tau) = lifetime(&sd) {
        c.derived.insert("lifetime_T".into(), tau / c.period());
    }
    Ok(())
}

fn langevin_cfg(c: &mut Ctx, initial: InitialCondition) -> LangevinConfig {
    let mut l = LangevinConfig::new(&c.p, c.cfg.n_traj, c.cfg.seed, initial);
    l.dt = c.cfg.dt_langevin * c.period();
    l.nbar = c.cfg.nbar;
    l
}

fn langevin_ensemble(c: &mut Ctx) -> Result<()> {
    let t = c.period();
    let a0 = c.a0()?;
    let init = InitialCondition::Circle(CircleEnsemble {
        a0,
        n_particles: c.cfg.n_traj,
    });
    let l = langevin_cfg(c, init);
    let stride = c.stride("dt-langevin", c.cfg.dt_langevin)?;
    let s = run_ensemble(&c.p, &l, c.cfg.t_final * t, stride)?;
    let s = rescaled(&s, l.dt, c.cfg.dt_langevin);
    c.out.action_series("langevin_action.csv", &s, 1.0, "truncated-Wigner mean |a|² with standard error (t in T)")
}

fn escape(c: &mut Ctx) -> Result<()> {
    let t = c.period();
    let set = c.roots()?;
    let b = match c.cfg.start {
        Attractor::Inner => set.inner().b,
        Attractor::Outer => set.outer().b,
    };
    let l = langevin_cfg(c, InitialCondition::Point { re: b.re, im: b.im });
    let mut esc = EscapeConfig::new(&c.p, c.cfg.start);
    esc.check_interval = c.cfg.check_interval * c.p.relaxation_period();
    esc.min_events = c.cfg.min_events;
    let s = survival_curve(&c.p, &l, &esc, c.cfg.t_final * t)?;
    let times = in_periods(&s.times, l.dt, c.cfg.dt_langevin);
    let rows = times.iter().zip(&s.survival).map(|(tt, v)| [Cell::F(*tt), Cell::F(*v)]);
    c.out.csv("survival.csv", &["t", "S"], rows, "fraction not yet escaped (t in T)")?;
    c.derived.insert("escapes".into(), s.escapes as f64);
    if s.escapes >= esc.min_events && s.rate.is_finite() {
        c.derived.insert("rate".into(), s.rate);
    } else {
        let exposure = c.cfg.n_traj as f64 * c.cfg.t_final * t;
        c.derived.insert("rate_upper_bound".into(), (s.escapes as f64 + 3.0) / exposure);
    }
    Ok(())
}

fn compare_fig3(c: &mut Ctx) -> Result<()> {
    let t = c.period();
    let a0 = c.a0()?;
    let ens = CircleEnsemble {
        a0,
        n_particles: c.cfg.n_traj,
    };
    let cl = ensemble_mean_action(&c.p, &ens, c.cfg.t_final * t, c.cfg.dt * t, c.stride("dt", c.cfg.dt)?)?;
    let (_, ev) = quantum_states(c)?;
    let l = langevin_cfg(c, InitialCondition::Circle(ens));
    let lg = run_ensemble(&c.p, &l, c.cfg.t_final * t, c.stride("dt-langevin", c.cfg.dt_langevin)?)?;
    let nq = ev.occupations();
    let times = in_periods(&cl.times, c.cfg.dt * t, c.cfg.dt);
    if cl.times.len() != nq.len() || lg.times.len() != nq.len() {
        return Err(Error::Config("sample-every: series do not share sample times".into()));
    }
    let rows = (0..nq.len()).map(|i| {
        [
            Cell::F(times[i]),
            Cell::F(cl.values[i]),
            Cell::F(nq[i]),
            Cell::F(lg.values[i]),
            Cell::F(lg.stderr[i]),
        ]
    });
    c.out.csv(
        "compare_fig3.csv",
        &["t", "I_classical", "n_quantum", "I_langevin", "stderr"],
        rows,
        "classical, quantum and truncated-Wigner mean action (t in T)",
    )
}

/// Runs one experiment, writing its artifacts and `manifest.json` to the
/// configured output directory.
pub fn run(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let p = cfg.params()?;
    let version = env!("CARGO_PKG_VERSION");
    let mut header = vec![format!("kerrsim {version}")];
    header.extend(cfg.pairs().into_iter().map(|(k, v)| format!("{k}={v}")));
    let out = ArtifactWriter::new(&cfg.out_dir, header)?;
    let mut c = Ctx {
        cfg,
        p,
        out,
        derived: BTreeMap::new(),
    };
    let body = |c: &mut Ctx| match cfg.experiment {
        Experiment::FixedPoints => fixed_points(c),
        Experiment::Basins => basins(c),
        Experiment::BasinSweep => basin_sweep(c),
        Experiment::ClassicalEnsemble => classical_ensemble(c),
        Experiment::QuantumEvolve => quantum_evolve(c),
        Experiment::Husimi => husimi_exp(c),
        Experiment::SpectrumSweep => spectrum_sweep_exp(c),
        Experiment::ModeDiagonals => mode_diagonals_exp(c),
        Experiment::LangevinEnsemble => langevin_ensemble(c),
        Experiment::Escape => escape(c),
        Experiment::CompareFig3 => compare_fig3(c),
    };
    match cfg.threads {
        Auto::Auto => body(&mut c)?,
        Auto::Value(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("threads: {e}")))?
            .install(|| body(&mut c))?,
    }
    let manifest = Manifest {
        program: "kerrsim".into(),
        version: version.into(),
        experiment: cfg.experiment.to_string(),
        config: cfg.to_kv(),
        config_map: cfg.pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        derived: c.derived,
        files: c.out.artifacts().to_vec(),
    };
    manifest.write(c.out.dir())?;
    Ok(manifest)
}

fn command() -> clap::Command {
    use clap::{Arg, Command};
    let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
    let mut cmd = Command::new("kerrsim")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Damped driven Kerr oscillator: classical, quantum and truncated-Wigner experiments")
        .arg(
            Arg::new("experiment-name")
                .value_name("EXPERIMENT")
                .help(format!("one of: {}", names.join(", "))),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value config file (flags override it)"),
        );
    for (key, help) in KEYS {
        cmd = cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").help(*help));
    }
    cmd
}

/// Builds the config from command-line arguments (program name first).
pub fn config_from_args<I, S>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let m = command()
        .try_get_matches_from(args)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut cfg = RunConfig::default();
    if let Some(path) = m.get_one::<String>("config") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("config: {path}: {e}")))?;
        cfg.apply_kv(&text)?;
    }
    if let Some(name) = m.get_one::<String>("experiment-name") {
        cfg.set("experiment", name)?;
    }
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

/// Command-line entry point; returns the process exit status.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    if args.iter().skip(1).any(|a| a == "--help" || a == "-h" || a == "--version" || a == "-V") {
        return match command().try_get_matches_from(&args) {
            Err(e) => {
                let _ = e.print();
                exit::OK
            }
            Ok(_) => exit::OK,
        };
    }
    let result = config_from_args(args).and_then(|cfg| run(&cfg));
    match result {
        Ok(m) => {
            eprintln!("{}: wrote {} file(s) and manifest.json", m.experiment, m.files.len());
            for (k, v) in &m.derived {
                eprintln!("  {k} = {v}");
            }
            exit::OK
        }
        Err(e) => {
            eprintln!("kerrsim: {e}");
            e.exit_code()
        }
    }
}
