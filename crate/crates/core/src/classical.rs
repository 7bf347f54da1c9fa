//! Classical dynamics in the frame co-rotating with the drive.
//!
//! With `a = b·e^{−iνt}` the equation of motion becomes autonomous,
//!
//! ```text
//! i·ḃ = (Δω + g|b|²)·b + ε − i(γ/2)·b
//! ```
//!
//! whose fixed points are the limit cycles of the lab-frame oscillator.
//! Fixed points are found from the real cubic in the action `x = |b|²`,
//!
//! ```text
//! x·[(Δω + g·x)² + (γ/2)²] = ε²
//! ```
//!
//! and the phase follows from `b = −ε / (Δω + g·x − iγ/2)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::OscillatorParams;

/// Complex amplitude `a` (its conjugate is implicit).
pub type PhasePoint = Complex64;

/// Classification radius used to decide that a trajectory reached a root:
/// 5% of the root modulus with an absolute floor of 0.05.
#[inline]
pub fn classification_radius(root: Complex64) -> f64 {
    (0.05 * root.norm()).max(0.05)
}

/// Default residual tolerance for fixed points.
pub const ROOT_TOL: f64 = 1e-10;

/// Right-hand side of the rotating-frame equation of motion, `ḃ`.
#[inline]
pub fn eom_rotating_frame(p: &OscillatorParams, b: Complex64) -> Complex64 {
    let shift = p.detuning() + p.g * b.norm_sqr();
    let i = Complex64::i();
    -i * (b * shift + p.epsilon) - 0.5 * p.gamma * b
}

/// Residual of the fixed-point equation `(Δω − iγ/2)b + g|b|²b + ε`.
#[inline]
pub fn root_residual(p: &OscillatorParams, b: Complex64) -> f64 {
    let lin = Complex64::new(p.detuning(), -0.5 * p.gamma);
    (lin * b + p.g * b.norm_sqr() * b + p.epsilon).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub b: Complex64,
    pub action: f64,
    pub stable: bool,
}

/// One or three fixed points sorted ascending by action.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointSet {
    pub roots: Vec<FixedPoint>,
}

impl FixedPointSet {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    pub fn is_bistable(&self) -> bool {
        self.roots.len() == 3
    }

    /// Largest-action root.
    pub fn outer(&self) -> &FixedPoint {
        self.roots.last().expect("at least one root")
    }

    /// Smallest-action root.
    pub fn inner(&self) -> &FixedPoint {
        &self.roots[0]
    }

    /// Middle (saddle) root, when bistable.
    pub fn middle(&self) -> Option<&FixedPoint> {
        self.is_bistable().then(|| &self.roots[1])
    }

    pub fn stable(&self) -> impl Iterator<Item = &FixedPoint> {
        self.roots.iter().filter(|r| r.stable)
    }
}

/// Coefficients `[c3, c2, c1, c0]` of the action cubic.
fn action_cubic(p: &OscillatorParams) -> [f64; 4] {
    let d = p.detuning();
    let g = p.g;
    let hg = 0.5 * p.gamma;
    [g * g, 2.0 * d * g, d * d + hg * hg, -p.epsilon * p.epsilon]
}

fn eval_cubic(c: &[f64; 4], x: f64) -> (f64, f64) {
    let f = ((c[0] * x + c[1]) * x + c[2]) * x + c[3];
    let df = (3.0 * c[0] * x + 2.0 * c[1]) * x + c[2];
    (f, df)
}

fn polish(c: &[f64; 4], mut x: f64) -> f64 {
    for _ in 0..8 {
        let (f, df) = eval_cubic(c, x);
        if df == 0.0 || f == 0.0 {
            break;
        }
        let step = f / df;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1e-300) {
            break;
        }
    }
    x
}

/// Roots of a real cubic with `c3 ≠ 0`: the real roots and, when there is
/// only one, the complex pair's root with positive imaginary part.
fn cubic_roots(c: &[f64; 4]) -> (Vec<f64>, Option<Complex64>) {
    // depressed cubic t³ + p·t + q with x = t − a/3
    let a = c[1] / c[0];
    let b = c[2] / c[0];
    let cc = c[3] / c[0];
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + cc;
    let shift = -a / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        let x = polish(c, u + v + shift);
        // complex pair −(u+v)/2 ± i·(√3/2)(u−v)
        let pair = Complex64::new(-0.5 * (u + v) + shift, 0.5 * 3f64.sqrt() * (u - v).abs());
        (vec![x], Some(pair))
    } else {
        let r = (-p / 3.0).max(0.0).sqrt();
        let arg = if r == 0.0 {
            0.0
        } else {
            (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0)
        };
        let phi = arg.acos();
        let mut xs: Vec<f64> = (0..3)
            .map(|k| {
                let t = 2.0 * r * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
                polish(c, t + shift)
            })
            .collect();
        xs.sort_by(|x, y| x.total_cmp(y));
        (xs, None)
    }
}

/// Number of distinct positive real roots of the action cubic (1 or 3),
/// without raising on near-degeneracy.
pub fn root_count(p: &OscillatorParams) -> usize {
    if p.epsilon == 0.0 || p.g == 0.0 {
        return 1;
    }
    let c = action_cubic(p);
    let (xs, _) = cubic_roots(&c);
    xs.iter().filter(|&&x| x > 0.0).count()
}

fn amplitude_from_action(p: &OscillatorParams, x: f64) -> Complex64 {
    let denom = Complex64::new(p.detuning() + p.g * x, -0.5 * p.gamma);
    -p.epsilon / denom
}

/// Solves for all limit cycles at the given parameters.
///
/// Returns `DegenerateRoots` when two roots of the action cubic coincide
/// within `tol`, which only happens at (or extremely near) the saddle-node
/// frequencies.
pub fn find_fixed_points(p: &OscillatorParams, tol: f64) -> Result<FixedPointSet> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "must be > 0".into(),
        });
    }
    let actions: Vec<f64> = if p.epsilon == 0.0 {
        vec![0.0]
    } else if p.g == 0.0 {
        let d = p.detuning();
        let hg = 0.5 * p.gamma;
        vec![p.epsilon * p.epsilon / (d * d + hg * hg)]
    } else {
        let c = action_cubic(p);
        let (xs, pair) = cubic_roots(&c);
        if pair.is_some_and(|z| z.re > 0.0 && z.im < tol) {
            return Err(Error::DegenerateRoots { nu: p.nu, tol });
        }
        let xs: Vec<f64> = xs.into_iter().filter(|&x| x > 0.0).collect();
        if xs.windows(2).any(|w| (w[1] - w[0]).abs() < tol) {
            return Err(Error::DegenerateRoots { nu: p.nu, tol });
        }
        xs
    };

    let mut roots = Vec::with_capacity(actions.len());
    for x in actions {
        let b = if x == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            amplitude_from_action(p, x)
        };
        let lin = linearize(p, b);
        roots.push(FixedPoint {
            b,
            action: b.norm_sqr(),
            stable: lin.stable,
        });
    }
    roots.sort_by(|r, s| r.action.total_cmp(&s.action));
    Ok(FixedPointSet { roots })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stability {
    pub stable: bool,
    pub jacobian_eigenvalues: [Complex64; 2],
}

fn linearize(p: &OscillatorParams, b: Complex64) -> Stability {
    let (u, v) = (b.re, b.im);
    let s = p.detuning() + p.g * b.norm_sqr();
    let hg = 0.5 * p.gamma;
    // u̇ = s·v − (γ/2)u,  v̇ = −s·u − ε − (γ/2)v
    let j11 = 2.0 * p.g * u * v - hg;
    let j12 = s + 2.0 * p.g * v * v;
    let j21 = -s - 2.0 * p.g * u * u;
    let j22 = -2.0 * p.g * u * v - hg;
    let tr = j11 + j22;
    let det = j11 * j22 - j12 * j21;
    let root = Complex64::new(0.25 * tr * tr - det, 0.0).sqrt();
    let l1 = 0.5 * tr + root;
    let l2 = 0.5 * tr - root;
    Stability {
        stable: l1.re < 0.0 && l2.re < 0.0,
        jacobian_eigenvalues: [l1, l2],
    }
}

/// Linear stability of the real 2×2 flow around a fixed point.
pub fn stability(p: &OscillatorParams, b: Complex64, tol: f64) -> Result<Stability> {
    let residual = root_residual(p, b);
    if !(residual <= tol) {
        return Err(Error::NotAFixedPoint {
            re: b.re,
            im: b.im,
            residual,
        });
    }
    Ok(linearize(p, b))
}

/// Fixed-step integrator used for the deterministic flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

#[inline]
pub fn rk4_step(p: &OscillatorParams, b: Complex64, dt: f64) -> Complex64 {
    let k1 = eom_rotating_frame(p, b);
    let k2 = eom_rotating_frame(p, b + 0.5 * dt * k1);
    let k3 = eom_rotating_frame(p, b + 0.5 * dt * k2);
    let k4 = eom_rotating_frame(p, b + dt * k3);
    b + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[inline]
pub fn euler_step(p: &OscillatorParams, b: Complex64, dt: f64) -> Complex64 {
    b + dt * eom_rotating_frame(p, b)
}

impl Integrator {
    #[inline]
    pub fn step(self, p: &OscillatorParams, b: Complex64, dt: f64) -> Complex64 {
        match self {
            Integrator::Rk4 => rk4_step(p, b, dt),
            Integrator::Euler => euler_step(p, b, dt),
        }
    }
}

/// Sampled trajectory; `times[k]` pairs with `points[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Complex64>,
}

impl Trajectory {
    pub fn last(&self) -> Complex64 {
        *self.points.last().expect("non-empty trajectory")
    }
}

/// Number of whole steps of size `dt` covering `t_final` (rounded to nearest).
pub(crate) fn step_count(t_final: f64, dt: f64) -> usize {
    (t_final / dt).round().max(0.0) as usize
}

pub(crate) fn check_step(t_final: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: "must be finite and > 0".into(),
        });
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t_final",
            reason: "must be finite and ≥ 0".into(),
        });
    }
    Ok(())
}

/// Integrates from `a0` for `round(t_final/dt)` steps, keeping every
/// `stride`-th point (the initial and final points are always kept).
pub fn integrate_classical(
    p: &OscillatorParams,
    a0: PhasePoint,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<Trajectory> {
    integrate_with(p, a0, t_final, dt, stride, Integrator::Rk4)
}

pub fn integrate_with(
    p: &OscillatorParams,
    a0: PhasePoint,
    t_final: f64,
    dt: f64,
    stride: usize,
    integrator: Integrator,
) -> Result<Trajectory> {
    check_step(t_final, dt)?;
    let stride = stride.max(1);
    let steps = step_count(t_final, dt);
    let mut times = vec![0.0];
    let mut points = vec![a0];
    let mut b = a0;
    for k in 1..=steps {
        b = integrator.step(p, b, dt);
        if !(b.re.is_finite() && b.im.is_finite()) {
            return Err(Error::NonFinite { t: k as f64 * dt });
        }
        if k % stride == 0 || k == steps {
            times.push(k as f64 * dt);
            points.push(b);
        }
    }
    Ok(Trajectory { times, points })
}

/// Endpoint only, without storing samples.
pub fn integrate_endpoint(
    p: &OscillatorParams,
    a0: PhasePoint,
    t_final: f64,
    dt: f64,
    integrator: Integrator,
) -> Result<Complex64> {
    check_step(t_final, dt)?;
    let steps = step_count(t_final, dt);
    let mut b = a0;
    for k in 1..=steps {
        b = integrator.step(p, b, dt);
        if !(b.re.is_finite() && b.im.is_finite()) {
            return Err(Error::NonFinite { t: k as f64 * dt });
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyScan {
    pub nu_min: f64,
    pub nu_max: f64,
    pub n_points: usize,
}

impl Default for FrequencyScan {
    fn default() -> Self {
        Self {
            nu_min: 0.6,
            nu_max: 2.4,
            n_points: 181,
        }
    }
}

impl FrequencyScan {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_points.max(2);
        (0..n)
            .map(|k| self.nu_min + (self.nu_max - self.nu_min) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CriticalFrequencies {
    pub nu1: Option<f64>,
    pub nu2: Option<f64>,
    pub nu3_classical: Option<f64>,
}

pub const BISECTION_TOL: f64 = 1e-6;

fn bisect_count(base: &OscillatorParams, mut lo: f64, mut hi: f64) -> f64 {
    let c_lo = root_count(&base.with_nu(lo));
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if root_count(&base.with_nu(mid)) == c_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Locates the saddle-node frequencies ν1 (1→3 roots) and ν2 (3→1 roots)
/// inside the scan range. ν3 is left empty here; the basin module fills it.
pub fn critical_frequencies(
    base: &OscillatorParams,
    scan: &FrequencyScan,
) -> Result<CriticalFrequencies> {
    let grid = scan.grid();
    let counts: Vec<usize> = grid.iter().map(|&nu| root_count(&base.with_nu(nu))).collect();
    let mut out = CriticalFrequencies::default();
    for k in 0..grid.len() - 1 {
        if counts[k] == counts[k + 1] {
            continue;
        }
        let nu = bisect_count(base, grid[k], grid[k + 1]);
        if counts[k] < counts[k + 1] {
            out.nu1.get_or_insert(nu);
        } else {
            out.nu2 = Some(nu);
        }
    }
    if out.nu1.is_none() && out.nu2.is_none() {
        return Err(Error::NotBracketed {
            nu_min: scan.nu_min,
            nu_max: scan.nu_max,
        });
    }
    Ok(out)
}

/// For a single-root (monostable) parameter set, whether that root continues
/// the large-amplitude (outer) branch. The fold actions solve
/// `3g²x² + 4Δω·g·x + Δω² + γ²/4 = 0`; with no real fold the single root is
/// the resonant branch, otherwise it is outer when above the fold midpoint.
pub fn monostable_root_is_outer(p: &OscillatorParams, action: f64) -> bool {
    let d = p.detuning();
    let hg = 0.5 * p.gamma;
    if p.g == 0.0 || d * d < 3.0 * hg * hg {
        return true;
    }
    action >= -2.0 * d / (3.0 * p.g)
}
