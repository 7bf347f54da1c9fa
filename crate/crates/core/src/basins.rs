//! Attractor basins of the two limit cycles and classical ensemble averages.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{
    check_step, classification_radius, find_fixed_points, monostable_root_is_outer, step_count,
    CriticalFrequencies, FixedPointSet, FrequencyScan, Integrator, ROOT_TOL,
};
use crate::error::{Error, Result};
use crate::params::OscillatorParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasinLabel {
    Inner = 0,
    Outer = 1,
    Unresolved = 2,
}

/// Rectangle in the (Re a, Im a) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Bounds {
    pub fn square(half_width: f64) -> Self {
        Self {
            re_min: -half_width,
            re_max: half_width,
            im_min: -half_width,
            im_max: half_width,
        }
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self::square(10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bounds: Bounds,
    /// Pixels per side.
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            bounds: Bounds::default(),
            resolution: 400,
        }
    }
}

impl GridSpec {
    /// Center of pixel `(row, col)`; rows run along Im a, columns along Re a.
    pub fn pixel_center(&self, row: usize, col: usize) -> Complex64 {
        let b = &self.bounds;
        let n = self.resolution as f64;
        let re = b.re_min + (b.re_max - b.re_min) * (col as f64 + 0.5) / n;
        let im = b.im_min + (b.im_max - b.im_min) * (row as f64 + 0.5) / n;
        Complex64::new(re, im)
    }

    pub fn pixel_count(&self) -> usize {
        self.resolution * self.resolution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BasinFractions {
    pub outer: f64,
    pub inner: f64,
    pub unresolved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinMap {
    pub grid: GridSpec,
    /// Row-major, `resolution²` entries.
    pub labels: Vec<BasinLabel>,
    pub fractions: BasinFractions,
}

impl BasinMap {
    pub fn label(&self, row: usize, col: usize) -> BasinLabel {
        self.labels[row * self.grid.resolution + col]
    }

    /// Label of the pixel containing `a`, if inside the grid.
    pub fn label_at(&self, a: Complex64) -> Option<BasinLabel> {
        let b = &self.grid.bounds;
        let n = self.grid.resolution as f64;
        let col = ((a.re - b.re_min) / (b.re_max - b.re_min) * n).floor();
        let row = ((a.im - b.im_min) / (b.im_max - b.im_min) * n).floor();
        if col < 0.0 || row < 0.0 || col >= n || row >= n {
            return None;
        }
        Some(self.label(row as usize, col as usize))
    }
}

fn fractions_of(labels: &[BasinLabel]) -> BasinFractions {
    let n = labels.len() as f64;
    let (mut o, mut i) = (0usize, 0usize);
    for l in labels {
        match l {
            BasinLabel::Outer => o += 1,
            BasinLabel::Inner => i += 1,
            BasinLabel::Unresolved => {}
        }
    }
    let outer = o as f64 / n;
    let inner = i as f64 / n;
    BasinFractions {
        outer,
        inner,
        unresolved: 1.0 - outer - inner,
    }
}

/// Integration settings shared by the grid classifier and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Horizon {
    pub t_horizon: f64,
    pub dt: f64,
    /// Steps between proximity checks; `0` disables early termination.
    pub check_every: usize,
}

impl Horizon {
    /// 20·T_γ with dt = T/100 and a proximity check every 10 steps.
    pub fn default_for(p: &OscillatorParams) -> Self {
        Self {
            t_horizon: 20.0 * p.relaxation_period(),
            dt: p.period() / 100.0,
            check_every: 10,
        }
    }
}

/// Stable attractors with their classification radii.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Attractors {
    pub inner: Complex64,
    pub outer: Complex64,
    r_inner: f64,
    r_outer: f64,
}

impl Attractors {
    pub fn from_roots(set: &FixedPointSet) -> Self {
        let inner = set.inner().b;
        let outer = set.outer().b;
        Self {
            inner,
            outer,
            r_inner: classification_radius(inner),
            r_outer: classification_radius(outer),
        }
    }

    #[inline]
    pub fn classify(&self, a: Complex64) -> BasinLabel {
        let d_out = (a - self.outer).norm();
        let d_in = (a - self.inner).norm();
        let hit_out = d_out < self.r_outer;
        let hit_in = d_in < self.r_inner;
        match (hit_out, hit_in) {
            (true, true) => {
                if d_out <= d_in {
                    BasinLabel::Outer
                } else {
                    BasinLabel::Inner
                }
            }
            (true, false) => BasinLabel::Outer,
            (false, true) => BasinLabel::Inner,
            (false, false) => BasinLabel::Unresolved,
        }
    }

    /// Integrates deterministically until the point lands in a
    /// classification disc (checked every `check_every` steps) or the
    /// horizon is reached.
    pub fn relax(
        &self,
        p: &OscillatorParams,
        a0: Complex64,
        h: &Horizon,
        integrator: Integrator,
    ) -> BasinLabel {
        let steps = step_count(h.t_horizon, h.dt);
        let mut a = a0;
        for k in 1..=steps {
            a = integrator.step(p, a, h.dt);
            if !(a.re.is_finite() && a.im.is_finite()) {
                return BasinLabel::Unresolved;
            }
            if h.check_every > 0 && k % h.check_every == 0 {
                let l = self.classify(a);
                if l != BasinLabel::Unresolved {
                    return l;
                }
            }
        }
        self.classify(a)
    }
}

pub(crate) fn bistable_roots(p: &OscillatorParams) -> Result<FixedPointSet> {
    let set = find_fixed_points(p, ROOT_TOL)?;
    if !set.is_bistable() {
        return Err(Error::NotBistable {
            nu: p.nu,
            count: set.count(),
        });
    }
    Ok(set)
}

/// Labels every pixel center by the attractor it relaxes to.
pub fn classify_grid(p: &OscillatorParams, grid: &GridSpec, h: &Horizon) -> Result<BasinMap> {
    check_step(h.t_horizon, h.dt)?;
    if grid.resolution == 0 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            reason: "must be ≥ 1".into(),
        });
    }
    let set = bistable_roots(p)?;
    let att = Attractors::from_roots(&set);
    let n = grid.resolution;
    let labels: Vec<BasinLabel> = (0..grid.pixel_count())
        .into_par_iter()
        .map(|idx| {
            let a0 = grid.pixel_center(idx / n, idx % n);
            att.relax(p, a0, h, Integrator::Rk4)
        })
        .collect();
    let fractions = fractions_of(&labels);
    Ok(BasinMap {
        grid: *grid,
        labels,
        fractions,
    })
}

/// Basin fractions at one frequency; monostable points get fraction 1 for
/// whichever branch the single root continues.
pub fn basin_fractions_at(
    p: &OscillatorParams,
    grid: &GridSpec,
    h: &Horizon,
) -> Result<BasinFractions> {
    let set = find_fixed_points(p, ROOT_TOL)?;
    if set.count() == 1 {
        let outer = monostable_root_is_outer(p, set.roots[0].action);
        return Ok(BasinFractions {
            outer: if outer { 1.0 } else { 0.0 },
            inner: if outer { 0.0 } else { 1.0 },
            unresolved: 0.0,
        });
    }
    Ok(classify_grid(p, grid, h)?.fractions)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub nu: f64,
    pub fractions: BasinFractions,
}

/// Basin fractions over a list of drive frequencies. The horizon is
/// recomputed per frequency only through `h` (it does not depend on ν).
pub fn basin_fraction_sweep(
    base: &OscillatorParams,
    nus: &[f64],
    grid: &GridSpec,
    h: &Horizon,
) -> Result<Vec<SweepPoint>> {
    nus.iter()
        .map(|&nu| {
            let p = base.with_nu(nu);
            let fractions = match basin_fractions_at(&p, grid, h) {
                Err(Error::DegenerateRoots { .. }) => {
                    // exactly at a fold: treat as the monostable edge
                    let shifted = p.with_nu(nu + 1e-4 * nu.signum());
                    basin_fractions_at(&shifted, grid, h)?
                }
                r => r?,
            };
            Ok(SweepPoint { nu, fractions })
        })
        .collect()
}

/// Frequency where the outer basin fraction crosses 1/2, refined by bisection
/// between `lo` and `hi` (outer fraction must be ≥ 1/2 at `lo`, < 1/2 at `hi`).
pub fn equal_basin_frequency(
    base: &OscillatorParams,
    mut lo: f64,
    mut hi: f64,
    grid: &GridSpec,
    h: &Horizon,
    nu_tol: f64,
) -> Result<f64> {
    let f = |nu: f64| basin_fractions_at(&base.with_nu(nu), grid, h).map(|f| f.outer - 0.5);
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if !(f_lo >= 0.0 && f_hi < 0.0) {
        return Err(Error::NotBracketed {
            nu_min: lo,
            nu_max: hi,
        });
    }
    while hi - lo > nu_tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bracket of the 1/2 crossing from a sweep, if any.
pub fn crossing_bracket(sweep: &[SweepPoint]) -> Option<(f64, f64)> {
    sweep
        .windows(2)
        .find(|w| w[0].fractions.outer >= 0.5 && w[1].fractions.outer < 0.5)
        .map(|w| (w[0].nu, w[1].nu))
}

/// Saddle-node frequencies plus the equal-basin frequency.
pub fn critical_frequencies_with_basins(
    base: &OscillatorParams,
    scan: &FrequencyScan,
    grid: &GridSpec,
    h: &Horizon,
    nu_tol: f64,
) -> Result<CriticalFrequencies> {
    let mut cf = crate::classical::critical_frequencies(base, scan)?;
    if let (Some(nu1), Some(nu2)) = (cf.nu1, cf.nu2) {
        // coarse sweep strictly inside the window, then bisection
        let n = 12;
        let nus: Vec<f64> = (0..=n)
            .map(|k| nu1 + (nu2 - nu1) * (k as f64 + 0.5) / (n as f64 + 1.0))
            .collect();
        let sweep = basin_fraction_sweep(base, &nus, grid, h)?;
        if let Some((lo, hi)) = crossing_bracket(&sweep) {
            cf.nu3_classical = Some(equal_basin_frequency(base, lo, hi, grid, h, nu_tol)?);
        }
    }
    Ok(cf)
}

/// Particles uniformly spread in phase on a circle of radius `a0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleEnsemble {
    pub a0: f64,
    pub n_particles: usize,
}

impl CircleEnsemble {
    /// Phases θ_k = 2πk/n (a deterministic grid, not random draws).
    pub fn points(&self) -> Vec<Complex64> {
        let n = self.n_particles;
        (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex64::from_polar(self.a0, theta)
            })
            .collect()
    }
}

/// Mean action `I(t)` sampled at `times` (physical time).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Standard error of each sample; empty for noiseless ensembles.
    pub stderr: Vec<f64>,
}

/// Running mean and sum of squared deviations, merged with Chan's formula.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Moments {
    pub count: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0.0 {
            return *other;
        }
        if other.count == 0.0 {
            return *self;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        Moments {
            count: n,
            mean: self.mean + d * other.count / n,
            m2: self.m2 + other.m2 + d * d * self.count * other.count / n,
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.count - 1.0) / self.count).sqrt()
    }
}

/// Trajectories per block; blocks are reduced in index order so results do
/// not depend on the worker count.
pub(crate) const BLOCK: usize = 256;

/// Merges per-block moment series in block order.
pub(crate) fn reduce_blocks(blocks: Vec<Vec<Moments>>, samples: usize) -> Vec<Moments> {
    blocks
        .into_iter()
        .fold(vec![Moments::default(); samples], |acc, b| {
            acc.iter().zip(&b).map(|(x, y)| x.merge(y)).collect()
        })
}

/// Sample instants for `steps` steps of `dt` with the given stride (the
/// final step is always included).
pub(crate) fn sample_steps(steps: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut v: Vec<usize> = (0..=steps).step_by(stride).collect();
    if *v.last().unwrap() != steps {
        v.push(steps);
    }
    v
}

/// Noise-free mean action of a circle ensemble.
pub fn ensemble_mean_action(
    p: &OscillatorParams,
    ens: &CircleEnsemble,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<ActionSeries> {
    ensemble_mean_action_with(p, ens, t_final, dt, stride, Integrator::Rk4)
}

pub fn ensemble_mean_action_with(
    p: &OscillatorParams,
    ens: &CircleEnsemble,
    t_final: f64,
    dt: f64,
    stride: usize,
    integrator: Integrator,
) -> Result<ActionSeries> {
    check_step(t_final, dt)?;
    if ens.n_particles == 0 {
        return Err(Error::InvalidParameter {
            name: "n_particles",
            reason: "must be ≥ 1".into(),
        });
    }
    let steps = step_count(t_final, dt);
    let samples = sample_steps(steps, stride);
    let points = ens.points();
    let blocks: Vec<Result<Vec<Moments>>> = points
        .par_chunks(BLOCK)
        .map(|chunk| {
            let mut acc = vec![Moments::default(); samples.len()];
            for &a0 in chunk {
                let mut a = a0;
                let mut next = 0;
                for k in 0..=steps {
                    if k > 0 {
                        a = integrator.step(p, a, dt);
                        if !(a.re.is_finite() && a.im.is_finite()) {
                            return Err(Error::NonFinite { t: k as f64 * dt });
                        }
                    }
                    if samples[next] == k {
                        acc[next].push(a.norm_sqr());
                        next += 1;
                        if next == samples.len() {
                            break;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    let moments = reduce_blocks(blocks, samples.len());
    Ok(ActionSeries {
        times: samples.iter().map(|&k| k as f64 * dt).collect(),
        values: moments.iter().map(|m| m.mean).collect(),
        stderr: Vec::new(),
    })
}

/// Fraction of the circle's particles that relax to the outer attractor.
pub fn circle_outer_weight(
    p: &OscillatorParams,
    ens: &CircleEnsemble,
    h: &Horizon,
) -> Result<f64> {
    let set = bistable_roots(p)?;
    let att = Attractors::from_roots(&set);
    let outer = ens
        .points()
        .par_iter()
        .filter(|&&a0| att.relax(p, a0, h, Integrator::Rk4) == BasinLabel::Outer)
        .count();
    Ok(outer as f64 / ens.n_particles as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn standard(nu: f64) -> OscillatorParams {
        OscillatorParams::standard(nu)
    }

    fn small_grid(res: usize) -> GridSpec {
        GridSpec {
            bounds: Bounds::default(),
            resolution: res,
        }
    }

    #[test]
    fn fractions_sum_to_one() {
        let p = standard(1.2);
        let map = classify_grid(&p, &small_grid(24), &Horizon::default_for(&p)).unwrap();
        let f = map.fractions;
        assert_eq!(map.labels.len(), 24 * 24);
        assert!((f.outer + f.inner + f.unresolved - 1.0).abs() < 1e-12);
        assert!(f.unresolved < 0.01);
        assert!(f.outer > f.inner);
    }

    #[test]
    fn early_exit_matches_full_horizon() {
        let p = standard(1.3);
        let grid = small_grid(16);
        let h = Horizon::default_for(&p);
        let full = Horizon {
            check_every: 0,
            ..h
        };
        let a = classify_grid(&p, &grid, &h).unwrap();
        let b = classify_grid(&p, &grid, &full).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn roots_lie_in_own_basins() {
        let p = standard(1.4);
        let map = classify_grid(&p, &small_grid(40), &Horizon::default_for(&p)).unwrap();
        let set = find_fixed_points(&p, ROOT_TOL).unwrap();
        // the roots themselves classify trivially; check pixel labels too
        assert_eq!(map.label_at(set.outer().b), Some(BasinLabel::Outer));
        assert_eq!(map.label_at(set.inner().b), Some(BasinLabel::Inner));
    }

    #[test]
    fn not_bistable_outside_window() {
        let p = standard(1.0);
        let err = classify_grid(&p, &small_grid(4), &Horizon::default_for(&p)).unwrap_err();
        assert!(matches!(err, Error::NotBistable { count: 1, .. }));
    }

    #[test]
    fn sweep_edges() {
        let p = standard(1.0);
        let h = Horizon::default_for(&p);
        let s = basin_fraction_sweep(&p, &[1.0, 2.35], &small_grid(4), &h).unwrap();
        assert_eq!(s[0].fractions.outer, 1.0);
        assert_eq!(s[1].fractions.outer, 0.0);
        assert_eq!(s[1].fractions.inner, 1.0);
    }

    #[test]
    fn circle_points_on_radius() {
        let ens = CircleEnsemble {
            a0: 2.5,
            n_particles: 100,
        };
        for z in ens.points() {
            assert!((z.norm() - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_decay_of_action() {
        let p = OscillatorParams {
            g: 0.0,
            epsilon: 0.0,
            ..standard(1.2)
        };
        let ens = CircleEnsemble {
            a0: 2.0,
            n_particles: 100,
        };
        let s = ensemble_mean_action(&p, &ens, 200.0, p.period() / 100.0, 50).unwrap();
        assert_abs_diff_eq!(s.values[0], 4.0, epsilon = 1e-12);
        for (t, v) in s.times.iter().zip(&s.values) {
            assert_abs_diff_eq!(*v, 4.0 * (-p.gamma * t).exp(), epsilon = 1e-8);
        }
    }

    #[test]
    fn asymptote_is_basin_weighted_mixture() {
        let p = standard(1.2);
        let set = find_fixed_points(&p, ROOT_TOL).unwrap();
        let ens = CircleEnsemble {
            a0: set.outer().b.norm(),
            n_particles: 200,
        };
        let h = Horizon::default_for(&p);
        let w = circle_outer_weight(&p, &ens, &h).unwrap();
        let s = ensemble_mean_action(&p, &ens, 20.0 * p.relaxation_period(), h.dt, 1000).unwrap();
        let expect = w * set.outer().action + (1.0 - w) * set.inner().action;
        let last = *s.values.last().unwrap();
        assert!((last - expect).abs() < 1e-3 * expect, "{last} vs {expect}");
    }

    #[test]
    fn circle_inside_one_basin() {
        // a small circle around the outer root relaxes entirely onto it
        let p = standard(1.2);
        let set = find_fixed_points(&p, ROOT_TOL).unwrap();
        let b = set.outer().b;
        let h = Horizon::default_for(&p);
        let att = Attractors::from_roots(&set);
        let pts: Vec<Complex64> = (0..50)
            .map(|k| b + Complex64::from_polar(0.2, k as f64 * 0.125))
            .collect();
        let mean: f64 = pts
            .iter()
            .map(|&a0| {
                assert_eq!(att.relax(&p, a0, &h, Integrator::Rk4), BasinLabel::Outer);
                crate::classical::integrate_endpoint(&p, a0, h.t_horizon, h.dt, Integrator::Rk4)
                    .unwrap()
                    .norm_sqr()
            })
            .sum::<f64>()
            / pts.len() as f64;
        assert!((mean - set.outer().action).abs() < 2.0 * classification_radius(b) * b.norm());
    }

    #[test]
    fn moments_merge_is_exact() {
        let xs: Vec<f64> = (0..1000).map(|k| ((k * 37) % 101) as f64 * 0.1).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert_abs_diff_eq!(m.mean, all.mean, epsilon = 1e-12);
        assert_abs_diff_eq!(m.m2, all.m2, epsilon = 1e-8);
    }
}
