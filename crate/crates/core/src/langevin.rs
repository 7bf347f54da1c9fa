//! Truncated-Wigner (pseudo-classical) dynamics.
//!
//! Dropping the third-order derivative term of the Wigner-function equation
//! leaves a Fokker–Planck equation, sampled here through the Langevin
//! equation
//!
//! ```text
//! i·ȧ = ∂H/∂a* − i(γ/2)a + √(γ(2n̄+1)/4)·ξ(t),   ⟨ξ*(t)ξ(t')⟩ = 2δ(t−t')
//! ```
//!
//! integrated with Euler–Maruyama in the rotating frame. The noise increment
//! per step is `D·√dt·(η₁ + iη₂)` with `D = √(γ(2n̄+1)/4)`, so its variance is
//! `γ(2n̄+1)/2 · dt` and the undriven stationary action is `n̄ + ½`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basins::{
    bistable_roots, reduce_blocks, sample_steps, ActionSeries, Attractors, BasinLabel,
    CircleEnsemble, Horizon, Moments, BLOCK,
};
use crate::classical::{check_step, euler_step, step_count, Integrator};
use crate::error::{Error, Result};
use crate::params::OscillatorParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    Circle(CircleEnsemble),
    Point { re: f64, im: f64 },
}

impl InitialCondition {
    fn amplitude(&self, index: usize, n_traj: usize) -> Complex64 {
        match *self {
            InitialCondition::Circle(c) => {
                let theta = 2.0 * std::f64::consts::PI * index as f64 / n_traj as f64;
                Complex64::from_polar(c.a0, theta)
            }
            InitialCondition::Point { re, im } => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinConfig {
    pub dt: f64,
    pub n_traj: usize,
    /// Thermal occupation of the bath.
    pub nbar: f64,
    pub seed: u64,
    pub initial: InitialCondition,
    /// Switches the stochastic term off (deterministic Euler limit).
    pub noise: bool,
}

impl LangevinConfig {
    /// dt = T/200, noise on, zero temperature.
    pub fn new(p: &OscillatorParams, n_traj: usize, seed: u64, initial: InitialCondition) -> Self {
        Self {
            dt: p.period() / 200.0,
            n_traj,
            nbar: 0.0,
            seed,
            initial,
            noise: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be finite and > 0".into(),
            });
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter {
                name: "n_traj",
                reason: "must be ≥ 1".into(),
            });
        }
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "nbar",
                reason: "must be finite and ≥ 0".into(),
            });
        }
        Ok(())
    }

    /// `D = √(γ(2n̄+1)/4)`, zero when noise is switched off.
    pub fn noise_amplitude(&self, p: &OscillatorParams) -> f64 {
        if self.noise {
            (p.gamma * (2.0 * self.nbar + 1.0) / 4.0).sqrt()
        } else {
            0.0
        }
    }
}

/// Independent random stream for one trajectory: the ChaCha block counter
/// is keyed by `seed` and the stream id by the trajectory index.
pub fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// One Euler–Maruyama step with noise amplitude `d` (see module docs).
#[inline]
pub fn langevin_step<R: Rng + ?Sized>(
    p: &OscillatorParams,
    a: Complex64,
    dt: f64,
    d: f64,
    rng: &mut R,
) -> Complex64 {
    let det = euler_step(p, a, dt);
    if d == 0.0 {
        return det;
    }
    let eta1: f64 = rng.sample(StandardNormal);
    let eta2: f64 = rng.sample(StandardNormal);
    // i·da = … + D·dξ  ⇒  da = … − i·D·dξ
    det - Complex64::i() * (d * dt.sqrt()) * Complex64::new(eta1, eta2)
}

fn finite(a: Complex64) -> bool {
    a.re.is_finite() && a.im.is_finite()
}

/// Ensemble mean action `⟨|a|²⟩` with standard errors, sampled every
/// `stride` steps.
pub fn run_ensemble(
    p: &OscillatorParams,
    cfg: &LangevinConfig,
    t_final: f64,
    stride: usize,
) -> Result<ActionSeries> {
    cfg.validate()?;
    check_step(t_final, cfg.dt)?;
    let steps = step_count(t_final, cfg.dt);
    let samples = sample_steps(steps, stride);
    let d = cfg.noise_amplitude(p);
    let dt = cfg.dt;
    let idx: Vec<usize> = (0..cfg.n_traj).collect();
    let blocks: Vec<Result<Vec<Moments>>> = idx
        .par_chunks(BLOCK)
        .map(|chunk| {
            let mut acc = vec![Moments::default(); samples.len()];
            for &j in chunk {
                let mut rng = trajectory_rng(cfg.seed, j);
                let mut a = cfg.initial.amplitude(j, cfg.n_traj);
                let mut next = 0;
                for k in 0..=steps {
                    if k > 0 {
                        a = langevin_step(p, a, dt, d, &mut rng);
                        if !finite(a) {
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
    let m = reduce_blocks(blocks, samples.len());
    Ok(ActionSeries {
        times: samples.iter().map(|&k| k as f64 * dt).collect(),
        values: m.iter().map(|x| x.mean).collect(),
        stderr: m.iter().map(|x| x.stderr()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attractor {
    Inner,
    Outer,
}

impl Attractor {
    fn label(self) -> BasinLabel {
        match self {
            Attractor::Inner => BasinLabel::Inner,
            Attractor::Outer => BasinLabel::Outer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeConfig {
    pub start: Attractor,
    /// Time between basin-membership checks.
    pub check_interval: f64,
    /// Leading interval excluded from the exponential fit.
    pub fit_skip: f64,
    /// Escapes required for a rate estimate.
    pub min_events: usize,
}

impl EscapeConfig {
    /// Checks every T_γ/4, skip the first T_γ in the fit, need 50 escapes.
    pub fn new(p: &OscillatorParams, start: Attractor) -> Self {
        let tg = p.relaxation_period();
        Self {
            start,
            check_interval: 0.25 * tg,
            fit_skip: tg,
            min_events: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeStatistics {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub escapes: usize,
    /// Fitted exponential escape rate (1/time).
    pub rate: f64,
}

/// Least-squares slope of `ln S(t)` for `t ≥ skip`, returned as a positive rate.
pub fn fit_escape_rate(times: &[f64], survival: &[f64], skip: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(survival)
        .filter(|(t, s)| **t >= skip && **s > 0.0)
        .map(|(t, s)| (*t, s.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Survival of trajectories started on one attractor, without any
/// requirement on the number of escapes (`rate` is `NaN` when no fit is
/// possible).
///
/// At each check a trajectory that has left the start root's classification
/// disc is copied and relaxed without noise for up to 5·T_γ; if the copy
/// ends at the other attractor the trajectory is counted as escaped at that
/// check time and is not followed further.
pub fn survival_curve(
    p: &OscillatorParams,
    cfg: &LangevinConfig,
    esc: &EscapeConfig,
    t_final: f64,
) -> Result<EscapeStatistics> {
    cfg.validate()?;
    check_step(t_final, cfg.dt)?;
    let set = bistable_roots(p)?;
    let att = Attractors::from_roots(&set);
    let start = match esc.start {
        Attractor::Inner => set.inner().b,
        Attractor::Outer => set.outer().b,
    };
    let home = esc.start.label();
    let dt = cfg.dt;
    let d = cfg.noise_amplitude(p);
    let steps = step_count(t_final, dt);
    let check = ((esc.check_interval / dt).round() as usize).max(1);
    let n_checks = steps / check;
    let probe = Horizon {
        t_horizon: 5.0 * p.relaxation_period(),
        dt: p.period() / 100.0,
        check_every: 10,
    };

    // per trajectory: index of the check at which it escaped
    let escaped_at: Vec<Result<Option<usize>>> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|j| {
            let mut rng = trajectory_rng(cfg.seed, j);
            let mut a = start;
            for c in 0..n_checks {
                for k in 0..check {
                    a = langevin_step(p, a, dt, d, &mut rng);
                    if !finite(a) {
                        return Err(Error::NonFinite {
                            t: ((c * check + k + 1) as f64) * dt,
                        });
                    }
                }
                if att.classify(a) == home {
                    continue;
                }
                let fate = att.relax(p, a, &probe, Integrator::Rk4);
                if fate != home && fate != BasinLabel::Unresolved {
                    return Ok(Some(c));
                }
            }
            Ok(None)
        })
        .collect();
    let escaped_at = escaped_at.into_iter().collect::<Result<Vec<_>>>()?;

    let mut counts = vec![0usize; n_checks];
    for c in escaped_at.iter().flatten() {
        counts[*c] += 1;
    }
    let n = cfg.n_traj as f64;
    let mut alive = cfg.n_traj;
    let mut times = vec![0.0];
    let mut survival = vec![1.0];
    for (c, k) in counts.iter().enumerate() {
        alive -= k;
        times.push(((c + 1) * check) as f64 * dt);
        survival.push(alive as f64 / n);
    }
    let rate = fit_escape_rate(&times, &survival, esc.fit_skip).unwrap_or(f64::NAN);
    Ok(EscapeStatistics {
        times,
        survival,
        escapes: cfg.n_traj - alive,
        rate,
    })
}

/// Survival curve plus a fitted escape rate; fails with
/// `InsufficientEvents` (carrying an upper bound on the rate) when fewer
/// than `esc.min_events` trajectories escaped.
pub fn escape_statistics(
    p: &OscillatorParams,
    cfg: &LangevinConfig,
    esc: &EscapeConfig,
    t_final: f64,
) -> Result<EscapeStatistics> {
    let s = survival_curve(p, cfg, esc, t_final)?;
    if s.escapes < esc.min_events || !s.rate.is_finite() {
        // roughly a 95% Poisson bound: (k + 3) events over the exposure
        let exposure = cfg.n_traj as f64 * s.times.last().copied().unwrap_or(0.0).max(cfg.dt);
        return Err(Error::InsufficientEvents {
            escapes: s.escapes,
            required: esc.min_events,
            rate_upper_bound: (s.escapes as f64 + 3.0) / exposure,
        });
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basins::ensemble_mean_action_with;

    fn standard(nu: f64) -> OscillatorParams {
        OscillatorParams::standard(nu)
    }

    #[test]
    fn zero_gamma_is_deterministic_euler() {
        let p = OscillatorParams {
            gamma: 0.0,
            ..standard(1.2)
        };
        let cfg = LangevinConfig::new(&p, 1, 7, InitialCondition::Point { re: 1.0, im: 0.5 });
        let mut rng = trajectory_rng(7, 0);
        let a = Complex64::new(1.0, 0.5);
        let step = langevin_step(&p, a, cfg.dt, cfg.noise_amplitude(&p), &mut rng);
        assert_eq!(step, euler_step(&p, a, cfg.dt));
    }

    #[test]
    fn same_seed_same_series() {
        let p = standard(1.3);
        let init = InitialCondition::Circle(CircleEnsemble {
            a0: 2.0,
            n_particles: 300,
        });
        let cfg = LangevinConfig::new(&p, 300, 11, init);
        let a = run_ensemble(&p, &cfg, 50.0, 20).unwrap();
        let b = run_ensemble(&p, &cfg, 50.0, 20).unwrap();
        assert_eq!(a, b);
        let c = run_ensemble(&p, &LangevinConfig { seed: 12, ..cfg }, 50.0, 20).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = standard(1.3);
        let init = InitialCondition::Point { re: 0.5, im: 0.0 };
        let cfg = LangevinConfig::new(&p, 700, 5, init);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| run_ensemble(&p, &cfg, 20.0, 10).unwrap());
        let b = three.install(|| run_ensemble(&p, &cfg, 20.0, 10).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn noise_off_matches_classical_ensemble() {
        let p = standard(1.2);
        let ens = CircleEnsemble {
            a0: 3.0,
            n_particles: 500,
        };
        let mut cfg = LangevinConfig::new(&p, 500, 1, InitialCondition::Circle(ens));
        cfg.noise = false;
        let a = run_ensemble(&p, &cfg, 100.0, 25).unwrap();
        let b = ensemble_mean_action_with(&p, &ens, 100.0, cfg.dt, 25, Integrator::Euler).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn ornstein_uhlenbeck_relaxation() {
        // g = ε = 0: I(t) = (I0 − (n̄+½))e^{−γt} + n̄ + ½
        let p = OscillatorParams {
            g: 0.0,
            epsilon: 0.0,
            ..standard(1.2)
        };
        let init = InitialCondition::Circle(CircleEnsemble {
            a0: 2.0,
            n_particles: 4000,
        });
        let cfg = LangevinConfig::new(&p, 4000, 3, init);
        let s = run_ensemble(&p, &cfg, 100.0, 400).unwrap();
        assert_eq!(s.values[0], 4.0);
        for ((t, v), e) in s.times.iter().zip(&s.values).zip(&s.stderr) {
            let expect = 3.5 * (-p.gamma * t).exp() + 0.5;
            // Euler–Maruyama bias is O(γ·dt) relative, far below the noise here
            assert!((v - expect).abs() < 4.0 * e.max(1e-12) + 1e-2, "t={t}: {v} vs {expect}");
        }
    }

    #[test]
    fn no_noise_no_escape() {
        let p = standard(1.5);
        let mut cfg = LangevinConfig::new(&p, 20, 1, InitialCondition::Point { re: 0.0, im: 0.0 });
        cfg.noise = false;
        let esc = EscapeConfig::new(&p, Attractor::Outer);
        let s = survival_curve(&p, &cfg, &esc, 2.0 * p.relaxation_period()).unwrap();
        assert!(s.survival.iter().all(|&x| x == 1.0));
        let err = escape_statistics(&p, &cfg, &esc, 2.0 * p.relaxation_period()).unwrap_err();
        assert!(matches!(err, Error::InsufficientEvents { escapes: 0, .. }));
    }

    #[test]
    fn fit_recovers_exponential() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 10.0).collect();
        let s: Vec<f64> = t.iter().map(|x| (-0.003 * x).exp()).collect();
        let r = fit_escape_rate(&t, &s, 0.0).unwrap();
        assert!((r - 0.003).abs() < 1e-12);
    }
}
