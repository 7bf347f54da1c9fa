//! Truncated Fock-basis master equation in the frame rotating with the drive.
//!
//! The rotating-frame Hamiltonian is time independent,
//! `H = Δω·n + (g/2)·n² + ε(a† + a)`, and single-photon decay at rate γ
//! enters through the dissipator `γ(a ρ a† − ½{a†a, ρ})`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigValsh, UPLO};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::OscillatorParams;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Tail population above which an evolution is aborted.
pub const TAIL_ABORT: f64 = 1e-6;

/// Ladder operators of an `N`-level truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperators {
    pub dim: usize,
    pub lowering: Array2<C64>,
    pub raising: Array2<C64>,
    pub number: Array2<C64>,
}

impl FockOperators {
    pub fn new(dim: usize) -> Self {
        let mut lowering = Array2::zeros((dim, dim));
        for n in 1..dim {
            lowering[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
        }
        let raising = lowering.t().mapv(|z| z.conj());
        let number = Array2::from_diag(&Array1::from_iter((0..dim).map(|n| C64::new(n as f64, 0.0))));
        Self {
            dim,
            lowering,
            raising,
            number,
        }
    }

    /// `[a, a†]`, equal to the identity except for the `(N−1, N−1)` corner.
    pub fn commutator(&self) -> Array2<C64> {
        self.lowering.dot(&self.raising) - self.raising.dot(&self.lowering)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidParameter {
            name: "dim",
            reason: "Fock truncation must be ≥ 2".into(),
        });
    }
    Ok(())
}

/// Diagonal energies `Δω·n + (g/2)·n²`.
pub(crate) fn level_energies(p: &OscillatorParams, dim: usize) -> Vec<f64> {
    let d = p.detuning();
    (0..dim)
        .map(|n| {
            let n = n as f64;
            d * n + 0.5 * p.g * n * n
        })
        .collect()
}

/// Rotating-frame Hamiltonian matrix.
pub fn build_hamiltonian_rotating(p: &OscillatorParams, dim: usize) -> Result<Array2<C64>> {
    check_dim(dim)?;
    let e = level_energies(p, dim);
    let mut h = Array2::zeros((dim, dim));
    for n in 0..dim {
        h[[n, n]] = C64::new(e[n], 0.0);
        if n + 1 < dim {
            let c = C64::new(p.epsilon * ((n + 1) as f64).sqrt(), 0.0);
            h[[n, n + 1]] = c;
            h[[n + 1, n]] = c;
        }
    }
    Ok(h)
}

/// Square-matrix density operator in the Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub Array2<C64>);

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `|n⟩⟨n|`.
    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        check_dim(dim)?;
        if n >= dim {
            return Err(Error::InvalidParameter {
                name: "n0",
                reason: format!("level {n} outside truncation {dim}"),
            });
        }
        let mut m = Array2::zeros((dim, dim));
        m[[n, n]] = C64::new(1.0, 0.0);
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(psi: &Array1<C64>) -> Self {
        let n = psi.len();
        Self(Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj()))
    }

    pub fn trace(&self) -> C64 {
        self.0.diag().sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.0;
        let n = m.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let herm = (&self.0 + &self.0.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let ev = herm.eigvalsh(UPLO::Lower)?;
        Ok(ev.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// Population of the highest retained level.
    pub fn tail(&self) -> f64 {
        let n = self.dim();
        self.0[[n - 1, n - 1]].re
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.diag().iter().map(|z| z.re).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Mean occupation `Tr[a†a ρ]`.
pub fn occupation(rho: &DensityMatrix) -> f64 {
    rho.0
        .diag()
        .iter()
        .enumerate()
        .map(|(n, z)| n as f64 * z.re)
        .sum()
}

/// Imaginary residue of `Tr[a†a ρ]`, which vanishes for Hermitian ρ.
pub fn occupation_imag(rho: &DensityMatrix) -> f64 {
    rho.0
        .diag()
        .iter()
        .enumerate()
        .map(|(n, z)| n as f64 * z.im)
        .sum()
}

/// Precomputed coefficients of the rotating-frame Lindbladian.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    dim: usize,
    energies: Vec<f64>,
    sqrt: Vec<f64>,
    epsilon: f64,
    gamma: f64,
}

impl Lindbladian {
    pub fn new(p: &OscillatorParams, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        p.validate()?;
        Ok(Self {
            dim,
            energies: level_energies(p, dim),
            sqrt: (0..=dim).map(|n| (n as f64).sqrt()).collect(),
            epsilon: p.epsilon,
            gamma: p.gamma,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes `L(ρ)` into `out`, exploiting the banded structure:
    /// the Hamiltonian is tridiagonal and `a ρ a†` shifts both indices.
    pub fn apply_into(&self, rho: &Array2<C64>, out: &mut Array2<C64>) {
        let n_dim = self.dim;
        let i = C64::i();
        let s = &self.sqrt;
        let eps = self.epsilon;
        let g = self.gamma;
        for n in 0..n_dim {
            for m in 0..n_dim {
                let r = rho[[n, m]];
                // (Hρ − ρH)_{nm}
                let mut comm = (self.energies[n] - self.energies[m]) * r;
                let mut hop = ZERO;
                if n + 1 < n_dim {
                    hop += s[n + 1] * rho[[n + 1, m]];
                }
                if n > 0 {
                    hop += s[n] * rho[[n - 1, m]];
                }
                if m > 0 {
                    hop -= s[m] * rho[[n, m - 1]];
                }
                if m + 1 < n_dim {
                    hop -= s[m + 1] * rho[[n, m + 1]];
                }
                comm += eps * hop;
                let mut d = -0.5 * g * (n + m) as f64 * r;
                if n + 1 < n_dim && m + 1 < n_dim {
                    d += g * s[n + 1] * s[m + 1] * rho[[n + 1, m + 1]];
                }
                out[[n, m]] = -i * comm + d;
            }
        }
    }

    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        self.apply_into(rho, &mut out);
        out
    }

    /// Upper bound on the spectral radius (Gershgorin), used to cap the
    /// explicit step size.
    pub fn spectral_bound(&self) -> f64 {
        let emax = self.energies.iter().cloned().fold(f64::MIN, f64::max);
        let emin = self.energies.iter().cloned().fold(f64::MAX, f64::min);
        let n = self.dim as f64;
        (emax - emin) + 4.0 * self.epsilon * n.sqrt() + 2.0 * self.gamma * n
    }
}

/// `dρ/dt` for the rotating-frame master equation.
pub fn lindblad_rhs(p: &OscillatorParams, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let l = Lindbladian::new(p, rho.dim())?;
    Ok(DensityMatrix(l.apply(&rho.0)))
}

/// Same derivative from explicit matrix products; slow, used as a cross-check.
pub fn lindblad_rhs_dense(p: &OscillatorParams, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let dim = rho.dim();
    let ops = FockOperators::new(dim);
    let h = build_hamiltonian_rotating(p, dim)?;
    let r = &rho.0;
    let i = C64::i();
    let comm = h.dot(r) - r.dot(&h);
    let jump = ops.lowering.dot(r).dot(&ops.raising);
    let anti = ops.number.dot(r) + r.dot(&ops.number);
    Ok(DensityMatrix(
        comm.mapv(|z| -i * z) + jump.mapv(|z| z * p.gamma) - anti.mapv(|z| z * 0.5 * p.gamma),
    ))
}

/// Samples of ρ(t) at `times` (physical time).
#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Evolution {
    pub fn occupations(&self) -> Vec<f64> {
        self.states.iter().map(occupation).collect()
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("non-empty evolution")
    }
}

/// Number of RK4 substeps per requested step so that
/// `substep · spectral bound ≤ 2` (inside the RK4 stability region).
pub(crate) fn substeps_for(dt: f64, bound: f64) -> usize {
    ((dt * bound / 2.0).ceil() as usize).max(1)
}

struct Rk4Work {
    k1: Array2<C64>,
    k2: Array2<C64>,
    k3: Array2<C64>,
    k4: Array2<C64>,
    tmp: Array2<C64>,
}

impl Rk4Work {
    fn new(dim: usize) -> Self {
        let z = || Array2::zeros((dim, dim));
        Self {
            k1: z(),
            k2: z(),
            k3: z(),
            k4: z(),
            tmp: z(),
        }
    }
}

fn rk4_matrix<F>(f: &F, rho: &mut Array2<C64>, h: f64, w: &mut Rk4Work)
where
    F: Fn(&Array2<C64>, &mut Array2<C64>),
{
    f(rho, &mut w.k1);
    ndarray::Zip::from(&mut w.tmp)
        .and(&*rho)
        .and(&w.k1)
        .for_each(|t, &r, &k| *t = r + 0.5 * h * k);
    f(&w.tmp, &mut w.k2);
    ndarray::Zip::from(&mut w.tmp)
        .and(&*rho)
        .and(&w.k2)
        .for_each(|t, &r, &k| *t = r + 0.5 * h * k);
    f(&w.tmp, &mut w.k3);
    ndarray::Zip::from(&mut w.tmp)
        .and(&*rho)
        .and(&w.k3)
        .for_each(|t, &r, &k| *t = r + h * k);
    f(&w.tmp, &mut w.k4);
    ndarray::Zip::from(&mut *rho)
        .and(&w.k1)
        .and(&w.k2)
        .and(&w.k3)
        .and(&w.k4)
        .for_each(|r, &a, &b, &c, &d| *r += h / 6.0 * (a + 2.0 * b + 2.0 * c + d));
}

/// Fixed-step RK4 integration of the master equation.
///
/// Each requested step `dt` is split into the smallest number of equal
/// substeps that keeps RK4 stable for the truncation's fastest coherences.
/// A sample is stored every `stride` steps (plus the initial and final state).
pub fn evolve_density_matrix(
    p: &OscillatorParams,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<Evolution> {
    evolve_density_matrix_with_limit(p, rho0, t_final, dt, stride, TAIL_ABORT)
}

/// As [`evolve_density_matrix`] with a caller-chosen bound on the top-level
/// population; `f64::INFINITY` disables the truncation guard.
pub fn evolve_density_matrix_with_limit(
    p: &OscillatorParams,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
    stride: usize,
    tail_limit: f64,
) -> Result<Evolution> {
    crate::classical::check_step(t_final, dt)?;
    let l = Lindbladian::new(p, rho0.dim())?;
    let sub = substeps_for(dt, l.spectral_bound());
    let h = dt / sub as f64;
    let steps = crate::classical::step_count(t_final, dt);
    let stride = stride.max(1);
    let mut rho = rho0.0.clone();
    let mut w = Rk4Work::new(rho0.dim());
    let f = |r: &Array2<C64>, out: &mut Array2<C64>| l.apply_into(r, out);
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    for k in 1..=steps {
        for _ in 0..sub {
            rk4_matrix(&f, &mut rho, h, &mut w);
        }
        if k % stride == 0 || k == steps {
            let t = k as f64 * dt;
            let snap = DensityMatrix(rho.clone());
            if !snap.is_finite() {
                return Err(Error::NonFinite { t });
            }
            let tail = snap.tail();
            if tail > tail_limit {
                return Err(Error::TruncationBreach {
                    dim: snap.dim(),
                    tail,
                    limit: tail_limit,
                });
            }
            times.push(t);
            states.push(snap);
        }
    }
    Ok(Evolution { times, states })
}

/// Integrates the lab-frame master equation with the explicit drive
/// `ε(e^{−iνt}a† + e^{iνt}a)` and returns `n(t)` at every `stride`-th step.
/// Only meant for small truncations (frame-invariance checks).
pub fn evolve_lab_frame_occupation(
    p: &OscillatorParams,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    crate::classical::check_step(t_final, dt)?;
    let dim = rho0.dim();
    let ops = FockOperators::new(dim);
    let diag: Vec<f64> = (0..dim)
        .map(|n| {
            let n = n as f64;
            p.omega * n + 0.5 * p.g * n * n
        })
        .collect();
    let i = C64::i();
    let rhs = |t: f64, r: &Array2<C64>| -> Array2<C64> {
        let phase = C64::from_polar(1.0, -p.nu * t);
        let mut h = ops.raising.mapv(|z| z * phase * p.epsilon)
            + ops.lowering.mapv(|z| z * phase.conj() * p.epsilon);
        for n in 0..dim {
            h[[n, n]] += diag[n];
        }
        let comm = h.dot(r) - r.dot(&h);
        let jump = ops.lowering.dot(r).dot(&ops.raising);
        let anti = ops.number.dot(r) + r.dot(&ops.number);
        comm.mapv(|z| -i * z) + jump.mapv(|z| z * p.gamma) - anti.mapv(|z| z * 0.5 * p.gamma)
    };
    let steps = crate::classical::step_count(t_final, dt);
    let mut r = rho0.0.clone();
    let mut times = vec![0.0];
    let mut ns = vec![occupation(rho0)];
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = rhs(t, &r);
        let k2 = rhs(t + 0.5 * dt, &(&r + &k1.mapv(|z| z * 0.5 * dt)));
        let k3 = rhs(t + 0.5 * dt, &(&r + &k2.mapv(|z| z * 0.5 * dt)));
        let k4 = rhs(t + dt, &(&r + &k3.mapv(|z| z * dt)));
        r = &r + &(k1 + k2.mapv(|z| 2.0 * z) + k3.mapv(|z| 2.0 * z) + k4).mapv(|z| z * dt / 6.0);
        if (k + 1) % stride.max(1) == 0 || k + 1 == steps {
            times.push((k + 1) as f64 * dt);
            ns.push(occupation(&DensityMatrix(r.clone())));
        }
    }
    Ok((times, ns))
}

/// Tail tolerance for coherent-state truncation.
pub const COHERENT_TAIL: f64 = 1e-10;

/// Truncated Glauber state `e^{−|α|²/2} Σ αⁿ/√n! |n⟩` (not renormalized).
pub fn coherent_state(alpha: C64, dim: usize) -> Result<Array1<C64>> {
    check_dim(dim)?;
    let v = coherent_coefficients(alpha, dim);
    let kept: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let tail = 1.0 - kept;
    if tail > COHERENT_TAIL {
        return Err(Error::TruncationBreach {
            dim,
            tail,
            limit: COHERENT_TAIL,
        });
    }
    Ok(v)
}

fn coherent_coefficients(alpha: C64, dim: usize) -> Array1<C64> {
    let mut v = Array1::zeros(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    v[0] = c;
    for n in 1..dim {
        c = c * alpha / (n as f64).sqrt();
        v[n] = c;
    }
    v
}

/// Rectangular grid of coherent-state labels α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub resolution: usize,
}

impl AlphaGrid {
    pub fn square(half_width: f64, resolution: usize) -> Self {
        Self {
            re_min: -half_width,
            re_max: half_width,
            im_min: -half_width,
            im_max: half_width,
            resolution,
        }
    }

    /// Grid node `(row, col)`; nodes include the bounds.
    pub fn node(&self, row: usize, col: usize) -> C64 {
        let n = (self.resolution.max(2) - 1) as f64;
        C64::new(
            self.re_min + (self.re_max - self.re_min) * col as f64 / n,
            self.im_min + (self.im_max - self.im_min) * row as f64 / n,
        )
    }

    fn max_abs_sqr(&self) -> f64 {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_min, self.im_max),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
        ]
        .iter()
        .map(|z| z.norm_sqr())
        .fold(0.0, f64::max)
    }
}

/// `Q(α) = ⟨α|ρ|α⟩` sampled on an [`AlphaGrid`], row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HusimiField {
    pub grid: AlphaGrid,
    pub values: Vec<f64>,
}

impl HusimiField {
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.grid.resolution + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Husimi function of ρ on the grid. Every grid corner must satisfy
/// `|α|² ≤ N − 1`, i.e. coherent states centred inside the truncation.
pub fn husimi(rho: &DensityMatrix, grid: &AlphaGrid) -> Result<HusimiField> {
    let dim = rho.dim();
    let reach = grid.max_abs_sqr();
    if reach > (dim - 1) as f64 {
        return Err(Error::TruncationBreach {
            dim,
            tail: reach,
            limit: (dim - 1) as f64,
        });
    }
    let n = grid.resolution;
    let values = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let alpha = grid.node(idx / n, idx % n);
            let c = coherent_coefficients(alpha, dim);
            let rc = rho.0.dot(&c);
            let q: C64 = c.iter().zip(rc.iter()).map(|(a, b)| a.conj() * b).sum();
            q.re.max(0.0)
        })
        .collect();
    Ok(HusimiField {
        grid: *grid,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn standard(nu: f64) -> OscillatorParams {
        OscillatorParams::standard(nu)
    }

    fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// Deterministic pseudo-random Hermitian, unit-trace test matrix.
    pub(crate) fn test_rho(dim: usize, seed: u64) -> DensityMatrix {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Array2::from_shape_fn((dim, dim), |_| C64::new(next(), next()));
        let m = a.dot(&a.t().mapv(|z| z.conj()));
        let tr = m.diag().sum();
        DensityMatrix(m.mapv(|z| z / tr))
    }

    #[test]
    fn ladder_operators() {
        let ops = FockOperators::new(6);
        assert_eq!(ops.raising, ops.lowering.t().mapv(|z| z.conj()));
        let c = ops.commutator();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j && i < 5 {
                    1.0
                } else if i == 5 && j == 5 {
                    -5.0
                } else {
                    0.0
                };
                assert_abs_diff_eq!(c[[i, j]].re, expect, epsilon = 1e-12);
                assert_abs_diff_eq!(c[[i, j]].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hamiltonian_structure() {
        let p = OscillatorParams {
            epsilon: 0.0,
            ..standard(1.2)
        };
        let h = build_hamiltonian_rotating(&p, 8).unwrap();
        for n in 0..8 {
            let x = n as f64;
            assert_abs_diff_eq!(h[[n, n]].re, -0.2 * x + 0.01 * x * x, epsilon = 1e-14);
        }
        assert!(h.iter().enumerate().all(|(k, z)| k % 9 == 0 || z.norm() == 0.0));
        let h2 = build_hamiltonian_rotating(&standard(1.2), 2).unwrap();
        assert_abs_diff_eq!(h2[[0, 1]].re, 0.16, epsilon = 1e-15);
        assert_abs_diff_eq!(h2[[1, 0]].re, 0.16, epsilon = 1e-15);
    }

    #[test]
    fn fock_expectation_matches_classical_energy() {
        // ⟨n0|H|n0⟩ = Δω·n0 + (g/2)·n0²; classical H at action I is the same
        // polynomial, so the two agree exactly at I = n0.
        let p = standard(1.3);
        let h = build_hamiltonian_rotating(&p, 30).unwrap();
        for n0 in [0usize, 5, 12] {
            let x = n0 as f64;
            let classical = p.detuning() * x + 0.5 * p.g * x * x;
            assert_abs_diff_eq!(h[[n0, n0]].re, classical, epsilon = 1e-12);
        }
    }

    #[test]
    fn structured_rhs_matches_dense() {
        let p = standard(1.2);
        for seed in 0..5 {
            let rho = test_rho(9, seed);
            let a = lindblad_rhs(&p, &rho).unwrap();
            let b = lindblad_rhs_dense(&p, &rho).unwrap();
            assert!(max_diff(&a.0, &b.0) < 1e-13);
        }
    }

    #[test]
    fn ground_state_is_stationary_without_drive() {
        let p = OscillatorParams {
            epsilon: 0.0,
            ..standard(1.2)
        };
        let d = lindblad_rhs(&p, &DensityMatrix::fock(10, 0).unwrap()).unwrap();
        assert!(d.0.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn first_level_decays_at_gamma() {
        let p = OscillatorParams {
            epsilon: 0.0,
            g: 0.37,
            ..standard(1.2)
        };
        let d = lindblad_rhs(&p, &DensityMatrix::fock(6, 1).unwrap()).unwrap();
        assert_abs_diff_eq!(occupation(&d), -p.gamma, epsilon = 1e-15);
    }

    #[test]
    fn rhs_traceless_and_hermitian() {
        let p = standard(1.4);
        for seed in 0..10 {
            let rho = test_rho(12, seed);
            let d = lindblad_rhs(&p, &rho).unwrap();
            assert!(d.trace().norm() < 1e-12);
            assert!(d.hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn pure_decay_cascade() {
        let p = OscillatorParams {
            epsilon: 0.0,
            ..standard(1.2)
        };
        let rho0 = DensityMatrix::fock(16, 10).unwrap();
        let ev = evolve_density_matrix(&p, &rho0, 100.0, p.period() / 200.0, 50).unwrap();
        for (t, rho) in ev.times.iter().zip(&ev.states) {
            assert!((occupation(rho) - 10.0 * (-p.gamma * t).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn vacuum_stays_put() {
        let p = OscillatorParams {
            epsilon: 0.0,
            ..standard(1.2)
        };
        let rho0 = DensityMatrix::fock(8, 0).unwrap();
        let ev = evolve_density_matrix(&p, &rho0, 50.0, p.period() / 200.0, 10).unwrap();
        for rho in &ev.states {
            assert_eq!(rho, &rho0);
        }
    }

    #[test]
    fn truncation_breach_is_reported() {
        let p = standard(1.6);
        // outer action ≈ 31 does not fit in 12 levels
        let rho0 = DensityMatrix::fock(12, 10).unwrap();
        let err = evolve_density_matrix(&p, &rho0, 200.0, p.period() / 200.0, 10).unwrap_err();
        assert!(matches!(err, Error::TruncationBreach { .. }));
    }

    #[test]
    fn substeps_cover_stiff_coherences() {
        let l = Lindbladian::new(&standard(1.2), 120).unwrap();
        let dt = standard(1.2).period() / 200.0;
        let sub = substeps_for(dt, l.spectral_bound());
        assert!(sub >= 2);
        assert!(dt / sub as f64 * l.spectral_bound() <= 2.0);
    }

    #[test]
    fn occupation_basics() {
        assert_eq!(occupation(&DensityMatrix::fock(8, 0).unwrap()), 0.0);
        assert_eq!(occupation(&DensityMatrix::fock(8, 5).unwrap()), 5.0);
        let alpha = C64::new(1.5, -0.8);
        let rho = DensityMatrix::pure(&coherent_state(alpha, 40).unwrap());
        assert_abs_diff_eq!(occupation(&rho), alpha.norm_sqr(), epsilon = 1e-9);
        assert!(occupation_imag(&rho).abs() < 1e-10);
    }

    #[test]
    fn coherent_states() {
        let v0 = coherent_state(C64::new(0.0, 0.0), 10).unwrap();
        assert_eq!(v0[0], C64::new(1.0, 0.0));
        assert!(v0.iter().skip(1).all(|z| z.norm() == 0.0));

        let v = coherent_state(C64::new(2.0, 0.0), 40).unwrap();
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-10);

        let alpha = C64::new(1.2, 0.7);
        let v = coherent_state(alpha, 40).unwrap();
        let ops = FockOperators::new(40);
        let av = ops.lowering.dot(&v);
        let mean: C64 = v.iter().zip(av.iter()).map(|(x, y)| x.conj() * y).sum();
        assert!((mean - alpha).norm() < 1e-8);

        let err = coherent_state(C64::new(4.0, 0.0), 20).unwrap_err();
        assert!(matches!(err, Error::TruncationBreach { .. }));
    }

    #[test]
    fn husimi_of_vacuum_and_coherent_state() {
        let grid = AlphaGrid::square(3.0, 13);
        let q = husimi(&DensityMatrix::fock(40, 0).unwrap(), &grid).unwrap();
        for r in 0..13 {
            for c in 0..13 {
                let a = grid.node(r, c);
                assert_abs_diff_eq!(q.value(r, c), (-a.norm_sqr()).exp(), epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(q.value(6, 6), 1.0, epsilon = 1e-12);

        let beta = C64::new(1.0, -0.5);
        let rho = DensityMatrix::pure(&coherent_state(beta, 40).unwrap());
        let q = husimi(&rho, &grid).unwrap();
        for r in 0..13 {
            for c in 0..13 {
                let a = grid.node(r, c);
                assert_abs_diff_eq!(q.value(r, c), (-(a - beta).norm_sqr()).exp(), epsilon = 1e-9);
                assert!(q.value(r, c) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn husimi_grid_outside_truncation() {
        let err = husimi(&DensityMatrix::fock(20, 0).unwrap(), &AlphaGrid::square(5.0, 5)).unwrap_err();
        assert!(matches!(err, Error::TruncationBreach { .. }));
    }

    #[test]
    fn frame_invariance_of_occupation() {
        let p = standard(1.2);
        let rho0 = DensityMatrix::fock(10, 2).unwrap();
        let dt = p.period() / 400.0;
        let t = 5.0 * p.period();
        // same truncated model in both frames, so the guard is irrelevant
        let rot = evolve_density_matrix_with_limit(&p, &rho0, t, dt, 40, f64::INFINITY).unwrap();
        let (_, lab) = evolve_lab_frame_occupation(&p, &rho0, t, dt, 40).unwrap();
        assert_eq!(rot.states.len(), lab.len());
        for (a, b) in rot.occupations().iter().zip(&lab) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}
