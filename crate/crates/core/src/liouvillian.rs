//! Dense Liouvillian super-operator and its spectrum.
//!
//! Density matrices are vectorized column-wise, `vec(ρ)[n + m·N] = ρ_{nm}`,
//! so that `vec(AρB) = (Bᵀ ⊗ A)·vec(ρ)`. The generator becomes
//!
//! ```text
//! L = −i(I ⊗ H − Hᵀ ⊗ I) + γ(a* ⊗ a) − (γ/2)(I ⊗ a†a + (a†a)ᵀ ⊗ I)
//! ```
//!
//! Right eigenvectors are de-vectorized into eigen-matrices ρ^(j); the left
//! eigenvectors are the rows of the inverse eigenvector matrix, which makes
//! the pair biorthogonal by construction.

use std::cmp::Ordering;
use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, ArrayView1};
use ndarray_linalg::{Eig, EigVals, Inverse};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{build_hamiltonian_rotating, DensityMatrix, FockOperators, C64};
use crate::params::OscillatorParams;

/// Largest truncation admitted for a dense N²×N² eigendecomposition.
pub const DEFAULT_MAX_DIM: usize = 40;

/// Relative zero-mode tolerance: `|λ| < ZERO_MODE_REL · max|λ|`.
pub const ZERO_MODE_REL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LiouvillianMatrix {
    pub dim: usize,
    pub matrix: Array2<C64>,
}

fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let x = a[[i, j]];
            if x.norm_sqr() == 0.0 {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .zip_mut_with(b, |o, &y| *o = x * y);
        }
    }
    out
}

/// Column-major vectorization.
pub fn vectorize(rho: &DensityMatrix) -> Array1<C64> {
    let n = rho.dim();
    Array1::from_shape_fn(n * n, |k| rho.0[[k % n, k / n]])
}

pub fn devectorize(v: ArrayView1<C64>, dim: usize) -> DensityMatrix {
    DensityMatrix(Array2::from_shape_fn((dim, dim), |(n, m)| v[n + m * dim]))
}

impl LiouvillianMatrix {
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        devectorize(self.matrix.dot(&vectorize(rho)).view(), self.dim)
    }

    /// Induced 1-norm (max column sum), used as the scale for residuals.
    pub fn norm1(&self) -> f64 {
        self.matrix
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Assembles the dense generator for an `N`-level truncation, refusing
/// truncations above `max_dim`.
pub fn build_liouvillian_capped(
    p: &OscillatorParams,
    dim: usize,
    max_dim: usize,
) -> Result<LiouvillianMatrix> {
    if dim > max_dim {
        return Err(Error::BudgetExceeded { dim, max_dim });
    }
    let h = build_hamiltonian_rotating(p, dim)?;
    let ops = FockOperators::new(dim);
    let id = Array2::<C64>::eye(dim);
    let i = C64::i();
    let comm = kron(&id, &h) - kron(&h.t().to_owned(), &id);
    let jump = kron(&ops.lowering.mapv(|z| z.conj()), &ops.lowering);
    let num = kron(&id, &ops.number) + kron(&ops.number.t().to_owned(), &id);
    let matrix = comm.mapv(|z| -i * z) + jump.mapv(|z| z * p.gamma) - num.mapv(|z| z * 0.5 * p.gamma);
    Ok(LiouvillianMatrix { dim, matrix })
}

pub fn build_liouvillian(p: &OscillatorParams, dim: usize) -> Result<LiouvillianMatrix> {
    build_liouvillian_capped(p, dim, DEFAULT_MAX_DIM)
}

/// Ascending |Re λ|, then ascending |Im λ|, then positive Im first.
pub fn spectral_order(a: &C64, b: &C64) -> Ordering {
    a.re.abs()
        .total_cmp(&b.re.abs())
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then(b.im.total_cmp(&a.im))
}

/// Eigenvalues only, sorted by [`spectral_order`].
pub fn eigenvalues(lm: &LiouvillianMatrix) -> Result<Vec<C64>> {
    let ev = lm.matrix.eigvals()?;
    let mut v: Vec<C64> = ev.to_vec();
    if v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::EigensolverFailure("non-finite eigenvalue".into()));
    }
    v.sort_by(spectral_order);
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub dim: usize,
    /// All N² eigenvalues, sorted.
    pub eigenvalues: Vec<C64>,
    /// Right eigenvectors (columns) of the first `k` modes, unit 2-norm.
    right: Array2<C64>,
    /// Matching left eigenvectors (rows), `left · right = I` on the kept modes.
    left: Array2<C64>,
    pub steady_state: DensityMatrix,
    /// ρ^(1) scaled to `Σ_n |ρ^(1)_nn| = 1`, sign fixed so that its
    /// overlap with the steady-state populations is negative.
    pub metastable_mode: DensityMatrix,
    /// Largest relative residual `‖Lv − λv‖ / ‖L‖₁` among kept modes.
    pub max_residual: f64,
}

impl SpectralDecomposition {
    pub fn modes(&self) -> usize {
        self.right.ncols()
    }

    pub fn lambda(&self, j: usize) -> C64 {
        self.eigenvalues[j]
    }

    /// Raw right eigen-matrix of mode `j` (arbitrary scale).
    pub fn right_mode(&self, j: usize) -> DensityMatrix {
        devectorize(self.right.column(j), self.dim)
    }

    /// Biorthogonal projection coefficient `c_j = ⟨w_j, vec ρ0⟩`.
    pub fn coefficient(&self, j: usize, rho0: &DensityMatrix) -> C64 {
        self.left.row(j).dot(&vectorize(rho0))
    }

    /// `Σ_{j<modes} c_j e^{λ_j t} ρ^(j)` using the kept modes.
    pub fn reconstruct(&self, rho0: &DensityMatrix, t: f64, modes: usize) -> DensityMatrix {
        let x = vectorize(rho0);
        let m = modes.min(self.modes());
        let mut acc = Array1::<C64>::zeros(self.dim * self.dim);
        for j in 0..m {
            // mode 0 is stationary; its numerical λ0 ~ 1e-16 is not propagated
            let decay = if j == 0 { C64::new(1.0, 0.0) } else { (self.eigenvalues[j] * t).exp() };
            let c = self.left.row(j).dot(&x) * decay;
            acc.scaled_add(c, &self.right.column(j));
        }
        devectorize(acc.view(), self.dim)
    }

    /// Zero-mode tolerance for this spectrum.
    pub fn zero_tol(&self) -> f64 {
        let scale = self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        ZERO_MODE_REL * scale
    }

    pub fn zero_mode_count(&self) -> usize {
        let tol = self.zero_tol();
        self.eigenvalues.iter().filter(|z| z.norm() < tol).count()
    }
}

/// Full dense eigendecomposition, keeping `k` modes (`2 ≤ k ≤ N²`).
pub fn spectrum(lm: &LiouvillianMatrix, k: usize) -> Result<SpectralDecomposition> {
    let n2 = lm.dim * lm.dim;
    if k < 2 || k > n2 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("need 2 ≤ k ≤ {n2}"),
        });
    }
    let (vals, vecs) = lm.matrix.eig()?;
    if vals.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::EigensolverFailure("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n2).collect();
    order.sort_by(|&a, &b| spectral_order(&vals[a], &vals[b]));
    let eigenvalues: Vec<C64> = order.iter().map(|&j| vals[j]).collect();
    let mut v_sorted = Array2::<C64>::zeros((n2, n2));
    for (dst, &src) in order.iter().enumerate() {
        let col = vecs.column(src);
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v_sorted.column_mut(dst).assign(&col.mapv(|z| z / norm));
    }
    let w = v_sorted.inv()?;

    let scale = lm.norm1();
    let mut max_residual = 0.0f64;
    for j in 0..k {
        let v = v_sorted.column(j);
        let r = lm.matrix.dot(&v) - v.mapv(|z| z * eigenvalues[j]);
        let res = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / scale;
        max_residual = max_residual.max(res);
    }
    if !(max_residual < 1e-8) {
        return Err(Error::EigensolverFailure(format!(
            "eigenpair residual {max_residual:e} exceeds 1e-8·‖L‖"
        )));
    }

    let right = v_sorted.slice(s![.., ..k]).to_owned();
    let mut left = w.slice(s![..k, ..]).to_owned();
    let dim = lm.dim;

    let raw0 = devectorize(right.column(0), dim);
    let tr0 = raw0.trace();
    if tr0.norm() == 0.0 {
        return Err(Error::EigensolverFailure("zero mode has vanishing trace".into()));
    }
    // the zero-mode left eigenvector is the trace functional
    let id = vectorize(&DensityMatrix(Array2::from_diag_elem(dim, C64::new(1.0, 0.0))));
    left.row_mut(0).assign(&id.mapv(|z| z / tr0));
    let steady_state = DensityMatrix(raw0.0.mapv(|z| z / tr0));
    let metastable_mode = normalize_metastable(&devectorize(right.column(1), dim), &steady_state);

    Ok(SpectralDecomposition {
        dim,
        eigenvalues,
        right,
        left,
        steady_state,
        metastable_mode,
        max_residual,
    })
}

fn normalize_metastable(raw: &DensityMatrix, steady: &DensityMatrix) -> DensityMatrix {
    // remove the arbitrary complex phase using the largest diagonal entry
    let diag = raw.0.diag();
    let pivot = diag
        .iter()
        .cloned()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(C64::new(1.0, 0.0));
    let phase = if pivot.norm() > 0.0 {
        pivot / pivot.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let mut m = raw.0.mapv(|z| z / phase);
    let l1: f64 = m.diag().iter().map(|z| z.re.abs()).sum();
    if l1 > 0.0 {
        m.mapv_inplace(|z| z / l1);
    }
    let overlap: f64 = m
        .diag()
        .iter()
        .zip(steady.0.diag().iter())
        .map(|(a, b)| a.re * b.re)
        .sum();
    if overlap > 0.0 {
        m.mapv_inplace(|z| -z);
    }
    DensityMatrix(m)
}

/// Metastable lifetime `τ = 2π/|Re λ1|`.
pub fn lifetime(sd: &SpectralDecomposition) -> Result<f64> {
    lifetime_from(sd.lambda(1), sd.zero_tol())
}

pub fn lifetime_from(lambda1: C64, zero_tol: f64) -> Result<f64> {
    let rate = lambda1.re.abs();
    if !(rate > zero_tol) {
        return Err(Error::DegenerateSpectrum {
            rate,
            tol: zero_tol,
        });
    }
    Ok(2.0 * PI / rate)
}

/// `ρ^(0) + c₁e^{λ1 t}ρ^(1)` with `c₁` from the left-eigenvector projection.
pub fn two_mode_reconstruction(
    sd: &SpectralDecomposition,
    rho0: &DensityMatrix,
    t: f64,
) -> DensityMatrix {
    sd.reconstruct(rho0, t, 2)
}

/// `(diag ρ^(0), diag ρ^(1))` in the display normalization.
pub fn mode_diagonals(sd: &SpectralDecomposition) -> (Vec<f64>, Vec<f64>) {
    (
        sd.steady_state.populations(),
        sd.metastable_mode.populations(),
    )
}

/// `|Re λ_j|` ladder for a sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub nu: f64,
    pub eigenvalues: Vec<C64>,
}

/// First `k` eigenvalues per drive frequency (eigenvalues only).
pub fn spectrum_sweep(
    base: &OscillatorParams,
    nus: &[f64],
    dim: usize,
    k: usize,
    max_dim: usize,
) -> Result<Vec<SweepRow>> {
    nus.iter()
        .map(|&nu| {
            let lm = build_liouvillian_capped(&base.with_nu(nu), dim, max_dim)?;
            let mut ev = eigenvalues(&lm)?;
            ev.truncate(k);
            Ok(SweepRow {
                nu,
                eigenvalues: ev,
            })
        })
        .collect()
}

/// `|Re λ1|` at one frequency.
pub fn metastable_rate(p: &OscillatorParams, dim: usize) -> Result<f64> {
    let lm = build_liouvillian(p, dim)?;
    let ev = eigenvalues(&lm)?;
    Ok(ev[1].re.abs())
}

/// Location of the smallest `|Re λ1|` over a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateMinimum {
    pub nu: f64,
    pub rate: f64,
    /// Coarse scan `(ν, |Re λ1|)` used to bracket the minimum.
    pub scan: Vec<(f64, f64)>,
    /// Whether the minimum lies strictly inside the scanned range.
    pub interior: bool,
}

/// Coarse scan of `|Re λ1|` over `nus`, then golden-section refinement to
/// `nu_tol` around the smallest scan point.
pub fn metastable_minimum(
    base: &OscillatorParams,
    nus: &[f64],
    dim: usize,
    nu_tol: f64,
) -> Result<RateMinimum> {
    if nus.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "nus",
            reason: "need at least three scan points".into(),
        });
    }
    let rate = |nu: f64| metastable_rate(&base.with_nu(nu), dim);
    let scan = nus
        .iter()
        .map(|&nu| rate(nu).map(|r| (nu, r)))
        .collect::<Result<Vec<_>>>()?;
    let k = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(k, _)| k)
        .expect("non-empty scan");
    let interior = k > 0 && k + 1 < scan.len();
    if !interior {
        return Ok(RateMinimum {
            nu: scan[k].0,
            rate: scan[k].1,
            scan,
            interior,
        });
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (scan[k - 1].0, scan[k + 1].0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = rate(x1)?;
    let mut f2 = rate(x2)?;
    while b - a > nu_tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = rate(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = rate(x2)?;
        }
    }
    let (nu, r) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    let (nu, r) = if scan[k].1 < r { scan[k] } else { (nu, r) };
    Ok(RateMinimum {
        nu,
        rate: r,
        scan,
        interior,
    })
}
