//! Dense complex linear algebra used throughout the crate: Hermitian spectral
//! decomposition with eigenvalue clustering, spectral calculus, the polar
//! absolute value and time-ordered exponentials.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QslError, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance on ‖A − A†‖_F accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// tr(AB) without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn hermitian_residual(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

pub fn is_square(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(QslError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(())
}

/// Symmetrizes `a` as (A + A†)/2 when it is Hermitian within tolerance.
pub fn hermitize(a: &CMatrix) -> Result<CMatrix> {
    is_square(a)?;
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QslError::InvalidArgument("non-finite matrix entry".into()));
    }
    let residual = hermitian_residual(a);
    if residual > HERMITIAN_TOL * a.norm().max(1.0) {
        return Err(QslError::NotHermitian { residual });
    }
    Ok((a + a.adjoint()).scale(0.5))
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Eigenvalues in descending order with matching eigenvector columns.
/// The input must already be Hermitian.
pub fn eigh(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    svd(a).1
}

/// Thin SVD `A = U Σ V†` with singular values in descending order; U is
/// m×k and V is n×k with k = min(m, n), both with orthonormal columns.
///
/// One-sided Jacobi. nalgebra's complex bidiagonal SVD loses accuracy on
/// clustered singular values, which is the common case for overlaps of
/// nearly coincident frames.
pub fn svd(a: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = svd(&a.adjoint());
        return (v, s, u);
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = identity(n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase;
                        mat[(i, p)] = xp * cs - xq * sn;
                        mat[(i, q)] = xp * sn + xq * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|k| w.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let mut u = CMatrix::zeros(m, n);
    let mut vv = CMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut filled = 0;
    for (col, &i) in order.iter().enumerate() {
        vv.set_column(col, &v.column(i));
        s.push(norms[i]);
        if norms[i] > 1e-300 && norms[i] > 1e-14 * scale {
            u.set_column(col, &w.column(i).unscale(norms[i]));
            filled += 1;
        }
    }
    complete_orthonormal(&mut u, filled);
    (u, s, vv)
}

/// Fills columns `filled..` of `u` with vectors orthonormal to all earlier
/// ones, drawn from the standard basis.
fn complete_orthonormal(u: &mut CMatrix, filled: usize) {
    let (m, n) = u.shape();
    let mut col = filled;
    let mut e = 0;
    while col < n && e < m {
        let mut x = nalgebra::DVector::<Complex64>::zeros(m);
        x[e] = cr(1.0);
        for _ in 0..2 {
            for k in 0..col {
                let proj = u.column(k).dotc(&x);
                x -= u.column(k) * proj;
            }
        }
        let nx = x.norm();
        if nx > 0.5 {
            u.set_column(col, &x.unscale(nx));
            col += 1;
        }
        e += 1;
    }
}

/// Σ_j λ_j v_j v_j† over the given columns.
pub fn from_eigen(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let n = vectors.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        out += (&v * v.adjoint()).scale(lam);
    }
    out
}

/// Spectral decomposition `A = Σ_j λ_j P_j` with distinct eigenvalues in
/// descending order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<CMatrix>,
    /// Orthonormal eigenvector columns spanning each eigenspace.
    pub frames: Vec<CMatrix>,
    pub multiplicities: Vec<usize>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, |f| f.nrows())
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (lam, p) in self.eigenvalues.iter().zip(&self.projectors) {
            out += p.scale(*lam);
        }
        out
    }

    /// Conjugates every eigenspace by `u`; eigenvalues are carried over exactly.
    pub fn conjugated(&self, u: &CMatrix) -> SpectralDecomposition {
        let frames: Vec<CMatrix> = self.frames.iter().map(|f| u * f).collect();
        let projectors = frames.iter().map(|f| f * f.adjoint()).collect();
        SpectralDecomposition {
            eigenvalues: self.eigenvalues.clone(),
            projectors,
            frames,
            multiplicities: self.multiplicities.clone(),
        }
    }
}

/// Default clustering tolerance: 1e-9 · max(1, ‖A‖₂).
pub fn default_cluster_tol(a: &CMatrix) -> f64 {
    let (vals, _) = eigh(a);
    let norm = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-9 * norm.max(1.0)
}

/// Hermitian spectral decomposition. Sorted eigenvalues whose consecutive
/// gaps are at most `cluster_tol` are merged into a single eigenspace
/// (single linkage); the merged eigenvalue is the cluster mean.
pub fn spectral_decompose(a: &CMatrix, cluster_tol: f64) -> Result<SpectralDecomposition> {
    let a = hermitize(a)?;
    let (vals, vecs) = eigh(&a);
    Ok(cluster_eigen(&vals, &vecs, cluster_tol))
}

pub(crate) fn cluster_eigen(vals: &[f64], vecs: &CMatrix, cluster_tol: f64) -> SpectralDecomposition {
    let n = vecs.nrows();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, &v) in vals.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if vals[*g.last().unwrap()] - v <= cluster_tol => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut projectors = Vec::with_capacity(groups.len());
    let mut frames = Vec::with_capacity(groups.len());
    let mut multiplicities = Vec::with_capacity(groups.len());
    for g in groups {
        let mean = g.iter().map(|&k| vals[k]).sum::<f64>() / g.len() as f64;
        let mut frame = CMatrix::zeros(n, g.len());
        for (col, &k) in g.iter().enumerate() {
            frame.set_column(col, &vecs.column(k));
        }
        projectors.push(&frame * frame.adjoint());
        frames.push(frame);
        eigenvalues.push(mean);
        multiplicities.push(g.len());
    }
    SpectralDecomposition { eigenvalues, projectors, frames, multiplicities }
}

/// Spectral calculus `f(A) = Σ f(λ) v v†` for positive semidefinite `A`.
/// Eigenvalues in (−tol, 0) are clamped to zero before `f` is applied.
pub fn operator_function<F: Fn(f64) -> f64>(a: &CMatrix, f: F, tol: f64) -> Result<CMatrix> {
    let a = hermitize(a)?;
    let (vals, vecs) = eigh(&a);
    if let Some(&min) = vals.last() {
        if min < -tol {
            return Err(QslError::NotPsd { eigenvalue: min });
        }
    }
    let mapped: Vec<f64> = vals.iter().map(|&v| f(v.max(0.0))).collect();
    Ok(from_eigen(&mapped, &vecs))
}

/// Default PSD tolerance for [`operator_function`].
pub fn psd_tol(a: &CMatrix) -> f64 {
    1e-10 * a.norm().max(1.0)
}

/// |A| = √(AA†).
pub fn polar_absolute(a: &CMatrix) -> CMatrix {
    let aa = a * a.adjoint();
    operator_function(&aa, f64::sqrt, f64::INFINITY).expect("AA† is Hermitian")
}

/// exp(−i·H·t) for Hermitian `H`; unitary up to rounding.
pub fn unitary_exp(h: &CMatrix, t: f64) -> CMatrix {
    let (vals, vecs) = eigh(h);
    let n = h.nrows();
    let mut scaled = vecs.clone();
    for k in 0..n {
        let phase = Complex64::from_polar(1.0, -vals[k] * t);
        for i in 0..n {
            scaled[(i, k)] *= phase;
        }
    }
    scaled * vecs.adjoint()
}

/// exp(K) for skew-Hermitian `K`.
pub fn exp_skew(k: &CMatrix) -> CMatrix {
    // K = −iG with G = iK Hermitian.
    let g = k * I;
    let g = (&g + g.adjoint()).scale(0.5);
    unitary_exp(&g, 1.0)
}

/// Time-ordered exponential of a skew-Hermitian generator over `[t0, t1]`
/// using midpoint exponential steps; later times multiply from the left.
pub fn time_ordered_exponential<G>(generator: G, t0: f64, t1: f64, steps: usize) -> CMatrix
where
    G: Fn(f64) -> CMatrix,
{
    let steps = steps.max(1);
    let dt = (t1 - t0) / steps as f64;
    let n = generator(t0).nrows();
    let mut u = identity(n);
    for k in 0..steps {
        let mid = t0 + (k as f64 + 0.5) * dt;
        let step = exp_skew(&generator(mid).scale(dt));
        u = step * u;
    }
    u
}

/// Gauss–Legendre nodes (as fractions of a step) used by [`cf4_step`].
pub const CF4_NODES: [f64; 2] = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];

/// One fourth-order commutator-free exponential step for `Y' = A(t) Y`,
/// given `A` at the two Gauss nodes of the step. Exactly unitary for
/// skew-Hermitian `A`.
pub fn cf4_step(a1: &CMatrix, a2: &CMatrix, h: f64) -> CMatrix {
    let s3 = 3f64.sqrt() / 6.0;
    let alpha1 = 0.25 - s3;
    let alpha2 = 0.25 + s3;
    let first = exp_skew(&(a1.scale(alpha2 * h) + a2.scale(alpha1 * h)));
    let second = exp_skew(&(a1.scale(alpha1 * h) + a2.scale(alpha2 * h)));
    second * first
}

/// Fourth-order commutator-free time-ordered exponential.
pub fn time_ordered_exponential_cf4<G>(generator: G, t0: f64, t1: f64, steps: usize) -> CMatrix
where
    G: Fn(f64) -> CMatrix,
{
    let steps = steps.max(1);
    let dt = (t1 - t0) / steps as f64;
    let n = generator(t0).nrows();
    let mut u = identity(n);
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let a1 = generator(t + CF4_NODES[0] * dt);
        let a2 = generator(t + CF4_NODES[1] * dt);
        u = cf4_step(&a1, &a2, dt) * u;
    }
    u
}

/// Hermitian G with exp(−iG) = W for unitary W, spectrum in (−π, π].
///
/// W is diagonalized through its commuting Hermitian parts (W+W†)/2 and
/// (W−W†)/2i: the first is diagonalized, then the second within each
/// cluster of the first.
pub fn unitary_log(w: &CMatrix) -> CMatrix {
    let n = w.nrows();
    let cos_part = (w + w.adjoint()).scale(0.5);
    let sin_part = (w - w.adjoint()) * c(0.0, -0.5);
    let (vals, vecs) = eigh(&cos_part);
    let clusters = cluster_eigen(&vals, &vecs, 1e-7);
    let mut g = CMatrix::zeros(n, n);
    for frame in &clusters.frames {
        let block = frame.adjoint() * &sin_part * frame;
        let block = (&block + block.adjoint()).scale(0.5);
        let (_, inner) = eigh(&block);
        let rotated = frame * inner;
        for k in 0..rotated.ncols() {
            let v = rotated.column(k);
            let z = v.dotc(&(w * v));
            let theta = z.im.atan2(z.re);
            g -= (&v * v.adjoint()).scale(theta);
        }
    }
    (&g + g.adjoint()).scale(0.5)
}

pub fn unitarity_defect(u: &CMatrix) -> f64 {
    (u.adjoint() * u - identity(u.ncols())).norm()
}

/// Pauli matrices, handy for tests and examples.
pub mod pauli {
    use super::*;

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
    }
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(values.len(), values.iter().map(|&v| cr(v))))
}

/// |ψ⟩⟨ψ| for a (not necessarily normalized) column.
pub fn ket_bra(psi: &[Complex64]) -> CMatrix {
    let v = nalgebra::DVector::from_column_slice(psi);
    &v * v.adjoint()
}

/// |a⟩⟨b| for standard basis vectors.
pub fn basis_op(n: usize, a: usize, b: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(a, b)] = cr(1.0);
    m
}
