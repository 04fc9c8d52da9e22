//! Seeded random ensembles: Gaussian matrices, Hermitian observables,
//! Haar-ish unitaries and density operators of prescribed rank or spectrum.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, diag, CMatrix};
use crate::states::DensityOperator;

pub type QslRng = ChaCha8Rng;

pub fn rng(seed: u64) -> QslRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex<R: Rng>(r: &mut R, rows: usize, cols: usize) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = r.sample(StandardNormal);
        let im: f64 = r.sample(StandardNormal);
        c(re, im)
    })
}

pub fn random_hermitian<R: Rng>(r: &mut R, n: usize) -> CMatrix {
    let g = random_complex(r, n, n);
    (&g + g.adjoint()).scale(0.5)
}

/// Unitary from the QR decomposition of a complex Gaussian matrix, with the
/// phases of R's diagonal absorbed so the distribution is Haar.
pub fn random_unitary<R: Rng>(r: &mut R, n: usize) -> CMatrix {
    let g = random_complex(r, n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for k in 0..n {
        let d = rr[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// N×cols matrix with orthonormal columns.
pub fn random_isometry<R: Rng>(r: &mut R, n: usize, cols: usize) -> CMatrix {
    random_unitary(r, n).columns(0, cols).into_owned()
}

/// Random probability vector of the given length, sorted descending, with
/// entries bounded away from each other and from zero.
pub fn random_spectrum<R: Rng>(r: &mut R, len: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len).map(|_| 0.05 + r.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w.sort_by(|a, b| b.total_cmp(a));
    w
}

/// ρ = W W† / tr with W an N×rank Gaussian matrix.
pub fn random_density_matrix<R: Rng>(r: &mut R, n: usize, rank: usize) -> CMatrix {
    let w = random_complex(r, n, rank);
    let rho = &w * w.adjoint();
    let tr = crate::linalg::trace(&rho).re;
    let rho = rho.unscale(tr);
    (&rho + rho.adjoint()).scale(0.5)
}

pub fn random_density<R: Rng>(r: &mut R, n: usize, rank: usize) -> DensityOperator {
    DensityOperator::new(&random_density_matrix(r, n, rank)).expect("random density operator is valid")
}

/// U diag(spectrum) U† for a random unitary U. `spectrum` may contain
/// repeated values and zeros.
pub fn random_density_with_spectrum<R: Rng>(r: &mut R, spectrum: &[f64]) -> DensityOperator {
    let n = spectrum.len();
    let u = random_unitary(r, n);
    let m = &u * diag(spectrum) * u.adjoint();
    DensityOperator::new(&(&m + m.adjoint()).scale(0.5)).expect("valid spectrum")
}

/// Random state and a random unitary conjugate of it.
pub fn random_isospectral_pair<R: Rng>(r: &mut R, spectrum: &[f64]) -> (DensityOperator, DensityOperator) {
    let rho0 = random_density_with_spectrum(r, spectrum);
    let u = random_unitary(r, spectrum.len());
    let rho1 = rho0.conjugated(&u);
    (rho0, rho1)
}

/// Random spectrum with `distinct` distinct nonzero values, padded with
/// zeros, with random multiplicities summing to at most `n`.
pub fn random_degenerate_spectrum<R: Rng>(r: &mut R, n: usize) -> Vec<f64> {
    let rank = r.random_range(1..=n);
    let distinct = r.random_range(1..=rank);
    let base = random_spectrum(r, distinct);
    let mut mult = vec![1usize; distinct];
    for _ in distinct..rank {
        let k = r.random_range(0..distinct);
        mult[k] += 1;
    }
    let mut out = Vec::with_capacity(n);
    for (p, m) in base.iter().zip(&mult) {
        for _ in 0..*m {
            out.push(*p);
        }
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    out.resize(n, 0.0);
    out
}
