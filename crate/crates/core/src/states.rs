//! Density operators, Hermitian observables, the horizontal/vertical split of
//! an observable relative to a state, and the information functionals
//! (variance, skew information, J, quantum Fisher information).

use std::ops::Deref;

use crate::error::{QslError, Result};
use crate::geometry::Projector;
use crate::linalg::{self, commutator, identity, trace, trace_product, CMatrix, SpectralDecomposition};

/// Tolerance on |tr ρ − 1|.
pub const TRACE_TOL: f64 = 1e-10;
/// Default tolerance on negative eigenvalues of a density operator.
pub const PSD_TOL: f64 = 1e-10;
/// Eigenvalues below this fraction of the largest eigenvalue count as zero.
pub const ZERO_EIGENVALUE_REL: f64 = 1e-12;
/// Eigenvalue clustering tolerance for density operators.
pub const CLUSTER_TOL: f64 = 1e-9;

/// A Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable(CMatrix);

impl Observable {
    pub fn new(m: &CMatrix) -> Result<Self> {
        Ok(Observable(linalg::hermitize(m)?))
    }

    /// Wraps `m` after symmetrizing it, without a tolerance check.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        Observable((m + m.adjoint()).scale(0.5))
    }

    pub fn zeros(n: usize) -> Self {
        Observable(CMatrix::zeros(n, n))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

impl Deref for Observable {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

/// A validated density operator with its cached spectral decomposition.
///
/// Distinct eigenvalues are stored in descending order; the zero eigenspace
/// (if any) is the last entry and carries an eigenvalue of exactly `0.0`.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: CMatrix,
    spectrum: SpectralDecomposition,
    rank: usize,
}

impl DensityOperator {
    pub fn new(m: &CMatrix) -> Result<Self> {
        validate_density(m, PSD_TOL)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_pure(&self) -> bool {
        self.rank == 1
    }

    pub fn is_faithful(&self) -> bool {
        self.rank == self.dim()
    }

    /// Distinct eigenvalues, descending (includes a trailing zero when the
    /// state is not faithful).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum.eigenvalues
    }

    /// Number of distinct nonzero eigenvalues.
    pub fn nonzero_count(&self) -> usize {
        self.spectrum.eigenvalues.iter().filter(|&&p| p > 0.0).count()
    }

    /// All N eigenvalues with multiplicity, descending.
    pub fn full_spectrum(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for (p, m) in self.spectrum.eigenvalues.iter().zip(&self.spectrum.multiplicities) {
            out.extend(std::iter::repeat_n(*p, *m));
        }
        out
    }

    /// Orthonormal eigenvectors as columns, ordered as [`Self::full_spectrum`].
    pub fn eigenbasis(&self) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        let mut col = 0;
        for f in &self.spectrum.frames {
            for k in 0..f.ncols() {
                out.set_column(col, &f.column(k));
                col += 1;
            }
        }
        out
    }

    /// Eigenspace projectors paired with their eigenvalues, nonzero ones only.
    pub fn nonzero_eigenspaces(&self) -> impl Iterator<Item = (f64, &CMatrix, &CMatrix)> {
        self.spectrum
            .eigenvalues
            .iter()
            .zip(&self.spectrum.projectors)
            .zip(&self.spectrum.frames)
            .filter(|((p, _), _)| **p > 0.0)
            .map(|((p, proj), frame)| (*p, proj, frame))
    }

    /// Projector Π onto the support.
    pub fn support_projector(&self) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (_, p, _) in self.nonzero_eigenspaces() {
            out += p;
        }
        out
    }

    /// Frame (N×rank) of eigenvectors for the nonzero eigenvalues.
    pub fn support_frame(&self) -> CMatrix {
        self.eigenbasis().columns(0, self.rank).into_owned()
    }

    /// Frame (N×(N−rank)) of the kernel, in eigen-solver order.
    pub fn kernel_frame(&self) -> CMatrix {
        let n = self.dim();
        self.eigenbasis().columns(self.rank, n - self.rank).into_owned()
    }

    /// √ρ from the cached spectrum (zero eigenvalues are exactly zero).
    pub fn sqrt(&self) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (p, proj, _) in self.nonzero_eigenspaces() {
            out += proj.scale(p.sqrt());
        }
        out
    }

    /// UρU† with the spectrum transported exactly.
    pub fn conjugated(&self, u: &CMatrix) -> DensityOperator {
        let m = u * &self.matrix * u.adjoint();
        DensityOperator {
            matrix: (&m + m.adjoint()).scale(0.5),
            spectrum: self.spectrum.conjugated(u),
            rank: self.rank,
        }
    }

    /// Whether the two states have equal eigenvalue lists (within `tol`) and
    /// equal multiplicities.
    pub fn is_isospectral(&self, other: &DensityOperator, tol: f64) -> bool {
        self.dim() == other.dim()
            && self.spectrum.multiplicities == other.spectrum.multiplicities
            && self
                .spectrum
                .eigenvalues
                .iter()
                .zip(&other.spectrum.eigenvalues)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(QslError::DimensionMismatch { expected: self.dim(), found: n });
        }
        Ok(())
    }
}

/// Validates `m` as a density operator: Hermitian, PSD down to `−tol`,
/// unit trace within [`TRACE_TOL`].
pub fn validate_density(m: &CMatrix, tol: f64) -> Result<DensityOperator> {
    let m = linalg::hermitize(m)?;
    let tr = trace(&m).re;
    let (mut vals, vecs) = linalg::eigh(&m);
    if let Some(&min) = vals.last() {
        if min < -tol {
            return Err(QslError::NotPsd { eigenvalue: min });
        }
    }
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(QslError::TraceNotOne { trace: tr });
    }
    let max = vals.first().copied().unwrap_or(0.0);
    let zero = ZERO_EIGENVALUE_REL * max;
    for v in vals.iter_mut() {
        if *v < zero {
            *v = 0.0;
        }
    }
    let rank = vals.iter().filter(|&&v| v > 0.0).count();
    let mut spectrum = linalg::cluster_eigen(&vals, &vecs, CLUSTER_TOL * max.max(1.0));
    // A cluster that absorbed an exact zero is the kernel.
    let n_clusters = spectrum.len();
    if rank < vals.len() {
        spectrum.eigenvalues[n_clusters - 1] = 0.0;
    }
    let rank = spectrum
        .eigenvalues
        .iter()
        .zip(&spectrum.multiplicities)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, m)| *m)
        .sum();
    Ok(DensityOperator { matrix: m, spectrum, rank })
}

fn check_dims(a: &Observable, rho: &DensityOperator) -> Result<()> {
    rho.check_dim(a.dim())
}

/// Horizontal and vertical components of an observable relative to a state.
#[derive(Debug, Clone)]
pub struct ObservableSplit {
    pub horizontal: Observable,
    pub vertical: Observable,
}

/// Vertical part Σ_j P_j A P_j over every eigenspace of ρ (kernel included);
/// horizontal part is the remainder.
pub fn split_observable(a: &Observable, rho: &DensityOperator) -> Result<ObservableSplit> {
    check_dims(a, rho)?;
    let n = a.dim();
    let mut vertical = CMatrix::zeros(n, n);
    for p in &rho.spectrum().projectors {
        vertical += p * a.matrix() * p;
    }
    let horizontal = a.matrix() - &vertical;
    Ok(ObservableSplit {
        horizontal: Observable::from_hermitian_part(&horizontal),
        vertical: Observable::from_hermitian_part(&vertical),
    })
}

pub fn horizontal_part(a: &Observable, rho: &DensityOperator) -> Result<Observable> {
    Ok(split_observable(a, rho)?.horizontal)
}

pub fn expectation(a: &Observable, rho: &DensityOperator) -> Result<f64> {
    check_dims(a, rho)?;
    Ok(trace_product(a.matrix(), rho.matrix()).re)
}

/// Δ²(A,ρ) = tr(A²ρ) − tr(Aρ)², evaluated as ‖(A − ⟨A⟩)√ρ‖²_F.
pub fn variance(a: &Observable, rho: &DensityOperator) -> Result<f64> {
    let mean = expectation(a, rho)?;
    let shifted = a.matrix() - identity(a.dim()).scale(mean);
    Ok((shifted * rho.sqrt()).norm_squared())
}

/// Δ(A,ρ).
pub fn uncertainty(a: &Observable, rho: &DensityOperator) -> Result<f64> {
    Ok(variance(a, rho)?.sqrt())
}

/// Wigner–Yanase skew information I(A,ρ) = tr(A²ρ) − tr(A√ρA√ρ), evaluated
/// as ½‖[√ρ, A]‖²_F.
pub fn skew_information(a: &Observable, rho: &DensityOperator) -> Result<f64> {
    check_dims(a, rho)?;
    Ok(0.5 * commutator(&rho.sqrt(), a.matrix()).norm_squared())
}

/// I(A,P) = tr(A²P) − tr(APAP) = ‖(1−P)AP‖²_F.
pub fn skew_information_projector(a: &Observable, p: &Projector) -> Result<f64> {
    if a.dim() != p.dim() {
        return Err(QslError::DimensionMismatch { expected: a.dim(), found: p.dim() });
    }
    Ok(projector_skew(a.matrix(), p.matrix()))
}

fn projector_skew(a: &CMatrix, p: &CMatrix) -> f64 {
    let ap = a * p;
    (&ap - p * &ap).norm_squared()
}

/// J(A,ρ) = Σ_j p_j I(A,P_j) over the nonzero eigenvalues.
pub fn j_functional(a: &Observable, rho: &DensityOperator) -> Result<f64> {
    check_dims(a, rho)?;
    Ok(rho.nonzero_eigenspaces().map(|(p, proj, _)| p * projector_skew(a.matrix(), proj)).sum())
}

/// Quantum Fisher information F = 2 Σ_{j,k} (p_j−p_k)²/(p_j+p_k) tr(AP_jAP_k),
/// summed over all eigenspaces including the kernel.
pub fn quantum_fisher_information(a: &Observable, rho: &DensityOperator) -> Result<f64> {
    check_dims(a, rho)?;
    let spec = rho.spectrum();
    let mut total = 0.0;
    for j in 0..spec.len() {
        for k in j + 1..spec.len() {
            let (pj, pk) = (spec.eigenvalues[j], spec.eigenvalues[k]);
            if pj + pk <= 0.0 {
                continue;
            }
            let w = (pj - pk).powi(2) / (pj + pk);
            // tr(AP_jAP_k) = ‖P_j A P_k‖²; the pair (k, j) contributes equally.
            total += 2.0 * w * (&spec.projectors[j] * a.matrix() * &spec.projectors[k]).norm_squared();
        }
    }
    Ok(2.0 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_op, diag, identity, pauli, CMatrix};
    use crate::random::{random_degenerate_spectrum, random_density, random_density_with_spectrum, random_hermitian, rng};
    use rand::Rng;

    fn obs(m: CMatrix) -> Observable {
        Observable::new(&m).unwrap()
    }

    fn dens(v: &[f64]) -> DensityOperator {
        DensityOperator::new(&diag(v)).unwrap()
    }

    #[test]
    fn validate_examples() {
        let mixed = DensityOperator::new(&identity(3).scale(1.0 / 3.0)).unwrap();
        assert_eq!(mixed.rank(), 3);
        assert_eq!(mixed.eigenvalues().len(), 1);
        assert!((mixed.eigenvalues()[0] - 1.0 / 3.0).abs() < 1e-15);

        let q = dens(&[0.8, 0.2]);
        assert_eq!(q.rank(), 2);
        assert_eq!(q.eigenvalues(), &[0.8, 0.2]);

        assert!(matches!(DensityOperator::new(&diag(&[1.1, -0.1])), Err(QslError::NotPsd { .. })));
        assert!(matches!(DensityOperator::new(&diag(&[0.5, 0.4])), Err(QslError::TraceNotOne { .. })));
    }

    #[test]
    fn rank_deficient_has_exact_zero_eigenspace() {
        let mut r = rng(1);
        let rho = random_density(&mut r, 5, 2);
        assert_eq!(rho.rank(), 2);
        assert_eq!(*rho.eigenvalues().last().unwrap(), 0.0);
        assert_eq!(*rho.spectrum().multiplicities.last().unwrap(), 3);
        let s = rho.sqrt();
        assert!((&s * &s - rho.matrix()).norm() < 1e-12);
    }

    #[test]
    fn split_on_nondegenerate_diagonal_state() {
        let rho = dens(&[0.5, 0.3, 0.2]);
        let a = obs(random_hermitian(&mut rng(2), 3));
        let split = split_observable(&a, &rho).unwrap();
        let diag_part = CMatrix::from_diagonal(&a.diagonal());
        assert!((split.vertical.matrix() - &diag_part).norm() < 1e-14);
        assert!((split.horizontal.matrix() - (a.matrix() - &diag_part)).norm() < 1e-14);
        let lhs = variance(&a, &rho).unwrap();
        let rhs = variance(&split.horizontal, &rho).unwrap() + variance(&split.vertical, &rho).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn commuting_observable_has_no_horizontal_part() {
        let rho = dens(&[0.6, 0.4]);
        let split = split_observable(&obs(pauli::z()), &rho).unwrap();
        assert!(split.horizontal.norm() < 1e-15);
    }

    #[test]
    fn block_observable_split() {
        // σ_x on the first two levels, zero on the third.
        let rho = dens(&[0.5, 0.3, 0.2]);
        let a = obs(basis_op(3, 0, 1) + basis_op(3, 1, 0));
        let split = split_observable(&a, &rho).unwrap();
        assert!(split.vertical.norm() < 1e-15);
        let lhs = variance(&a, &rho).unwrap();
        let rhs = variance(&split.horizontal, &rho).unwrap() + variance(&split.vertical, &rho).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
        assert!((lhs - 0.8).abs() < 1e-14);
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance(&obs(identity(2)), &dens(&[0.8, 0.2])).unwrap(), 0.0);
        assert!((variance(&obs(pauli::z()), &dens(&[0.8, 0.2])).unwrap() - 0.64).abs() < 1e-14);
        let h = obs(basis_op(2, 1, 0) * crate::linalg::I - basis_op(2, 0, 1) * crate::linalg::I);
        assert!((variance(&h, &dens(&[0.97, 0.03])).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn skew_examples() {
        let rho = dens(&[0.8, 0.2]);
        assert!(skew_information(&obs(pauli::z()), &rho).unwrap().abs() < 1e-15);
        // 1 − 2√0.16 = 0.2
        assert!((skew_information(&obs(pauli::x()), &rho).unwrap() - 0.2).abs() < 1e-14);
        let pure = dens(&[1.0, 0.0]);
        let a = obs(random_hermitian(&mut rng(4), 2));
        assert!((skew_information(&a, &pure).unwrap() - variance(&a, &pure).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn projector_skew_examples() {
        let p = Projector::new(&basis_op(2, 0, 0)).unwrap();
        assert!((skew_information_projector(&obs(pauli::x()), &p).unwrap() - 1.0).abs() < 1e-15);
        assert!(skew_information_projector(&obs(pauli::z()), &p).unwrap().abs() < 1e-15);
        let a = obs(random_hermitian(&mut rng(8), 2));
        let pure = dens(&[1.0, 0.0]);
        assert!((skew_information_projector(&a, &p).unwrap() - variance(&a, &pure).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn j_functional_examples() {
        let a = obs(random_hermitian(&mut rng(9), 3));
        let pure = dens(&[1.0, 0.0, 0.0]);
        assert!((j_functional(&a, &pure).unwrap() - variance(&a, &pure).unwrap()).abs() < 1e-12);
        assert!(j_functional(&obs(diag(&[1.0, 2.0, 3.0])), &dens(&[0.5, 0.3, 0.2])).unwrap().abs() < 1e-15);
        let rho = dens(&[0.5, 0.3, 0.2]);
        let h = horizontal_part(&a, &rho).unwrap();
        assert!((j_functional(&a, &rho).unwrap() - variance(&h, &rho).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn qfi_examples() {
        let rho = dens(&[0.8, 0.2]);
        assert!(quantum_fisher_information(&obs(pauli::z()), &rho).unwrap().abs() < 1e-15);
        // 2 · [(0.6²/1)·1 + (0.6²/1)·1] summed over (j,k) = (1,2),(2,1)
        let f = quantum_fisher_information(&obs(pauli::x()), &rho).unwrap();
        assert!((f - 1.44).abs() < 1e-13, "{f}");
        let pure = dens(&[0.0, 1.0]);
        let a = obs(random_hermitian(&mut rng(10), 2));
        let f = quantum_fisher_information(&a, &pure).unwrap();
        assert!((f - 4.0 * variance(&a, &pure).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let rho = dens(&[0.8, 0.2]);
        let a = obs(identity(3));
        assert!(matches!(variance(&a, &rho), Err(QslError::DimensionMismatch { .. })));
        assert!(matches!(j_functional(&a, &rho), Err(QslError::DimensionMismatch { .. })));
    }

    #[test]
    fn almost_horizontal_iff_equal_uncertainty() {
        let rho = dens(&[0.5, 0.3, 0.2, 0.0]);
        let h = horizontal_part(&obs(random_hermitian(&mut rng(12), 4)), &rho).unwrap();
        // Scalar on the support, arbitrary on the kernel: same uncertainty.
        let almost = obs(h.matrix() + diag(&[0.7, 0.7, 0.7, -2.0]));
        assert!((uncertainty(&almost, &rho).unwrap() - uncertainty(&h, &rho).unwrap()).abs() < 1e-12);
        // Non-scalar vertical part on the support: strictly larger.
        let not = obs(h.matrix() + diag(&[0.7, 0.1, 0.7, 0.0]));
        assert!(uncertainty(&not, &rho).unwrap() > uncertainty(&h, &rho).unwrap() + 1e-3);
    }

    #[test]
    fn inequality_chain_random() {
        let mut r = rng(13);
        for _ in 0..200 {
            let n = r.random_range(1..=8);
            let spectrum = random_degenerate_spectrum(&mut r, n);
            let rho = random_density_with_spectrum(&mut r, &spectrum);
            let a = obs(random_hermitian(&mut r, n));
            let i = skew_information(&a, &rho).unwrap();
            let j = j_functional(&a, &rho).unwrap();
            let v = variance(&a, &rho).unwrap();
            let f = quantum_fisher_information(&a, &rho).unwrap();
            assert!(i <= j + 1e-10 && j <= v + 1e-10 && f / 4.0 <= j + 1e-10);
            let split = split_observable(&a, &rho).unwrap();
            let comm = crate::linalg::commutator(a.matrix(), rho.matrix())
                - crate::linalg::commutator(split.horizontal.matrix(), rho.matrix());
            assert!(comm.norm() < 1e-12);
        }
    }
}
