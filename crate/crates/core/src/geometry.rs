//! Static distances between states and between projectors: Fubini–Study,
//! Grassmann (projector, frame and principal-angle forms), the weighted
//! product of Grassmannians, Plücker, Bures angle and Wigner–Yanase.
//! Also builds explicit Grassmann geodesics from the CS decomposition.

use std::f64::consts::FRAC_PI_2;

use crate::error::{QslError, Result};
use crate::linalg::{self, identity, trace, CMatrix, I};
use crate::states::{DensityOperator, Observable};

/// Tolerance on ‖P² − P‖_F.
pub const IDEMPOTENCE_TOL: f64 = 1e-10;
/// Tolerance on |tr P − rank|.
pub const RANK_TOL: f64 = 1e-8;
/// Tolerance on ‖F†F − 1‖_F.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Absolute tolerance on eigenvalues when pairing eigenspaces.
pub const ISOSPECTRAL_TOL: f64 = 1e-8;

/// An orthogonal projector of rank n together with a frame for its support.
#[derive(Debug, Clone)]
pub struct Projector {
    matrix: CMatrix,
    frame: Frame,
}

impl Projector {
    pub fn new(m: &CMatrix) -> Result<Self> {
        let m = linalg::hermitize(m)?;
        let residual = (&m * &m - &m).norm();
        if residual > IDEMPOTENCE_TOL {
            return Err(QslError::NotProjector { residual });
        }
        let tr = trace(&m).re;
        let rank = tr.round();
        if (tr - rank).abs() > RANK_TOL {
            return Err(QslError::NotProjector { residual: (tr - rank).abs() });
        }
        let rank = rank as usize;
        let (_, vecs) = linalg::eigh(&m);
        let columns = vecs.columns(0, rank).into_owned();
        Ok(Projector { matrix: m, frame: Frame { columns } })
    }

    pub fn from_frame(frame: Frame) -> Self {
        let matrix = &frame.columns * frame.columns.adjoint();
        Projector { matrix, frame }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn rank(&self) -> usize {
        self.frame.rank()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn complement(&self) -> Projector {
        let n = self.dim();
        let q = identity(n) - &self.matrix;
        let (_, vecs) = linalg::eigh(&q);
        let columns = vecs.columns(0, n - self.rank()).into_owned();
        Projector { matrix: q, frame: Frame { columns } }
    }

    /// U P U†.
    pub fn conjugated(&self, u: &CMatrix) -> Projector {
        Projector::from_frame(Frame { columns: u * &self.frame.columns })
    }
}

/// N×n matrix with orthonormal columns spanning a projector's support.
#[derive(Debug, Clone)]
pub struct Frame {
    columns: CMatrix,
}

impl Frame {
    pub fn new(columns: CMatrix) -> Result<Self> {
        let residual = (columns.adjoint() * &columns - identity(columns.ncols())).norm();
        if residual > ORTHONORMAL_TOL {
            return Err(QslError::NotOrthonormal { residual });
        }
        Ok(Frame { columns })
    }

    pub fn columns(&self) -> &CMatrix {
        &self.columns
    }

    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    pub fn projector(&self) -> Projector {
        Projector::from_frame(self.clone())
    }

    /// Right-multiplies the frame by a unitary on the reference space.
    pub fn regauged(&self, u: &CMatrix) -> Frame {
        Frame { columns: &self.columns * u }
    }
}

/// Principal angles between two equal-rank projectors, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAngleSet {
    pub angles: Vec<f64>,
}

impl PrincipalAngleSet {
    /// √(Σ ξ_j²).
    pub fn root_sum_square(&self) -> f64 {
        self.angles.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn check_pair(p0: &Projector, p1: &Projector) -> Result<()> {
    if p0.dim() != p1.dim() {
        return Err(QslError::DimensionMismatch { expected: p0.dim(), found: p1.dim() });
    }
    if p0.rank() != p1.rank() {
        return Err(QslError::RankMismatch { expected: p0.rank(), found: p1.rank() });
    }
    Ok(())
}

#[inline]
fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Fubini–Study distance arccos√tr(ρ₀ρ₁) between pure states.
pub fn fs_distance_pure(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    for rho in [rho0, rho1] {
        if !rho.is_pure() {
            return Err(QslError::NotPure { rank: rho.rank() });
        }
    }
    rho0.check_dim(rho1.dim())?;
    let psi0 = rho0.support_frame();
    let psi1 = rho1.support_frame();
    let overlap = (psi0.adjoint() * &psi1)[(0, 0)];
    let sin = (&psi1 - &psi0 * overlap).norm();
    Ok(hybrid_angle(overlap.norm(), sin))
}

/// Grassmann distance √(tr arccos²|P₀P₁| − (π²/4)(N−n)).
///
/// |P₀P₁| has rank at most n, so its N−n smallest singular values are taken
/// as exact zeros. Each of the n remaining arccos terms is evaluated through
/// the matching singular value of (1−P₀)P₁ when the angle is small, where
/// arccos is ill conditioned.
pub fn grassmann_distance(p0: &Projector, p1: &Projector) -> Result<f64> {
    check_pair(p0, p1)?;
    let n_dim = p0.dim();
    let rank = p0.rank();
    let cosines = linalg::singular_values(&(p0.matrix() * p1.matrix()));
    let complement = identity(n_dim) - p0.matrix();
    let mut sines = linalg::singular_values(&(complement * p1.matrix()));
    sines.truncate(rank);
    sines.reverse();
    let mut tr_arccos_sq = 0.0;
    for k in 0..n_dim {
        let angle = if k < rank { hybrid_angle(cosines[k], sines[k]) } else { FRAC_PI_2 };
        tr_arccos_sq += angle * angle;
    }
    let d2 = tr_arccos_sq - FRAC_PI_2.powi(2) * (n_dim - rank) as f64;
    Ok(d2.max(0.0).sqrt())
}

fn hybrid_angle(cos: f64, sin: f64) -> f64 {
    if cos * cos <= 0.5 {
        clamp_unit(cos).acos()
    } else {
        clamp_unit(sin).asin()
    }
}

/// Frame form √(tr arccos²|F₀†F₁|).
///
/// The eigenvalues of |F₀†F₁| are the cosines of the CS decomposition of the
/// pair of frames; the matching sines are the singular values of
/// F₁ − F₀F₀†F₁, and each arccos is taken through the better conditioned of
/// the two.
pub fn grassmann_distance_frames(f0: &Frame, f1: &Frame) -> Result<f64> {
    if f0.rank() != f1.rank() {
        return Err(QslError::RankMismatch { expected: f0.rank(), found: f1.rank() });
    }
    let (a, b) = (f0.columns(), f1.columns());
    let overlap = a.adjoint() * b;
    let cosines = linalg::singular_values(&overlap);
    let mut sines = linalg::singular_values(&(b - a * &overlap));
    sines.reverse();
    let sum: f64 = cosines.iter().zip(&sines).map(|(&c, &s)| hybrid_angle(c, s).powi(2)).sum();
    Ok(sum.sqrt())
}

/// Principal angles from the singular values of F₀†F₁ (cosines) and of
/// (1−P₀)F₁ (sines); each angle uses whichever is better conditioned.
pub fn principal_angles(p0: &Projector, p1: &Projector) -> Result<PrincipalAngleSet> {
    check_pair(p0, p1)?;
    let f0 = p0.frame().columns();
    let f1 = p1.frame().columns();
    let cosines = linalg::singular_values(&(f0.adjoint() * f1));
    let mut sines = linalg::singular_values(&((identity(p0.dim()) - p0.matrix()) * f1));
    sines.reverse();
    let mut angles: Vec<f64> = cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| hybrid_angle(c, s))
        .collect();
    angles.sort_by(|a, b| b.total_cmp(a));
    Ok(PrincipalAngleSet { angles })
}

/// A Grassmann geodesic t ↦ exp(−iHt) P₀ exp(iHt), t ∈ [0, 1], with H
/// horizontal at P₀.
#[derive(Debug, Clone)]
pub struct GrassmannGeodesic {
    pub start: Projector,
    pub hamiltonian: Observable,
    pub angles: Vec<f64>,
}

impl GrassmannGeodesic {
    pub fn at(&self, t: f64) -> Projector {
        let u = linalg::unitary_exp(self.hamiltonian.matrix(), t);
        self.start.conjugated(&u)
    }

    /// √(½ tr H²), the constant speed and the length over [0, 1].
    pub fn length(&self) -> f64 {
        (0.5 * linalg::trace_product(self.hamiltonian.matrix(), self.hamiltonian.matrix()).re)
            .max(0.0)
            .sqrt()
    }
}

/// Sines below this are treated as a shared direction of both supports.
const SHARED_DIRECTION_TOL: f64 = 1e-13;

/// Shortest geodesic from `p0` to `p1` built from principal vectors.
///
/// With F₀†F₁ = U cos(Ξ) V†, the principal vectors a_k = F₀Ue_k and
/// b_k = F₁Ve_k satisfy b_k = cos ξ_k a_k + sin ξ_k c_k with c_k in the
/// kernel of P₀; H rotates each (a_k, c_k) plane by ξ_k. Directions shared by
/// both supports (ξ_k = 0) and the common kernel are left invariant, which is
/// the common-invariant-subspace reduction needed when 2n > N.
pub fn grassmann_geodesic(p0: &Projector, p1: &Projector) -> Result<GrassmannGeodesic> {
    check_pair(p0, p1)?;
    let n_dim = p0.dim();
    let f0 = p0.frame().columns();
    let f1 = p1.frame().columns();
    let complement = identity(n_dim) - p0.matrix();
    let mut h = CMatrix::zeros(n_dim, n_dim);
    let mut angles = Vec::with_capacity(p0.rank());
    if p0.rank() > 0 {
        let (u, cosines, v) = linalg::svd(&(f0.adjoint() * f1));
        let a_all = f0 * u;
        let b_all = f1 * v;
        for k in 0..p0.rank() {
            let a = a_all.column(k).into_owned();
            let r = &complement * b_all.column(k);
            let s = r.norm();
            let xi = s.atan2(cosines[k]);
            angles.push(xi);
            if s < SHARED_DIRECTION_TOL {
                continue;
            }
            let cvec = r.unscale(s);
            let ca = &cvec * a.adjoint();
            h += (&ca * I - ca.adjoint() * I).scale(xi);
        }
    }
    angles.sort_by(|a, b| b.total_cmp(a));
    Ok(GrassmannGeodesic {
        start: p0.clone(),
        hamiltonian: Observable::from_hermitian_part(&h),
        angles,
    })
}

/// Projectors onto the nonzero eigenspaces of two isospectral states, paired
/// by position in the shared descending eigenvalue list.
pub fn paired_eigenspaces(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<Vec<(f64, Projector, Projector)>> {
    rho0.check_dim(rho1.dim())?;
    if !rho0.is_isospectral(rho1, ISOSPECTRAL_TOL) {
        return Err(QslError::NotIsospectral);
    }
    Ok(rho0
        .nonzero_eigenspaces()
        .zip(rho1.nonzero_eigenspaces())
        .map(|((p, _, f0), (_, _, f1))| {
            (p, Frame { columns: f0.clone() }.projector(), Frame { columns: f1.clone() }.projector())
        })
        .collect())
}

/// √(Σ_j p_j dist²_G(P_{j;0}, P_{j;1})) over the nonzero eigenspaces.
pub fn product_grassmann_distance(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    let mut total = 0.0;
    for (p, a, b) in paired_eigenspaces(rho0, rho1)? {
        total += p * grassmann_distance(&a, &b)?.powi(2);
    }
    Ok(total.max(0.0).sqrt())
}

/// √(Σ_j p_j arccos²|det F_{j;0}†F_{j;1}|) over the nonzero eigenspaces.
pub fn product_plucker_distance(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    let mut total = 0.0;
    for (p, a, b) in paired_eigenspaces(rho0, rho1)? {
        total += p * plucker_distance(&a, &b)?.powi(2);
    }
    Ok(total.max(0.0).sqrt())
}

/// Fubini–Study distance of the Plücker images, arccos|det F₀†F₁|.
///
/// |det F₀†F₁| = Π cos ξ_k over the principal angles; 1 − Π cos ξ_k is
/// formed through expm1 so that nearly coincident subspaces keep full
/// relative accuracy.
pub fn plucker_distance(p0: &Projector, p1: &Projector) -> Result<f64> {
    let angles = principal_angles(p0, p1)?.angles;
    if angles.iter().any(|&xi| xi >= FRAC_PI_2) {
        return Ok(FRAC_PI_2);
    }
    let log_det: f64 = angles.iter().map(|xi| xi.cos().ln()).sum();
    let one_minus = -log_det.exp_m1();
    Ok(2.0 * (0.5 * one_minus).clamp(0.0, 1.0).sqrt().asin())
}

/// tr|√ρ₀√ρ₁|, evaluated as the nuclear norm of √ρ₀√ρ₁.
pub fn fidelity_sqrt(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    rho0.check_dim(rho1.dim())?;
    let product = rho0.sqrt() * rho1.sqrt();
    Ok(clamp_unit(linalg::singular_values(&product).iter().sum()))
}

/// arccos tr|√ρ₀√ρ₁|, evaluated as 2 arcsin(d/2) with d the distance
/// ‖√ρ₀ − √ρ₁X‖ between optimally aligned amplitudes, which stays accurate
/// for nearby states.
pub fn bures_angle(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    rho0.check_dim(rho1.dim())?;
    let w0 = rho0.sqrt();
    let w1 = rho1.sqrt();
    let (u, _, v) = linalg::svd(&(&w0 * &w1));
    let d = (&w0 - w1 * v * u.adjoint()).norm();
    Ok(chord_angle(d))
}

/// Angle subtended by a chord of length `d` on the unit sphere.
fn chord_angle(d: f64) -> f64 {
    2.0 * (0.5 * d).clamp(0.0, 1.0).asin()
}

/// tr(√ρ₀√ρ₁).
pub fn affinity(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    rho0.check_dim(rho1.dim())?;
    Ok(clamp_unit(linalg::trace_product(&rho0.sqrt(), &rho1.sqrt()).re))
}

/// arccos tr(√ρ₀√ρ₁), evaluated as 2 arcsin(‖√ρ₀ − √ρ₁‖_F / 2).
pub fn wy_distance(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    rho0.check_dim(rho1.dim())?;
    Ok(chord_angle((rho0.sqrt() - rho1.sqrt()).norm()))
}
