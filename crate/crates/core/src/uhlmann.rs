//! Uhlmann amplitudes W with WW† = ρ: horizontality, the connection,
//! horizontal lifts, Bures speed and its dispersion gap, Hamiltonians that
//! generate Bures geodesics, and the tightness check for the Uhlmann bound.

use serde::Serialize;

use crate::dynamics::{HamiltonianSchedule, Trajectory};
use crate::error::{QslError, Result};
use crate::linalg::{self, c, identity, CMatrix};
use crate::states::{self, DensityOperator, Observable};

/// Default number of steps for lifts built from a schedule.
pub const DEFAULT_LIFT_STEPS: usize = 4096;

/// N×n amplitude with W†W of rank n and unit trace.
#[derive(Debug, Clone)]
pub struct Amplitude {
    matrix: CMatrix,
}

impl Amplitude {
    pub fn new(w: CMatrix) -> Result<Self> {
        let gram = w.adjoint() * &w;
        let tr = linalg::trace(&gram).re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(QslError::InvalidAmplitude(format!("tr W†W = {tr}")));
        }
        let (vals, _) = linalg::eigh(&linalg::hermitize(&gram)?);
        if let Some(&min) = vals.last() {
            if min < 1e-12 {
                return Err(QslError::InvalidAmplitude(format!("W†W is singular (eigenvalue {min:.3e})")));
            }
        }
        Ok(Amplitude { matrix: w })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn reference_rank(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn gram(&self) -> CMatrix {
        self.matrix.adjoint() * &self.matrix
    }

    /// WW†.
    pub fn density(&self) -> Result<DensityOperator> {
        DensityOperator::new(&(&self.matrix * self.matrix.adjoint()))
    }
}

/// Skew-Hermitian n×n value of the connection.
#[derive(Debug, Clone)]
pub struct ConnectionValue {
    matrix: CMatrix,
}

impl ConnectionValue {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// Support eigenvectors scaled by √p as columns.
pub fn amplitude_of(rho: &DensityOperator) -> Amplitude {
    let mut columns = Vec::with_capacity(rho.rank());
    for (p, _, frame) in rho.nonzero_eigenspaces() {
        for k in 0..frame.ncols() {
            columns.push(frame.column(k).scale(p.sqrt()));
        }
    }
    Amplitude { matrix: CMatrix::from_columns(&columns) }
}

/// (Ẇ†W = W†Ẇ, ‖Ẇ†W − W†Ẇ‖_F).
pub fn is_horizontal(w: &Amplitude, wdot: &CMatrix, tol: f64) -> Result<(bool, f64)> {
    check_velocity(w, wdot)?;
    let m = w.matrix();
    let residual = (wdot.adjoint() * m - m.adjoint() * wdot).norm();
    Ok((residual < tol, residual))
}

fn check_velocity(w: &Amplitude, wdot: &CMatrix) -> Result<()> {
    if wdot.shape() != w.matrix().shape() {
        return Err(QslError::InvalidArgument(format!(
            "velocity shape {:?} does not match amplitude {:?}",
            wdot.shape(),
            w.matrix().shape()
        )));
    }
    Ok(())
}

/// X with W†Ẇ − Ẇ†W = {X, W†W}, solved in the eigenbasis of W†W.
pub fn connection_solve(w: &Amplitude, wdot: &CMatrix) -> Result<ConnectionValue> {
    check_velocity(w, wdot)?;
    let gram = linalg::hermitize(&w.gram())?;
    let (vals, q) = linalg::eigh(&gram);
    if let Some(&min) = vals.last() {
        if min < 1e-12 {
            return Err(QslError::SingularGram(min));
        }
    }
    let m = w.matrix().adjoint() * wdot - wdot.adjoint() * w.matrix();
    let mq = q.adjoint() * m * &q;
    let n = vals.len();
    let xq = CMatrix::from_fn(n, n, |a, b| mq[(a, b)] / (vals[a] + vals[b]));
    let x = &q * xq * q.adjoint();
    Ok(ConnectionValue { matrix: (&x - x.adjoint()).scale(0.5) })
}

/// Horizontal lift W_t V_t of a trajectory, where W_t = U_t W_0 follows the
/// trajectory's midpoint steps and V̇ = −X V removes the connection
/// component. Returns one amplitude per trajectory sample.
pub fn horizontal_lift(traj: &Trajectory, schedule: &HamiltonianSchedule) -> Result<Vec<Amplitude>> {
    traj.initial_state().check_dim(schedule.dim())?;
    let times = traj.times();
    let mut w = amplitude_of(traj.initial_state()).matrix;
    let n = w.ncols();
    let mut v = identity(n);
    let mut out = Vec::with_capacity(times.len());
    out.push(Amplitude { matrix: &w * &v });
    for k in 0..times.len() - 1 {
        let dt = times[k + 1] - times[k];
        let h = schedule.at(times[k] + 0.5 * dt);
        let half = linalg::unitary_exp(h.matrix(), 0.5 * dt);
        let w_mid = &half * &w;
        let velocity = (h.matrix() * &w_mid) * c(0.0, -1.0);
        let x = connection_solve(&Amplitude { matrix: w_mid.clone() }, &velocity)?;
        v = linalg::exp_skew(&x.matrix.scale(-dt)) * v;
        w = &half * w_mid;
        out.push(Amplitude { matrix: &w * &v });
    }
    Ok(out)
}

/// Evolves ρ₀ under the schedule over [t0, t1] and lifts the result.
pub fn lift_schedule(
    rho0: &DensityOperator,
    schedule: &HamiltonianSchedule,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<(Trajectory, Vec<Amplitude>)> {
    let traj = crate::dynamics::evolve(rho0, schedule, t0, t1, steps)?;
    let lift = horizontal_lift(&traj, schedule)?;
    Ok((traj, lift))
}

/// Σ ‖W_{k+1} − W_k‖, the Hilbert–Schmidt length of a sampled lift.
pub fn lift_length(lift: &[Amplitude]) -> f64 {
    lift.windows(2).map(|w| (w[1].matrix() - w[0].matrix()).norm()).sum()
}

/// Bures speed √(F/4) of ρ̇ = −i[H, ρ].
pub fn bures_speed(h: &Observable, rho: &DensityOperator) -> Result<f64> {
    Ok((states::quantum_fisher_information(h, rho)? / 4.0).sqrt())
}

/// Split of the squared velocity of Ẇ = −iHW into its horizontal part and
/// the connection component.
#[derive(Debug, Clone, Serialize)]
pub struct DispersionDecomposition {
    pub variance: f64,
    pub bures_speed_sq: f64,
    /// ‖WX‖² for the full connection value X.
    pub connection_norm_sq: f64,
    /// c = Re tr((−iW)†WX) = ⟨H⟩, the phase component of X.
    pub phase: f64,
    /// ‖WY‖² = ‖WX‖² − c² with Y = X + ic, the part of X that costs speed.
    pub wy_norm_sq: f64,
}

impl DispersionDecomposition {
    /// Δ − Bures speed.
    pub fn gap(&self) -> f64 {
        self.variance.sqrt() - self.bures_speed_sq.sqrt()
    }
}

/// Δ²(H,ρ) = Bures speed² + ‖WY‖², with Y read off the connection.
pub fn dispersion_decomposition(h: &Observable, rho: &DensityOperator) -> Result<DispersionDecomposition> {
    rho.check_dim(h.dim())?;
    let w = amplitude_of(rho);
    let wdot = (h.matrix() * w.matrix()) * c(0.0, -1.0);
    let x = connection_solve(&w, &wdot)?;
    let wx = w.matrix() * x.matrix();
    let connection_norm_sq = wx.norm_squared();
    let phase = ((w.matrix() * c(0.0, -1.0)).adjoint() * &wx).trace().re;
    let y = x.matrix() + identity(x.matrix().nrows()) * c(0.0, phase);
    let wy_norm_sq = (w.matrix() * y).norm_squared();
    let second = (h.matrix() * w.matrix()).norm_squared();
    Ok(DispersionDecomposition {
        variance: states::variance(h, rho)?,
        bures_speed_sq: (second - connection_norm_sq).max(0.0),
        connection_norm_sq,
        phase,
        wy_norm_sq,
    })
}

/// H = B + B† with B = √β Σ_a |k_a⟩⟨s_a|, mapping the support eigenvectors
/// onto the first n kernel eigenvectors. Then Π₀HΠ₀ = (1−Π₀)H(1−Π₀) = 0 and
/// Π₀H(1−Π₀)HΠ₀ = βΠ₀.
pub fn bures_geodesic_hamiltonian(rho0: &DensityOperator, beta: f64) -> Result<Observable> {
    let n_dim = rho0.dim();
    let rank = rho0.rank();
    if 2 * rank > n_dim {
        return Err(QslError::RankTooLarge { rank, dim: n_dim });
    }
    if !(beta > 0.0) {
        return Err(QslError::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let support = rho0.support_frame();
    let kernel = rho0.kernel_frame();
    let b = kernel.columns(0, rank) * support.adjoint() * c(beta.sqrt(), 0.0);
    Ok(Observable::from_hermitian_part(&(&b + b.adjoint())))
}

#[derive(Debug, Clone, Serialize)]
pub struct TightnessReport {
    pub max_deviation: f64,
    pub saturable: bool,
}

/// max_t ‖Π_t H_t Π_t − α_t Π_t‖_F with α_t = tr(Π_t H_t Π_t)/rank.
pub fn uhlmann_tightness_check(traj: &Trajectory, tol: f64) -> TightnessReport {
    let mut max_deviation: f64 = 0.0;
    for (rho, h) in traj.states().iter().zip(traj.hamiltonians()) {
        let pi = rho.support_projector();
        let block = &pi * h.matrix() * &pi;
        let alpha = linalg::trace(&block).re / rho.rank() as f64;
        max_deviation = max_deviation.max((block - pi.scale(alpha)).norm());
    }
    TightnessReport { max_deviation, saturable: max_deviation < tol }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, HamiltonianSchedule};
    use crate::geometry::{bures_angle, fs_distance_pure};
    use crate::linalg::{basis_op, cr, diag, ket_bra, pauli, I};
    use crate::random::{random_complex, random_density, random_density_matrix, random_hermitian, rng};
    use rand::Rng;
    use std::f64::consts::FRAC_PI_4;

    fn dens(m: CMatrix) -> DensityOperator {
        DensityOperator::new(&m).unwrap()
    }

    fn obs(m: CMatrix) -> Observable {
        Observable::new(&m).unwrap()
    }

    #[test]
    fn amplitude_examples() {
        let psi = [cr(0.6), c(0.0, 0.8)];
        let w = amplitude_of(&dens(ket_bra(&psi)));
        assert_eq!(w.reference_rank(), 1);
        let ww = w.matrix() * w.matrix().adjoint();
        assert!((ww - ket_bra(&psi)).norm() < 1e-12);

        let mut r = rng(41);
        let faithful = random_density(&mut r, 4, 4);
        let w = amplitude_of(&faithful);
        assert_eq!(w.reference_rank(), 4);
        assert!((w.matrix() * w.matrix().adjoint() - faithful.matrix()).norm() < 1e-12);

        let rank2 = random_density(&mut r, 3, 2);
        let w = amplitude_of(&rank2);
        assert_eq!(w.matrix().shape(), (3, 2));
        let (gram_vals, _) = linalg::eigh(&w.gram());
        let want = rank2.full_spectrum();
        for (a, b) in gram_vals.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(Amplitude::new(w.matrix().scale(2.0)).is_err());
    }

    #[test]
    fn horizontality_examples() {
        let w = amplitude_of(&dens(basis_op(2, 0, 0)));
        let (ok, res) = is_horizontal(&w, &CMatrix::zeros(2, 1), 1e-12).unwrap();
        assert!(ok && res == 0.0);
        let phase = w.matrix() * c(0.0, -1.0);
        assert!(!is_horizontal(&w, &phase, 1e-12).unwrap().0);
        let x = connection_solve(&w, &phase).unwrap();
        assert!((x.matrix()[(0, 0)] - c(0.0, -1.0)).norm() < 1e-12);

        let mut r = rng(42);
        let rho = dens(diag(&[0.7, 0.3, 0.0, 0.0]));
        let h = bures_geodesic_hamiltonian(&rho, 1.3).unwrap();
        let w = amplitude_of(&rho);
        let wdot = (h.matrix() * w.matrix()) * c(0.0, -1.0);
        assert!(is_horizontal(&w, &wdot, 1e-12).unwrap().0);
        assert!(connection_solve(&w, &wdot).unwrap().matrix().norm() < 1e-12);

        let rho3 = random_density(&mut r, 5, 3);
        let w = amplitude_of(&rho3);
        let wdot = random_complex(&mut r, 5, 3);
        let x = connection_solve(&w, &wdot).unwrap();
        let g = w.gram();
        let lhs = w.matrix().adjoint() * &wdot - wdot.adjoint() * w.matrix();
        let rhs = x.matrix() * &g + &g * x.matrix();
        assert!((lhs - rhs).norm() < 1e-10);
        assert!((x.matrix() + x.matrix().adjoint()).norm() < 1e-12);
    }

    #[test]
    fn singular_gram_rejected() {
        let bad = Amplitude { matrix: CMatrix::from_column_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(0.0)]) };
        assert!(matches!(connection_solve(&bad, &CMatrix::zeros(2, 2)), Err(QslError::SingularGram(_))));
    }

    #[test]
    fn bures_speed_examples() {
        let rho = dens(diag(&[0.8, 0.2]));
        assert!(bures_speed(&obs(pauli::z()), &rho).unwrap() < 1e-12);
        let x = obs(pauli::x());
        assert!((bures_speed(&x, &rho).unwrap() - 0.6).abs() < 1e-12);
        assert!(bures_speed(&x, &rho).unwrap() < states::uncertainty(&x, &rho).unwrap());
        let pure = dens(ket_bra(&[cr(0.6), cr(0.8)]));
        let d = states::uncertainty(&x, &pure).unwrap();
        assert!((bures_speed(&x, &pure).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn dispersion_split_random() {
        let mut r = rng(43);
        for _ in 0..100 {
            let n = r.random_range(1..=6);
            let rank = r.random_range(1..=n);
            let rho = dens(random_density_matrix(&mut r, n, rank));
            let h = obs(random_hermitian(&mut r, n));
            let d = dispersion_decomposition(&h, &rho).unwrap();
            let speed = bures_speed(&h, &rho).unwrap();
            assert!((d.bures_speed_sq - speed * speed).abs() < 1e-10, "{} {}", d.bures_speed_sq, speed * speed);
            assert!((d.variance - d.bures_speed_sq - d.wy_norm_sq).abs() < 1e-10);
            assert!((d.phase - states::expectation(&h, &rho).unwrap()).abs() < 1e-10);
            assert!(d.wy_norm_sq >= -1e-12);
        }
    }

    #[test]
    fn bures_geodesic_examples() {
        let rho = dens(basis_op(2, 0, 0));
        let h = bures_geodesic_hamiltonian(&rho, 1.0).unwrap();
        assert!((h.matrix() * h.matrix() - linalg::identity(2)).norm() < 1e-12);

        let mut r = rng(44);
        let rho = random_density(&mut r, 4, 2);
        let h = bures_geodesic_hamiltonian(&rho, 2.0).unwrap();
        let pi = rho.support_projector();
        let q = linalg::identity(4) - &pi;
        assert!((&pi * h.matrix() * &pi).norm() < 1e-12);
        assert!((&q * h.matrix() * &q).norm() < 1e-12);
        assert!((&pi * h.matrix() * &q * h.matrix() * &pi - pi.scale(2.0)).norm() < 1e-12);

        let rank2 = random_density(&mut r, 3, 2);
        assert!(matches!(bures_geodesic_hamiltonian(&rank2, 1.0), Err(QslError::RankTooLarge { rank: 2, dim: 3 })));
    }

    #[test]
    fn constructor_geodesics_saturate() {
        let mut r = rng(45);
        for (n, rank) in [(2, 1), (4, 2), (5, 2), (6, 3)] {
            let rho = random_density(&mut r, n, rank);
            let h = bures_geodesic_hamiltonian(&rho, 0.7).unwrap();
            let delta = states::uncertainty(&h, &rho).unwrap();
            for t in [1e-3, 1e-2] {
                let moved = rho.conjugated(&linalg::unitary_exp(h.matrix(), t));
                let angle = bures_angle(&rho, &moved).unwrap();
                assert!((angle - t * delta).abs() < 1e-6 * t, "{n} {rank} {t}: {angle} {}", t * delta);
            }
        }
    }

    #[test]
    fn pure_rotation_lift_length() {
        let rho0 = dens(basis_op(2, 0, 0));
        let h = obs((basis_op(2, 1, 0) - basis_op(2, 0, 1)) * I);
        let (traj, lift) = lift_schedule(&rho0, &HamiltonianSchedule::constant(h), 0.0, FRAC_PI_4, 10_000).unwrap();
        let angle = fs_distance_pure(&rho0, traj.final_state()).unwrap();
        assert!((lift_length(&lift) - angle).abs() < 1e-4);
    }

    #[test]
    fn lift_is_horizontal_and_projects() {
        let mut r = rng(46);
        let rho = random_density(&mut r, 4, 2);
        let a = random_hermitian(&mut r, 4);
        let b = random_hermitian(&mut r, 4);
        let sched = HamiltonianSchedule::closed_form("test", 4, move |t| Observable::from_hermitian_part(&(&a + b.scale(t.cos()))));
        let steps = 2000;
        let (traj, lift) = lift_schedule(&rho, &sched, 0.0, 1.0, steps).unwrap();
        for (k, (w, s)) in lift.iter().zip(traj.states()).enumerate() {
            let ww = w.matrix() * w.matrix().adjoint();
            assert!((ww - s.matrix()).norm() < 10.0 * steps as f64 * f64::EPSILON * s.matrix().norm().max(1.0));
            if k + 1 < lift.len() && k > 0 {
                let dt = traj.times()[k + 1] - traj.times()[k - 1];
                let wdot = (lift[k + 1].matrix() - lift[k - 1].matrix()).unscale(dt);
                assert!(is_horizontal(w, &wdot, 1e-4).unwrap().0);
            }
        }
    }

    #[test]
    fn bures_geodesic_lift_is_great_arc() {
        let rho = dens(basis_op(2, 0, 0));
        let beta: f64 = 1.0;
        let h = bures_geodesic_hamiltonian(&rho, beta).unwrap();
        let steps = 1000;
        let (traj, lift) = lift_schedule(&rho, &HamiltonianSchedule::constant(h), 0.0, 1.0, steps).unwrap();
        let dt = traj.times()[1] - traj.times()[0];
        for k in (1..steps).step_by(97) {
            let acc = (lift[k + 1].matrix() - lift[k].matrix().scale(2.0) + lift[k - 1].matrix()).unscale(dt * dt);
            assert!((acc + lift[k].matrix().scale(beta)).norm() < 1e-6);
        }
    }

    #[test]
    fn tightness_examples() {
        let mut r = rng(47);
        let pure = random_density(&mut r, 3, 1);
        let h = obs(random_hermitian(&mut r, 3));
        let traj = evolve(&pure, &HamiltonianSchedule::constant(h.clone()), 0.0, 1.0, 20).unwrap();
        assert!(uhlmann_tightness_check(&traj, 1e-10).saturable);

        let faithful = random_density(&mut r, 3, 3);
        let traj = evolve(&faithful, &HamiltonianSchedule::constant(h), 0.0, 1.0, 20).unwrap();
        let report = uhlmann_tightness_check(&traj, 1e-10);
        assert!(!report.saturable && report.max_deviation > 1e-3);

        let rho = random_density(&mut r, 4, 2);
        let g = bures_geodesic_hamiltonian(&rho, 1.0).unwrap();
        let traj = evolve(&rho, &HamiltonianSchedule::constant(g), 0.0, 0.5, 20).unwrap();
        assert!(uhlmann_tightness_check(&traj, 1e-10).saturable);
    }

    #[test]
    fn gauge_invariance_of_connection_quantities() {
        let mut r = rng(48);
        let rho = random_density(&mut r, 4, 3);
        let h = obs(random_hermitian(&mut r, 4));
        let w = amplitude_of(&rho);
        let u = crate::random::random_unitary(&mut r, 3);
        let w2 = Amplitude::new(w.matrix() * &u).unwrap();
        let vel = |w: &Amplitude| (h.matrix() * w.matrix()) * c(0.0, -1.0);
        let x1 = connection_solve(&w, &vel(&w)).unwrap();
        let x2 = connection_solve(&w2, &vel(&w2)).unwrap();
        let n1 = (w.matrix() * x1.matrix()).norm();
        let n2 = (w2.matrix() * x2.matrix()).norm();
        assert!((n1 - n2).abs() < 1e-12);
    }
}
