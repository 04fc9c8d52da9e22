//! Unitary evolution of states under Hamiltonian schedules, trajectory
//! functionals (average energy uncertainty, metric speeds and lengths),
//! saturating Hamiltonians, and the g_p geodesic integrator with its
//! boundary-value search.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QslError, Result};
use crate::geometry::{self, Frame};
use crate::linalg::{self, c, CMatrix, I};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::random;
use crate::states::{self, DensityOperator, Observable};

pub type HamiltonianFn = Arc<dyn Fn(f64) -> Observable + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ScheduleDescriptor {
    Constant,
    /// Knot times; each knot's Hamiltonian is held from the midpoint with the
    /// previous knot to the midpoint with the next.
    Piecewise { knots: Vec<f64> },
    ClosedForm { tag: String },
}

/// t ↦ H_t.
#[derive(Clone)]
pub struct HamiltonianSchedule {
    evaluator: HamiltonianFn,
    descriptor: ScheduleDescriptor,
    dim: usize,
}

impl fmt::Debug for HamiltonianSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSchedule")
            .field("descriptor", &self.descriptor)
            .field("dim", &self.dim)
            .finish()
    }
}

impl HamiltonianSchedule {
    pub fn constant(h: Observable) -> Self {
        let dim = h.dim();
        HamiltonianSchedule { evaluator: Arc::new(move |_| h.clone()), descriptor: ScheduleDescriptor::Constant, dim }
    }

    pub fn piecewise(knots: Vec<(f64, Observable)>) -> Result<Self> {
        let Some(first) = knots.first() else {
            return Err(QslError::InvalidArgument("piecewise schedule needs at least one knot".into()));
        };
        let dim = first.1.dim();
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 || !w[1].0.is_finite() {
                return Err(QslError::InvalidArgument("knot times must be finite and strictly increasing".into()));
            }
        }
        if let Some((_, h)) = knots.iter().find(|(_, h)| h.dim() != dim) {
            return Err(QslError::DimensionMismatch { expected: dim, found: h.dim() });
        }
        let times: Vec<f64> = knots.iter().map(|(t, _)| *t).collect();
        let values: Vec<Observable> = knots.into_iter().map(|(_, h)| h).collect();
        let lookup = times.clone();
        let evaluator = move |t: f64| {
            let k = lookup.partition_point(|&s| s <= t);
            let idx = if k == 0 {
                0
            } else if k == lookup.len() || t - lookup[k - 1] <= lookup[k] - t {
                k - 1
            } else {
                k
            };
            values[idx].clone()
        };
        Ok(HamiltonianSchedule {
            evaluator: Arc::new(evaluator),
            descriptor: ScheduleDescriptor::Piecewise { knots: times },
            dim,
        })
    }

    pub fn closed_form<F>(tag: impl Into<String>, dim: usize, f: F) -> Self
    where
        F: Fn(f64) -> Observable + Send + Sync + 'static,
    {
        HamiltonianSchedule { evaluator: Arc::new(f), descriptor: ScheduleDescriptor::ClosedForm { tag: tag.into() }, dim }
    }

    pub fn at(&self, t: f64) -> Observable {
        (self.evaluator)(t)
    }

    pub fn descriptor(&self) -> &ScheduleDescriptor {
        &self.descriptor
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Sampled curve of states with the Hamiltonian at each sample.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityOperator>,
    hamiltonians: Vec<Observable>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<DensityOperator>, hamiltonians: Vec<Observable>) -> Result<Self> {
        if times.is_empty() {
            return Err(QslError::EmptyTrajectory);
        }
        if states.len() != times.len() || hamiltonians.len() != times.len() {
            return Err(QslError::InvalidArgument("trajectory lists must have equal length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QslError::InvalidArgument("trajectory times must be increasing".into()));
        }
        Ok(Trajectory { times, states, hamiltonians })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn hamiltonians(&self) -> &[Observable] {
        &self.hamiltonians
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_state(&self) -> &DensityOperator {
        &self.states[0]
    }

    pub fn final_state(&self) -> &DensityOperator {
        &self.states[self.states.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Largest deviation of any sample's eigenvalues from the first sample's,
    /// computed from the sample matrices.
    pub fn spectral_drift(&self) -> f64 {
        let reference = linalg::eigh(self.states[0].matrix()).0;
        self.states
            .iter()
            .map(|s| {
                let vals = linalg::eigh(s.matrix()).0;
                vals.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// ρ_{k+1} = U_k ρ_k U_k† with U_k = exp(−i H(t_k + dt/2) dt).
pub fn evolve(rho0: &DensityOperator, schedule: &HamiltonianSchedule, t0: f64, t1: f64, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(QslError::InvalidArgument("steps must be at least 1".into()));
    }
    if !(t1 > t0) {
        return Err(QslError::InvalidArgument(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    rho0.check_dim(schedule.dim())?;
    let dt = (t1 - t0) / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states_out = Vec::with_capacity(steps + 1);
    let mut hamiltonians = Vec::with_capacity(steps + 1);
    let mut rho = rho0.clone();
    for k in 0..=steps {
        let t = if k == steps { t1 } else { t0 + k as f64 * dt };
        times.push(t);
        hamiltonians.push(schedule.at(t));
        states_out.push(rho.clone());
        if k < steps {
            let h_mid = schedule.at(t + 0.5 * dt);
            rho = rho.conjugated(&linalg::unitary_exp(h_mid.matrix(), dt));
        }
    }
    Trajectory::new(times, states_out, hamiltonians)
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

/// ΔE, the trapezoidal time average of Δ(H_t, ρ_t).
pub fn average_energy_uncertainty(traj: &Trajectory) -> Result<f64> {
    if traj.is_empty() {
        return Err(QslError::EmptyTrajectory);
    }
    let values = traj
        .hamiltonians
        .iter()
        .zip(&traj.states)
        .map(|(h, rho)| states::uncertainty(h, rho))
        .collect::<Result<Vec<f64>>>()?;
    if traj.len() == 1 {
        return Ok(values[0]);
    }
    Ok(trapezoid(&traj.times, &values) / traj.duration())
}

/// Trapezoidal time average of √F(H_t, ρ_t), the denominator of the Fröwis
/// bound.
pub fn average_sqrt_qfi(traj: &Trajectory) -> Result<f64> {
    let values = traj
        .hamiltonians
        .iter()
        .zip(&traj.states)
        .map(|(h, rho)| Ok(states::quantum_fisher_information(h, rho)?.sqrt()))
        .collect::<Result<Vec<f64>>>()?;
    if traj.len() == 1 {
        return Ok(values[0]);
    }
    Ok(trapezoid(&traj.times, &values) / traj.duration())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    FsPure,
    GrassmannProduct,
    Bures,
    Wy,
    Gp,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::FsPure, Metric::GrassmannProduct, Metric::Bures, Metric::Wy, Metric::Gp];

    pub fn name(self) -> &'static str {
        match self {
            Metric::FsPure => "fs-pure",
            Metric::GrassmannProduct => "grassmann-product",
            Metric::Bures => "bures",
            Metric::Wy => "wy",
            Metric::Gp => "gp",
        }
    }

    /// Whether the metric's speed is defined at `rho`.
    pub fn applies_to(self, rho: &DensityOperator) -> bool {
        match self {
            Metric::FsPure => rho.is_pure(),
            Metric::Wy => rho.is_faithful(),
            _ => true,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = QslError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| QslError::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

/// Speed of ρ̇ = −i[H, ρ] in the given metric.
pub fn metric_speed(rho: &DensityOperator, h: &Observable, metric: Metric) -> Result<f64> {
    match metric {
        Metric::FsPure => {
            if !rho.is_pure() {
                return Err(QslError::MetricPrecondition(format!("fs-pure needs a pure state, rank is {}", rho.rank())));
            }
            states::uncertainty(h, rho)
        }
        Metric::GrassmannProduct => Ok(states::j_functional(h, rho)?.sqrt()),
        Metric::Bures => Ok((states::quantum_fisher_information(h, rho)? / 4.0).sqrt()),
        Metric::Wy => {
            if !rho.is_faithful() {
                return Err(QslError::MetricPrecondition(format!("wy needs a faithful state, rank is {}", rho.rank())));
            }
            Ok((2.0 * states::skew_information(h, rho)?).sqrt())
        }
        Metric::Gp => states::uncertainty(&states::horizontal_part(h, rho)?, rho),
    }
}

/// Trapezoidal integral of the metric speed along the trajectory.
pub fn curve_length(traj: &Trajectory, metric: Metric) -> Result<f64> {
    let speeds = traj
        .hamiltonians
        .iter()
        .zip(&traj.states)
        .map(|(h, rho)| metric_speed(rho, h, metric))
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid(&traj.times, &speeds))
}

/// H = i Σ_{j<σ(j)} (|u_σ(j)⟩⟨u_j| − |u_j⟩⟨u_σ(j)|) in the eigenbasis of ρ₀,
/// indices referring to eigenvalues in descending order. exp(−iHπ/2) swaps
/// each moved pair.
pub fn involution_hamiltonian(rho0: &DensityOperator, sigma: &[usize]) -> Result<Observable> {
    let n = rho0.dim();
    check_permutation(sigma, n)?;
    if sigma.iter().enumerate().any(|(j, &s)| sigma[s] != j) {
        return Err(QslError::NotInvolution);
    }
    if rho0.spectrum().multiplicities.iter().any(|&m| m > 1) {
        return Err(QslError::Degenerate);
    }
    let basis = rho0.eigenbasis();
    let mut h = CMatrix::zeros(n, n);
    for (j, &s) in sigma.iter().enumerate() {
        if j < s {
            let forward = basis.column(s) * basis.column(j).adjoint();
            h += (&forward - forward.adjoint()) * I;
        }
    }
    Ok(Observable::from_hermitian_part(&h))
}

fn check_permutation(sigma: &[usize], n: usize) -> Result<()> {
    if sigma.len() != n {
        return Err(QslError::InvalidPermutation(sigma.len()));
    }
    let mut seen = vec![false; n];
    for &s in sigma {
        if s >= n || seen[s] {
            return Err(QslError::InvalidPermutation(n));
        }
        seen[s] = true;
    }
    Ok(())
}

/// ρ₀ eigenbasis with eigenvalues and eigenspace labels per basis vector.
#[derive(Debug, Clone)]
struct EigenFrame {
    basis: CMatrix,
    probs: Vec<f64>,
    labels: Vec<usize>,
}

impl EigenFrame {
    fn of(rho: &DensityOperator) -> Self {
        let spec = rho.spectrum();
        let mut labels = Vec::with_capacity(rho.dim());
        for (j, &m) in spec.multiplicities.iter().enumerate() {
            labels.extend(std::iter::repeat_n(j, m));
        }
        EigenFrame { basis: rho.eigenbasis(), probs: rho.full_spectrum(), labels }
    }

    fn dim(&self) -> usize {
        self.probs.len()
    }

    fn to_basis(&self, m: &CMatrix) -> CMatrix {
        self.basis.adjoint() * m * &self.basis
    }

    fn from_basis(&self, m: &CMatrix) -> CMatrix {
        &self.basis * m * self.basis.adjoint()
    }

    /// Index pairs (j < k) coupling different eigenspaces.
    fn horizontal_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.dim();
        let mut out = Vec::new();
        for j in 0..n {
            for k in j + 1..n {
                if self.labels[j] != self.labels[k] {
                    out.push((j, k));
                }
            }
        }
        out
    }

    fn zero_vertical(&self, h: &mut CMatrix) {
        let n = self.dim();
        for j in 0..n {
            for k in 0..n {
                if self.labels[j] == self.labels[k] {
                    h[(j, k)] = c(0.0, 0.0);
                }
            }
        }
    }

    /// Right-hand side of the Heisenberg-picture geodesic equation,
    /// (𝐇̇)_{jk} = i (p_k − p_j)/(p_j + p_k) (𝐇²)_{jk} across eigenspaces.
    fn geodesic_rhs(&self, h: &CMatrix) -> CMatrix {
        let n = self.dim();
        let h2 = h * h;
        CMatrix::from_fn(n, n, |j, k| {
            if self.labels[j] == self.labels[k] {
                c(0.0, 0.0)
            } else {
                let (pj, pk) = (self.probs[j], self.probs[k]);
                h2[(j, k)] * c(0.0, (pk - pj) / (pj + pk))
            }
        })
    }

    fn rk4(&self, h: &CMatrix, dt: f64) -> CMatrix {
        let k1 = self.geodesic_rhs(h);
        let k2 = self.geodesic_rhs(&(h + k1.scale(0.5 * dt)));
        let k3 = self.geodesic_rhs(&(h + k2.scale(0.5 * dt)));
        let k4 = self.geodesic_rhs(&(h + k3.scale(dt)));
        let mut out = h + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
        out = (&out + out.adjoint()).scale(0.5);
        self.zero_vertical(&mut out);
        out
    }

    fn energy(&self, h: &CMatrix) -> f64 {
        let n = self.dim();
        let mut total = 0.0;
        for j in 0..n {
            for k in 0..n {
                total += self.probs[j] * h[(j, k)].norm_sqr();
            }
        }
        total.max(0.0)
    }
}

/// One shooting integration in ρ₀-eigenbasis coordinates. Calls `visit`
/// with (t, U_t, 𝐇_t) at every grid point and returns the final U.
fn shoot_in_basis<F: FnMut(f64, &CMatrix, &CMatrix)>(frame: &EigenFrame, h0: &CMatrix, t_final: f64, steps: usize, mut visit: F) -> CMatrix {
    let steps = steps.max(1);
    let dt = t_final / steps as f64;
    let [c1, c2] = linalg::CF4_NODES;
    let mut h = h0.clone();
    // V = U† obeys V̇ = i𝐇V.
    let mut v = linalg::identity(frame.dim());
    visit(0.0, &v, &h);
    for k in 0..steps {
        let h1 = frame.rk4(&h, c1 * dt);
        let h2 = frame.rk4(&h1, (c2 - c1) * dt);
        let h_end = frame.rk4(&h2, (1.0 - c2) * dt);
        v = linalg::cf4_step(&(&h1 * I), &(&h2 * I), dt) * v;
        h = h_end;
        let t = if k + 1 == steps { t_final } else { (k + 1) as f64 * dt };
        visit(t, &v.adjoint(), &h);
    }
    v.adjoint()
}

fn check_horizontal(a0: &Observable, rho0: &DensityOperator) -> Result<()> {
    let split = states::split_observable(a0, rho0)?;
    let residual = split.vertical.norm();
    if residual > 1e-9 * a0.norm().max(1.0) {
        return Err(QslError::NotHorizontal(residual));
    }
    Ok(())
}

/// g_p geodesic from ρ₀ with initial horizontal Hamiltonian `a0`, over
/// [0, T]. The Heisenberg-picture Hamiltonian is integrated in the ρ₀
/// eigenbasis with RK4 sub-steps to the Gauss nodes, U_t by a fourth-order
/// commutator-free Magnus step; samples carry H_t = U 𝐇 U† and ρ_t = U ρ₀ U†.
pub fn gp_geodesic_shoot(rho0: &DensityOperator, a0: &Observable, t_final: f64, steps: usize) -> Result<Trajectory> {
    rho0.check_dim(a0.dim())?;
    check_horizontal(a0, rho0)?;
    if !(t_final > 0.0) || steps == 0 {
        return Err(QslError::InvalidArgument("need T > 0 and steps ≥ 1".into()));
    }
    let frame = EigenFrame::of(rho0);
    let mut h0 = frame.to_basis(a0.matrix());
    frame.zero_vertical(&mut h0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states_out = Vec::with_capacity(steps + 1);
    let mut hamiltonians = Vec::with_capacity(steps + 1);
    shoot_in_basis(&frame, &h0, t_final, steps, |t, u, h| {
        let u_full = frame.from_basis(u);
        times.push(t);
        states_out.push(rho0.conjugated(&u_full));
        let h_full = &u_full * frame.from_basis(h) * u_full.adjoint();
        hamiltonians.push(Observable::from_hermitian_part(&h_full));
    });
    Trajectory::new(times, states_out, hamiltonians)
}

/// ‖(Ḣ − iH²)ρ + ρ(Ḣ + iH²)‖_F at each interior sample, with Ḣ by central
/// differences.
pub fn geodesic_residuals(traj: &Trajectory) -> Vec<f64> {
    let hs = traj.hamiltonians();
    let ts = traj.times();
    (1..traj.len().saturating_sub(1))
        .map(|k| {
            let hdot = (hs[k + 1].matrix() - hs[k - 1].matrix()).unscale(ts[k + 1] - ts[k - 1]);
            let h2 = hs[k].matrix() * hs[k].matrix();
            let rho = traj.states()[k].matrix();
            ((&hdot - &h2 * I) * rho + rho * (&hdot + &h2 * I)).norm()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GpOptions {
    /// Random restarts on top of the two deterministic seeds.
    pub restarts: usize,
    /// Integration steps for the final check of each candidate.
    pub steps: usize,
    /// Integration steps inside the optimizer.
    pub search_steps: usize,
    /// Objective evaluations per optimizer run.
    pub max_evals: usize,
    pub endpoint_tol: f64,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for GpOptions {
    fn default() -> Self {
        GpOptions { restarts: 8, steps: 2000, search_steps: 64, max_evals: 4000, endpoint_tol: 1e-6, seed: 0, parallel: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathSource {
    Identical,
    Shooting,
    StraightPath,
}

/// Converged curves within this of the lower bound end the search.
const CERTIFIED_GAP: f64 = 1e-9;

/// Result of the g_p boundary-value search.
#[derive(Debug, Clone, Serialize)]
pub struct GpDistance {
    /// Product-Grassmann distance, a rigorous lower bound.
    pub lower: f64,
    /// Length of the best connecting curve found.
    pub upper: f64,
    /// Duration of `generator`'s curve; shooting curves are normalized to
    /// unit g_p speed, so this is their length; `upper` is that length
    /// raised to `lower` when the shot lands within tolerance just below it.
    pub best_t: f64,
    /// Whether a geodesic reaching ρ₁ within the endpoint tolerance was found.
    pub converged: bool,
    pub source: PathSource,
    pub endpoint_defect: f64,
    /// Initial Hamiltonian of the best curve (horizontal at ρ₀ for shooting).
    #[serde(skip)]
    pub generator: Observable,
}

/// Unitary carrying ρ₀ onto ρ₁, eigenspace by eigenspace, chosen closest to
/// the identity within each eigenspace.
fn aligning_unitary(rho0: &DensityOperator, rho1: &DensityOperator) -> CMatrix {
    let n = rho0.dim();
    let mut w = CMatrix::zeros(n, n);
    for (f0, f1) in rho0.spectrum().frames.iter().zip(&rho1.spectrum().frames) {
        let (u, _, v) = linalg::svd(&(f0.adjoint() * f1));
        w += f1 * v * u.adjoint() * f0.adjoint();
    }
    w
}

struct ShootProblem {
    frame: EigenFrame,
    pairs: Vec<(usize, usize)>,
    target: CMatrix,
}

impl ShootProblem {
    fn params_to_h(&self, x: &[f64]) -> CMatrix {
        let n = self.frame.dim();
        let mut h = CMatrix::zeros(n, n);
        for (idx, &(j, k)) in self.pairs.iter().enumerate() {
            let z = c(x[2 * idx], x[2 * idx + 1]);
            h[(j, k)] = z;
            h[(k, j)] = z.conj();
        }
        h
    }

    fn h_to_params(&self, h: &CMatrix) -> Vec<f64> {
        self.pairs.iter().flat_map(|&(j, k)| [h[(j, k)].re, h[(j, k)].im]).collect()
    }

    fn defect(&self, h0: &CMatrix, steps: usize) -> f64 {
        let u = shoot_in_basis(&self.frame, h0, 1.0, steps, |_, _, _| {});
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.frame.dim(),
            self.frame.probs.iter().map(|&p| c(p, 0.0)),
        ));
        (&u * d * u.adjoint() - &self.target).norm()
    }

    /// Nelder–Mead on the squared endpoint defect, restarted from its own
    /// best point while that keeps improving.
    fn solve(&self, start: Vec<f64>, opts: &GpOptions) -> (Vec<f64>, f64) {
        let scale = start.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
        let mut x = start;
        let mut best = f64::INFINITY;
        let mut step = 0.1 * scale / (x.len().max(1) as f64).sqrt();
        let target = (0.05 * opts.endpoint_tol).powi(2);
        for _round in 0..6 {
            let nm = NelderMeadOptions {
                max_evals: opts.max_evals,
                f_target: target,
                f_spread_tol: 1e-30,
                x_tol: 1e-13 * scale,
                initial_step: step,
            };
            let m = nelder_mead(|p| self.defect(&self.params_to_h(p), opts.search_steps).powi(2), &x, &nm);
            let improved = m.value < 0.5 * best;
            if m.value < best {
                best = m.value;
                x = m.x;
            }
            if best <= target || !improved {
                break;
            }
            step = (best.sqrt() * scale).clamp(1e-10, step);
        }
        (x, best.sqrt())
    }
}

/// Upper and lower bounds on the g_p distance between isospectral states.
///
/// The lower bound is the product-Grassmann distance. The upper bound is
/// the shortest geodesic found by shooting (initial horizontal Hamiltonian
/// optimized by Nelder–Mead, T = 1) from three kinds of start: the Grassmann
/// geodesic generator of the top eigenspace, the horizontal part of the
/// logarithm of an eigenframe-aligning unitary, and `restarts` random
/// tangents. The random tangents are skipped when a start already reaches
/// ρ₁ with length equal to the lower bound. If no shot reaches ρ₁, the g_p length of the path generated
/// by that logarithm is returned with `converged = false`.
pub fn gp_distance_numeric(rho0: &DensityOperator, rho1: &DensityOperator, opts: &GpOptions) -> Result<GpDistance> {
    let lower = geometry::product_grassmann_distance(rho0, rho1)?;
    let n = rho0.dim();
    if (rho0.matrix() - rho1.matrix()).norm() < 1e-14 {
        return Ok(GpDistance {
            lower: 0.0,
            upper: 0.0,
            best_t: 0.0,
            converged: true,
            source: PathSource::Identical,
            endpoint_defect: 0.0,
            generator: Observable::zeros(n),
        });
    }

    let frame = EigenFrame::of(rho0);
    let problem = ShootProblem {
        pairs: frame.horizontal_pairs(),
        target: frame.to_basis(rho1.matrix()),
        frame,
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let (_, _, f0) = rho0.nonzero_eigenspaces().next().expect("a state has a nonzero eigenvalue");
    let (_, _, f1) = rho1.nonzero_eigenspaces().next().expect("isospectral");
    let g0 = Frame::new(f0.clone())?.projector();
    let g1 = Frame::new(f1.clone())?.projector();
    let grassmann = geometry::grassmann_geodesic(&g0, &g1)?;
    starts.push(problem.h_to_params(&problem.frame.to_basis(grassmann.hamiltonian.matrix())));

    let straight = Observable::from_hermitian_part(&linalg::unitary_log(&aligning_unitary(rho0, rho1)));
    let straight_h = states::horizontal_part(&straight, rho0)?;
    starts.push(problem.h_to_params(&problem.frame.to_basis(straight_h.matrix())));

    let run = |x: &Vec<f64>| {
        let (best, _) = problem.solve(x.clone(), opts);
        let h = problem.params_to_h(&best);
        let defect = problem.defect(&h, opts.steps);
        let length = problem.frame.energy(&h).sqrt();
        (h, defect, length)
    };
    let shortest = |results: &[(CMatrix, f64, f64)]| {
        results
            .iter()
            .filter(|(_, d, _)| *d <= opts.endpoint_tol)
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .cloned()
    };

    // A converged curve as short as the lower bound is a minimizer; the
    // random restarts can only tie it.
    let mut results: Vec<(CMatrix, f64, f64)> = starts.iter().map(run).collect();
    let certified = shortest(&results).is_some_and(|(_, _, length)| length <= lower + CERTIFIED_GAP);
    if !certified {
        let mut r = random::rng(opts.seed);
        let dim = 2 * problem.pairs.len();
        let mut restarts: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts);
        for _ in 0..opts.restarts {
            let mut x: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let h = problem.params_to_h(&x);
            let speed = problem.frame.energy(&h).sqrt().max(1e-12);
            let scale = lower.max(1e-3) * (1.0 + r.random::<f64>()) / speed;
            x.iter_mut().for_each(|v| *v *= scale);
            restarts.push(x);
        }
        if opts.parallel {
            results.extend(restarts.par_iter().map(run).collect::<Vec<_>>());
        } else {
            results.extend(restarts.iter().map(run));
        }
    }

    if let Some((h, defect, length)) = shortest(&results) {
        let unit = if length > 0.0 { h.unscale(length) } else { h.clone() };
        return Ok(GpDistance {
            lower,
            upper: length.max(lower),
            best_t: length,
            converged: true,
            source: PathSource::Shooting,
            endpoint_defect: defect,
            generator: Observable::from_hermitian_part(&problem.frame.from_basis(&unit)),
        });
    }

    let fallback = evolve(rho0, &HamiltonianSchedule::constant(straight.clone()), 0.0, 1.0, 512)?;
    let length = curve_length(&fallback, Metric::Gp)?;
    let defect = (fallback.final_state().matrix() - rho1.matrix()).norm();
    Ok(GpDistance {
        lower,
        upper: length.max(lower),
        best_t: 1.0,
        converged: false,
        source: PathSource::StraightPath,
        endpoint_defect: defect,
        generator: straight,
    })
}

/// Schedule whose value at t is the horizontal part of H_t relative to the
/// state ρ_t of `traj`. Between samples ρ_t is the left sample advanced by
/// the partial midpoint step.
pub fn parallel_transport_projection(schedule: &HamiltonianSchedule, traj: &Trajectory) -> HamiltonianSchedule {
    let schedule = schedule.clone();
    let times = traj.times.clone();
    let states_at = traj.states.clone();
    let dim = schedule.dim();
    HamiltonianSchedule::closed_form("parallel-transport", dim, move |t| {
        let k = times.partition_point(|&s| s <= t).saturating_sub(1).min(times.len() - 1);
        let rho = if k + 1 < times.len() && t > times[k] {
            let dt = times[k + 1] - times[k];
            let h_mid = schedule.at(times[k] + 0.5 * dt);
            states_at[k].conjugated(&linalg::unitary_exp(h_mid.matrix(), t - times[k]))
        } else {
            states_at[k].clone()
        };
        states::horizontal_part(&schedule.at(t), &rho).expect("dimensions checked at construction")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bures_angle, fs_distance_pure, product_grassmann_distance, wy_distance};
    use crate::linalg::{basis_op, cr, diag, ket_bra, pauli};
    use crate::random::{random_density, random_hermitian, random_isospectral_pair, random_spectrum, rng};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn dens(m: CMatrix) -> DensityOperator {
        DensityOperator::new(&m).unwrap()
    }

    fn obs(m: CMatrix) -> Observable {
        Observable::new(&m).unwrap()
    }

    fn qubit_near_pure(p: f64) -> (DensityOperator, DensityOperator, Observable) {
        let plus = ket_bra(&[cr(FRAC_1_SQRT_2), cr(FRAC_1_SQRT_2)]);
        let minus = ket_bra(&[cr(FRAC_1_SQRT_2), cr(-FRAC_1_SQRT_2)]);
        let h = (basis_op(2, 1, 0) - basis_op(2, 0, 1)) * I;
        (dens(diag(&[p, 1.0 - p])), dens(plus.scale(p) + minus.scale(1.0 - p)), obs(h))
    }

    #[test]
    fn commuting_hamiltonian_is_stationary() {
        let rho = dens(diag(&[0.6, 0.3, 0.1]));
        let traj = evolve(&rho, &HamiltonianSchedule::constant(obs(diag(&[1.0, -2.0, 0.5]))), 0.0, 3.0, 50).unwrap();
        assert!((traj.final_state().matrix() - rho.matrix()).norm() < 1e-14);
        assert!(average_energy_uncertainty(&traj).unwrap() > 0.0);
        for m in [Metric::GrassmannProduct, Metric::Bures, Metric::Wy, Metric::Gp] {
            assert!(curve_length(&traj, m).unwrap() < 1e-12);
        }
    }

    #[test]
    fn qubit_near_pure_drive() {
        let (rho0, rho1, h) = qubit_near_pure(0.97);
        let traj = evolve(&rho0, &HamiltonianSchedule::constant(h), 0.0, FRAC_PI_4, 100).unwrap();
        assert!((traj.final_state().matrix() - rho1.matrix()).norm() < 1e-12);
        assert!((average_energy_uncertainty(&traj).unwrap() - 1.0).abs() < 1e-12);
        assert!((curve_length(&traj, Metric::GrassmannProduct).unwrap() - FRAC_PI_4).abs() < 1e-12);
        assert!(traj.spectral_drift() < 1e-12);
    }

    #[test]
    fn involution_examples() {
        let rho = dens(diag(&[0.5, 0.3, 0.2]));
        let h = involution_hamiltonian(&rho, &[0, 1, 2]).unwrap();
        assert!(h.norm() == 0.0);

        let q = dens(diag(&[0.7, 0.3]));
        let h = involution_hamiltonian(&q, &[1, 0]).unwrap();
        let traj = evolve(&q, &HamiltonianSchedule::constant(h.clone()), 0.0, FRAC_PI_2, 64).unwrap();
        assert!((traj.final_state().matrix() - diag(&[0.3, 0.7])).norm() < 1e-12);
        assert!((average_energy_uncertainty(&traj).unwrap() - 1.0).abs() < 1e-12);

        let r4 = dens(diag(&[0.4, 0.3, 0.2, 0.1]));
        let h = involution_hamiltonian(&r4, &[1, 0, 3, 2]).unwrap();
        let second = linalg::trace_product(&(h.matrix() * h.matrix()), r4.matrix()).re;
        assert!((second - 1.0).abs() < 1e-14);
        assert!(states::expectation(&h, &r4).unwrap().abs() < 1e-15);

        assert!(matches!(involution_hamiltonian(&rho, &[1, 2, 0]), Err(QslError::NotInvolution)));
        assert!(matches!(involution_hamiltonian(&rho, &[0, 0, 2]), Err(QslError::InvalidPermutation(_))));
        let degenerate = dens(diag(&[0.4, 0.4, 0.2]));
        assert!(matches!(involution_hamiltonian(&degenerate, &[2, 1, 0]), Err(QslError::Degenerate)));
    }

    #[test]
    fn involution_on_random_basis() {
        let mut r = rng(31);
        let spectrum = random_spectrum(&mut r, 5);
        let rho = random_isospectral_pair(&mut r, &spectrum).0;
        let sigma = [3, 1, 4, 0, 2];
        let h = involution_hamiltonian(&rho, &sigma).unwrap();
        let traj = evolve(&rho, &HamiltonianSchedule::constant(h), 0.0, FRAC_PI_2, 10).unwrap();
        let basis = rho.eigenbasis();
        let want: CMatrix = (0..5).fold(CMatrix::zeros(5, 5), |acc, j| {
            acc + ket_bra(&basis.column(sigma[j]).iter().copied().collect::<Vec<_>>()).scale(spectrum[j])
        });
        assert!((traj.final_state().matrix() - want).norm() < 1e-12);
        let moved: f64 = spectrum.iter().enumerate().filter(|(j, _)| sigma[*j] != *j).map(|(_, p)| p).sum();
        assert!((average_energy_uncertainty(&traj).unwrap() - moved.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn metric_speed_examples() {
        let rho = dens(diag(&[0.8, 0.2]));
        let x = obs(pauli::x());
        assert!((metric_speed(&rho, &x, Metric::Bures).unwrap() - 0.6).abs() < 1e-12);
        assert!((metric_speed(&rho, &x, Metric::Gp).unwrap() - 1.0).abs() < 1e-12);
        assert!((metric_speed(&rho, &x, Metric::Wy).unwrap() - 0.4f64.sqrt()).abs() < 1e-12);
        assert!(matches!(metric_speed(&rho, &x, Metric::FsPure), Err(QslError::MetricPrecondition(_))));
        let pure = dens(basis_op(2, 0, 0));
        assert!(matches!(metric_speed(&pure, &x, Metric::Wy), Err(QslError::MetricPrecondition(_))));
        for m in [Metric::FsPure, Metric::GrassmannProduct, Metric::Gp, Metric::Bures] {
            assert!((metric_speed(&pure, &x, m).unwrap() - 1.0).abs() < 1e-12);
        }
        let z = obs(pauli::z());
        for m in [Metric::GrassmannProduct, Metric::Bures, Metric::Wy, Metric::Gp] {
            assert!(metric_speed(&rho, &z, m).unwrap() < 1e-12);
        }
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("nope".parse::<Metric>().is_err());
    }

    /// Closed-form speed against (distance over h)/h at two step sizes.
    #[test]
    fn speeds_match_finite_differences() {
        let mut r = rng(32);
        let rho = random_density(&mut r, 3, 3);
        let h = obs(random_hermitian(&mut r, 3));
        let advance = |dt: f64| rho.conjugated(&linalg::unitary_exp(h.matrix(), dt));
        let cases: [(Metric, fn(&DensityOperator, &DensityOperator) -> Result<f64>); 3] = [
            (Metric::Bures, bures_angle),
            (Metric::Wy, wy_distance),
            (Metric::GrassmannProduct, product_grassmann_distance),
        ];
        for (metric, dist) in cases {
            let speed = metric_speed(&rho, &h, metric).unwrap();
            let err = |dt: f64| (dist(&rho, &advance(dt)).unwrap() / dt - speed).abs();
            let (e1, e2) = (err(1e-3), err(5e-4));
            assert!(e1 < 1e-2 && e2 <= e1 * 0.75 + 1e-9, "{metric}: {e1} {e2}");
        }
        let pure = random_density(&mut r, 3, 1);
        let speed = metric_speed(&pure, &h, Metric::FsPure).unwrap();
        let moved = pure.conjugated(&linalg::unitary_exp(h.matrix(), 1e-4));
        assert!((fs_distance_pure(&pure, &moved).unwrap() / 1e-4 - speed).abs() < 1e-3);
    }

    #[test]
    fn piecewise_schedule_switches_at_midpoints() {
        let s = HamiltonianSchedule::piecewise(vec![(0.0, obs(pauli::x())), (1.0, obs(pauli::z()))]).unwrap();
        assert_eq!(s.at(-1.0).matrix(), &pauli::x());
        assert_eq!(s.at(0.49).matrix(), &pauli::x());
        assert_eq!(s.at(0.51).matrix(), &pauli::z());
        assert_eq!(s.at(7.0).matrix(), &pauli::z());
        assert!(HamiltonianSchedule::piecewise(vec![]).is_err());
        assert!(HamiltonianSchedule::piecewise(vec![(1.0, obs(pauli::x())), (0.0, obs(pauli::z()))]).is_err());
    }

    #[test]
    fn evolve_second_order() {
        let mut r = rng(33);
        let rho = random_density(&mut r, 3, 2);
        let a = random_hermitian(&mut r, 3);
        let b = random_hermitian(&mut r, 3);
        let sched = HamiltonianSchedule::closed_form("test", 3, move |t| Observable::from_hermitian_part(&(&a + b.scale(t.sin()))));
        let end = |n| evolve(&rho, &sched, 0.0, 1.0, n).unwrap().final_state().matrix().clone();
        let reference = end(4096);
        let e1 = (end(32) - &reference).norm();
        let e2 = (end(64) - &reference).norm();
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn qutrit_swap_geodesic() {
        let rho = dens(diag(&[0.5, 0.3, 0.2]));
        let a0 = obs((basis_op(3, 2, 0) - basis_op(3, 0, 2)) * I);
        let traj = gp_geodesic_shoot(&rho, &a0, FRAC_PI_2, 200).unwrap();
        assert!((traj.final_state().matrix() - diag(&[0.2, 0.3, 0.5])).norm() < 1e-10);
        let length = curve_length(&traj, Metric::Gp).unwrap();
        assert!((length - FRAC_PI_2 * 0.7f64.sqrt()).abs() < 1e-9);
        // H² commutes with ρ₀, so 𝐇 stays put and H_t = A0.
        for h in traj.hamiltonians() {
            assert!((h.matrix() - a0.matrix()).norm() < 1e-10);
        }
    }

    #[test]
    fn shooting_rejects_vertical_tangent() {
        let rho = dens(diag(&[0.5, 0.3, 0.2]));
        assert!(matches!(gp_geodesic_shoot(&rho, &obs(diag(&[1.0, 0.0, 0.0])), 1.0, 10), Err(QslError::NotHorizontal(_))));
        let traj = gp_geodesic_shoot(&rho, &Observable::zeros(3), 1.0, 10).unwrap();
        assert!((traj.final_state().matrix() - rho.matrix()).norm() < 1e-15);
    }

    #[test]
    fn shooting_general_tangent_is_geodesic() {
        let mut r = rng(34);
        let rho = random_density(&mut r, 4, 3);
        let a0 = states::horizontal_part(&obs(random_hermitian(&mut r, 4)), &rho).unwrap();
        let traj = gp_geodesic_shoot(&rho, &a0, 1.0, 400).unwrap();
        let speed0 = metric_speed(&rho, &a0, Metric::Gp).unwrap();
        for (h, s) in traj.hamiltonians().iter().zip(traj.states()) {
            assert!((metric_speed(s, h, Metric::Gp).unwrap() - speed0).abs() < 1e-6);
        }
        // The residual uses central differences of H_t, so it shrinks as dt².
        let worst = |t: &Trajectory| geodesic_residuals(t).into_iter().fold(0.0, f64::max);
        let fine = gp_geodesic_shoot(&rho, &a0, 1.0, 800).unwrap();
        let (e1, e2) = (worst(&traj), worst(&fine));
        assert!(e1 < 1e-2 && e1 / e2 > 3.5, "{e1} {e2}");
        assert!(traj.spectral_drift() < 1e-12);
        // Shooting curves are horizontal: H_t equals its horizontal part.
        for (h, s) in traj.hamiltonians().iter().zip(traj.states()).step_by(50) {
            assert!(states::split_observable(h, s).unwrap().vertical.norm() < 1e-8);
        }
    }

    #[test]
    fn gp_distance_identical() {
        let rho = dens(diag(&[0.5, 0.3, 0.2]));
        let d = gp_distance_numeric(&rho, &rho, &GpOptions::default()).unwrap();
        assert_eq!((d.lower, d.upper), (0.0, 0.0));
    }

    #[test]
    fn gp_distance_two_eigenvalues() {
        let (rho0, rho1, _) = qubit_near_pure(0.8);
        let d = gp_distance_numeric(&rho0, &rho1, &GpOptions { restarts: 2, ..Default::default() }).unwrap();
        assert!(d.converged);
        assert!((d.lower - FRAC_PI_4).abs() < 1e-12);
        assert!((d.upper - FRAC_PI_4).abs() < 1e-6, "{d:?}");
    }

    #[test]
    fn parallel_transport_strips_vertical_part() {
        let mut r = rng(35);
        let rho = random_density(&mut r, 3, 3);
        let a = random_hermitian(&mut r, 3);
        let b = random_hermitian(&mut r, 3);
        let sched = HamiltonianSchedule::closed_form("test", 3, move |t| Observable::from_hermitian_part(&(&a + b.scale(t))));
        let traj = evolve(&rho, &sched, 0.0, 1.0, 400).unwrap();
        let pt = parallel_transport_projection(&sched, &traj);
        let traj2 = evolve(&rho, &pt, 0.0, 1.0, 400).unwrap();
        assert!((traj.final_state().matrix() - traj2.final_state().matrix()).norm() < 1e-4);
        for (k, rho_k) in traj.states().iter().enumerate().step_by(40) {
            let t = traj.times()[k];
            let full = states::uncertainty(&sched.at(t), rho_k).unwrap();
            let horizontal = states::uncertainty(&pt.at(t), rho_k).unwrap();
            assert!(horizontal <= full + 1e-12);
            assert!(states::split_observable(&pt.at(t), rho_k).unwrap().vertical.norm() < 1e-10);
        }
        // A scalar shift is stripped entirely.
        let h = obs(pauli::x());
        let q = dens(diag(&[0.8, 0.2]));
        let shifted = HamiltonianSchedule::closed_form("shift", 2, move |t| {
            Observable::from_hermitian_part(&(pauli::x() + linalg::identity(2).scale(t)))
        });
        let tq = evolve(&q, &shifted, 0.0, 1.0, 50).unwrap();
        let pq = parallel_transport_projection(&shifted, &tq);
        assert!((pq.at(0.0).matrix() - h.matrix()).norm() < 1e-12);
    }
}
