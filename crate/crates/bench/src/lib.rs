//! Fixtures shared by the benchmarks.

use qsl_core::dynamics::HamiltonianSchedule;
use qsl_core::random::{random_density, random_hermitian, random_isospectral_pair, random_spectrum, rng};
use qsl_core::{DensityOperator, Observable};

/// A random isospectral pair of full-rank states in dimension `n`.
pub fn isospectral_pair(n: usize, seed: u64) -> (DensityOperator, DensityOperator) {
    let mut r = rng(seed);
    let spectrum = random_spectrum(&mut r, n);
    random_isospectral_pair(&mut r, &spectrum)
}

/// A random state of the given rank with a random constant Hamiltonian.
pub fn state_and_hamiltonian(n: usize, rank: usize, seed: u64) -> (DensityOperator, Observable) {
    let mut r = rng(seed);
    let rho = random_density(&mut r, n, rank);
    let h = Observable::new(&random_hermitian(&mut r, n)).expect("random Hermitian");
    (rho, h)
}

pub fn constant_schedule(h: &Observable) -> HamiltonianSchedule {
    HamiltonianSchedule::constant(h.clone())
}
