//! Simulated state tomography.
//!
//! Registers of up to two qubits are measured in all `3^n` product Pauli
//! settings; larger registers use the `2^n + 1` bases of a MUB partition.
//! Either way each setting is a commuting group with a simultaneous
//! eigenbasis, shots are sampled in that basis, Pauli expectations are read
//! off the counts and the state is recovered by constrained least squares.

mod mub;
mod pauli;
mod reconstruct;

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use rand::Rng;

pub use mub::{enumerate_mubs, setting_group, ssqst_settings, MubPartition, MAX_MUB_QUBITS};
pub use pauli::{Pauli, PauliString};
pub use reconstruct::{
    basis_probabilities, exact_expectations, expectations_from_counts, merge_expectations, mub_eigenbasis,
    project_to_density, reconstruct, sample_counts, simulate_shots, Eigenbasis, LinearSystem, IDENTITY_TOL,
};

use crate::error::{Error, Result};
use crate::qsim::{DensityMatrix, StateVector};

/// Registers up to this size use product settings.
pub const SSQST_MAX_QUBITS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TomographyScheme {
    /// All `3^n` product Pauli settings.
    Separable,
    /// `2^n + 1` mutually unbiased bases.
    Mub,
}

impl TomographyScheme {
    pub fn for_size(n: usize) -> Self {
        if n <= SSQST_MAX_QUBITS {
            TomographyScheme::Separable
        } else {
            TomographyScheme::Mub
        }
    }
}

pub fn setting_count(n: usize, scheme: TomographyScheme) -> usize {
    match scheme {
        TomographyScheme::Separable => 3usize.pow(n as u32),
        TomographyScheme::Mub => (1 << n) + 1,
    }
}

static SETTINGS: [OnceLock<Arc<Vec<Eigenbasis>>>; MAX_MUB_QUBITS + 1] = [const { OnceLock::new() }; MAX_MUB_QUBITS + 1];

fn build_settings(n: usize) -> Result<Vec<Eigenbasis>> {
    match TomographyScheme::for_size(n) {
        TomographyScheme::Separable => {
            ssqst_settings(n).iter().map(|letters| mub_eigenbasis(&setting_group(letters))).collect()
        }
        TomographyScheme::Mub => enumerate_mubs(n)?.groups.iter().map(|g| mub_eigenbasis(g)).collect(),
    }
}

/// Measurement bases used for an `n`-qubit register, cached per `n`.
pub fn measurement_settings(n: usize) -> Result<Arc<Vec<Eigenbasis>>> {
    if !(1..=MAX_MUB_QUBITS).contains(&n) {
        return Err(Error::invalid(format!("tomography supports 1..={MAX_MUB_QUBITS} qubits, got {n}")));
    }
    if let Some(s) = SETTINGS[n].get() {
        return Ok(s.clone());
    }
    let built = Arc::new(build_settings(n)?);
    Ok(SETTINGS[n].get_or_init(|| built).clone())
}

/// Tomographic estimate of the reduced state on `subsystem` from `shots`
/// samples per setting. `process` turns raw counts into (quasi-)counts; use
/// it to inject and mitigate readout noise.
pub fn estimate_density_matrix<R, F>(
    state: &StateVector,
    subsystem: &[usize],
    shots: u64,
    rng: &mut R,
    mut process: F,
) -> Result<DensityMatrix>
where
    R: Rng + ?Sized,
    F: FnMut(Vec<u64>, &mut R) -> Result<Vec<f64>>,
{
    let n = subsystem.len();
    let settings = measurement_settings(n)?;
    let rho = state.reduced_density_matrix(subsystem)?;
    let mut parts: Vec<BTreeMap<PauliString, f64>> = Vec::with_capacity(settings.len());
    for basis in settings.iter() {
        let counts = sample_counts(&basis_probabilities(&rho, basis), shots, rng);
        let processed = process(counts, rng)?;
        parts.push(expectations_from_counts(&processed, basis)?);
    }
    reconstruct(n, &merge_expectations(&parts))
}

/// Noiseless convenience wrapper around [`estimate_density_matrix`].
pub fn tomography<R: Rng + ?Sized>(
    state: &StateVector,
    subsystem: &[usize],
    shots: u64,
    rng: &mut R,
) -> Result<DensityMatrix> {
    estimate_density_matrix(state, subsystem, shots, rng, |c, _| Ok(c.into_iter().map(|v| v as f64).collect()))
}
