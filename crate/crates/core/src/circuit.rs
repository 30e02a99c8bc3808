//! Hybrid random circuits on an open chain.
//!
//! One time step is two brickwork layers of two-qubit gates (pairs `(0,1),
//! (2,3), …` then `(1,2), (3,4), …`) followed by a measurement layer in which
//! each qubit is measured independently with probability `p`. Every two-qubit
//! gate is a pair of Haar-random single-qubit rotations followed by a CX of
//! random direction.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::renyi_entropy;
use crate::error::{Error, Result};
use crate::qsim::{gates, KrausPair, Mat2, Mat4, StateVector, C64};
use crate::rng::{rng_from_seed, TrajectorySeeds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementKind {
    Projective,
    Weak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CxDirection {
    LowControlsHigh,
    HighControlsLow,
}

/// Haar-random element of U(2), up to global phase.
pub fn sample_haar_1q<R: Rng + ?Sized>(rng: &mut R) -> Mat2 {
    let mut g = || C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let (a, b) = (g(), g());
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / norm, b / norm);
    let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let phase = C64::from_polar(1.0, phi);
    Mat2::new(a, -b.conj() * phase, b, a.conj() * phase)
}

/// Two-qubit gate on `(low, low + 1)`: `u_left` on `low`, `u_right` on
/// `low + 1`, then a CX.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitGateSpec {
    pub low: usize,
    pub u_left: Mat2,
    pub u_right: Mat2,
    pub cx_direction: CxDirection,
}

impl TwoQubitGateSpec {
    fn sample<R: Rng + ?Sized>(low: usize, rng: &mut R) -> Self {
        let u_left = sample_haar_1q(rng);
        let u_right = sample_haar_1q(rng);
        let cx_direction = if rng.random_bool(0.5) {
            CxDirection::LowControlsHigh
        } else {
            CxDirection::HighControlsLow
        };
        Self { low, u_left, u_right, cx_direction }
    }

    /// 4×4 matrix in the `(low + 1, low)` convention of
    /// [`StateVector::apply_2q`].
    pub fn matrix(&self) -> Mat4 {
        let rotations = gates::kron2(&self.u_right, &self.u_left);
        let cx = match self.cx_direction {
            CxDirection::LowControlsHigh => gates::cx_reversed(),
            CxDirection::HighControlsLow => gates::cx(),
        };
        cx * rotations
    }

    pub fn high(&self) -> usize {
        self.low + 1
    }
}

/// Gates and measurements of one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSpec {
    pub layer_a: Vec<TwoQubitGateSpec>,
    pub layer_b: Vec<TwoQubitGateSpec>,
    /// Measured qubits in ascending order.
    pub measured: Vec<usize>,
}

/// Parameters of the circuit ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub l: usize,
    pub t: usize,
    pub p: f64,
    pub eta: f64,
    pub kind: MeasurementKind,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::invalid(format!("chain length {} < 2", self.l)));
        }
        if self.t < 1 {
            return Err(Error::invalid("need at least one time step"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("measurement rate {} outside [0, 1]", self.p)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid(format!("measurement strength {} outside [0, 1]", self.eta)));
        }
        Ok(())
    }

    pub fn with_depth(self, t: usize) -> Self {
        Self { t, ..self }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    pub params: CircuitParams,
    pub layers: Vec<StepSpec>,
    pub seed: u64,
}

/// Sample a circuit. Steps are drawn sequentially from one stream, so the
/// first `k` steps of a depth-`T` circuit coincide with the depth-`k` circuit
/// for the same seed.
pub fn sample_circuit(params: CircuitParams, seed: u64) -> Result<CircuitSpec> {
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let l = params.l;
    let layers = (0..params.t)
        .map(|_| {
            let layer_a = (0..l - 1).step_by(2).map(|q| TwoQubitGateSpec::sample(q, &mut rng)).collect();
            let layer_b = (1..l - 1).step_by(2).map(|q| TwoQubitGateSpec::sample(q, &mut rng)).collect();
            let measured = (0..l).filter(|_| rng.random_bool(params.p)).collect();
            StepSpec { layer_a, layer_b, measured }
        })
        .collect();
    Ok(CircuitSpec { params, layers, seed })
}

impl CircuitSpec {
    pub fn l(&self) -> usize {
        self.params.l
    }

    pub fn measurement_count(&self) -> usize {
        self.layers.iter().map(|s| s.measured.len()).sum()
    }
}

/// How weak measurements are carried out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeakPath {
    /// Apply the Kraus operators directly.
    #[default]
    Kraus,
    /// Couple to an ancilla per system qubit (qubit `L + j` for site `j`),
    /// measure it and reset it.
    Ancilla,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub step: usize,
    pub qubit: usize,
    pub outcome: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    /// System state. Ancillas, if any, are traced out (they are always
    /// reset to `|0⟩`).
    pub final_state: StateVector,
    pub measurement_outcomes: Vec<MeasurementRecord>,
}

pub fn run_trajectory(circuit: &CircuitSpec, seed: u64) -> Result<TrajectoryRecord> {
    run_trajectory_observed(circuit, seed, WeakPath::Kraus, |_, _| {})
}

pub fn run_trajectory_with(circuit: &CircuitSpec, seed: u64, path: WeakPath) -> Result<TrajectoryRecord> {
    run_trajectory_observed(circuit, seed, path, |_, _| {})
}

/// Run a trajectory from `|0…0⟩`, calling `observe(step, state)` after every
/// completed time step (`step` counted from 1).
pub fn run_trajectory_observed<F>(
    circuit: &CircuitSpec,
    seed: u64,
    path: WeakPath,
    mut observe: F,
) -> Result<TrajectoryRecord>
where
    F: FnMut(usize, &StateVector),
{
    let params = circuit.params;
    let l = params.l;
    let ancilla = params.kind == MeasurementKind::Weak && path == WeakPath::Ancilla;
    let n_total = if ancilla { 2 * l } else { l };
    let mut state = StateVector::zero(n_total);
    let mut rng = rng_from_seed(seed);
    let kraus = KrausPair::null_type(params.eta)?;
    let mut outcomes = Vec::with_capacity(circuit.measurement_count());

    for (step, spec) in circuit.layers.iter().enumerate() {
        for gate in spec.layer_a.iter().chain(&spec.layer_b) {
            state.apply_2q_unchecked(&gate.matrix(), gate.high(), gate.low);
        }
        for &q in &spec.measured {
            let outcome = match params.kind {
                MeasurementKind::Projective => state.measure_z(q, &mut rng)?,
                MeasurementKind::Weak if ancilla => {
                    state.apply_weak_ancilla(params.eta, q, l + q, &mut rng)?.as_bit()
                }
                MeasurementKind::Weak => state.apply_weak_kraus(&kraus, q, &mut rng)?.as_bit(),
            };
            outcomes.push(MeasurementRecord { step, qubit: q, outcome });
        }
        if ancilla {
            observe(step + 1, &strip_ancillas(&state, l));
        } else {
            observe(step + 1, &state);
        }
    }
    let final_state = if ancilla { strip_ancillas(&state, l) } else { state };
    Ok(TrajectoryRecord { final_state, measurement_outcomes: outcomes })
}

/// Drop ancilla qubits `l..2l`, all of which are in `|0⟩`.
fn strip_ancillas(state: &StateVector, l: usize) -> StateVector {
    let amps = state.amplitudes()[..1 << l].to_vec();
    StateVector::from_amplitudes(amps).expect("ancillas are reset after every measurement")
}

/// Result of [`saturation_depth`].
#[derive(Clone, Debug, PartialEq)]
pub struct SaturationDepth {
    pub t_sat: usize,
    /// Ensemble-mean half-chain entropy after each step `1..=8L`.
    pub mean_curve: Vec<f64>,
}

/// Smallest depth at which the ensemble-mean half-chain `S_α` reaches 95% of
/// its value at `4L` steps.
///
/// Member `i` uses [`TrajectorySeeds::member`]`(seed, i)`. Fails with a
/// diagnostic if the curve is still rising between `4L` and `8L` steps by
/// more than three standard errors beyond the 95% band.
pub fn saturation_depth(
    l: usize,
    p: f64,
    eta: f64,
    kind: MeasurementKind,
    alpha: f64,
    ensemble_size: usize,
    seed: u64,
) -> Result<SaturationDepth> {
    if ensemble_size < 50 {
        return Err(Error::invalid(format!("ensemble size {ensemble_size} < 50")));
    }
    let horizon = 8 * l;
    let params = CircuitParams { l, t: horizon, p, eta, kind };
    params.validate()?;
    let half: Vec<usize> = (0..l / 2).collect();
    let curves: Vec<Vec<f64>> = (0..ensemble_size)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let seeds = TrajectorySeeds::member(seed, i);
            let circuit = sample_circuit(params, seeds.circuit)?;
            let mut curve = Vec::with_capacity(horizon);
            let mut err = None;
            run_trajectory_observed(&circuit, seeds.outcomes, WeakPath::Kraus, |_, s| {
                match s.reduced_density_matrix(&half).and_then(|rho| renyi_entropy(&rho, alpha)) {
                    Ok(v) => curve.push(v),
                    Err(e) => err = Some(e),
                }
            })?;
            match err {
                Some(e) => Err(e),
                None => Ok(curve),
            }
        })
        .collect::<Result<_>>()?;

    let n = ensemble_size as f64;
    let mean_curve: Vec<f64> =
        (0..horizon).map(|t| curves.iter().map(|c| c[t]).sum::<f64>() / n).collect();
    let at = |t: usize| mean_curve[t - 1];
    let plateau = at(4 * l);
    let late = at(horizon);
    let late_se = {
        let var = curves.iter().map(|c| (c[horizon - 1] - late).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    if 0.95 * late - plateau > 3.0 * late_se {
        return Err(Error::Diagnostic(format!(
            "entropy not saturated: mean {plateau:.4} at 4L = {} vs {late:.4} at 8L",
            4 * l
        )));
    }
    let t_sat = (1..=4 * l).find(|&t| at(t) >= 0.95 * plateau).unwrap_or(4 * l);
    Ok(SaturationDepth { t_sat, mean_curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: usize, t: usize, p: f64) -> CircuitParams {
        CircuitParams { l, t, p, eta: 1.0, kind: MeasurementKind::Projective }
    }

    #[test]
    fn haar_unitary() {
        let mut rng = rng_from_seed(9);
        for _ in 0..100 {
            let u = sample_haar_1q(&mut rng);
            let dev = (u * u.adjoint() - Mat2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-12);
        }
    }

    #[test]
    fn brickwork_pairs_on_open_chain() {
        let c = sample_circuit(params(4, 2, 0.3), 1).unwrap();
        for step in &c.layers {
            assert_eq!(step.layer_a.iter().map(|g| g.low).collect::<Vec<_>>(), vec![0, 2]);
            assert_eq!(step.layer_b.iter().map(|g| g.low).collect::<Vec<_>>(), vec![1]);
        }
        let c = sample_circuit(params(5, 1, 0.3), 1).unwrap();
        assert_eq!(c.layers[0].layer_a.iter().map(|g| g.low).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(c.layers[0].layer_b.iter().map(|g| g.low).collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn measurement_rate_extremes() {
        let c = sample_circuit(params(6, 5, 0.0), 3).unwrap();
        assert!(c.layers.iter().all(|s| s.measured.is_empty()));
        let c = sample_circuit(params(6, 5, 1.0), 3).unwrap();
        assert!(c.layers.iter().all(|s| s.measured == (0..6).collect::<Vec<_>>()));
    }

    #[test]
    fn rejects_short_chain_and_bad_rates() {
        assert!(sample_circuit(params(1, 1, 0.5), 0).is_err());
        assert!(sample_circuit(params(3, 1, 1.5), 0).is_err());
        assert!(sample_circuit(params(3, 0, 0.5), 0).is_err());
    }

    #[test]
    fn prefix_property() {
        let long = sample_circuit(params(5, 10, 0.4), 77).unwrap();
        let short = sample_circuit(params(5, 4, 0.4), 77).unwrap();
        assert_eq!(&long.layers[..4], &short.layers[..]);
    }

    #[test]
    fn full_projection_gives_basis_state() {
        let c = sample_circuit(params(5, 3, 1.0), 4).unwrap();
        let rec = run_trajectory(&c, 8).unwrap();
        assert_eq!(rec.measurement_outcomes.len(), c.measurement_count());
        let nonzero = rec.final_state.amplitudes().iter().filter(|a| a.norm() > 1e-12).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn deterministic_under_seed() {
        let c1 = sample_circuit(params(4, 4, 0.5), 10).unwrap();
        let c2 = sample_circuit(params(4, 4, 0.5), 10).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(run_trajectory(&c1, 2).unwrap(), run_trajectory(&c2, 2).unwrap());
    }

    #[test]
    fn projective_saturation_is_immediate() {
        let s = saturation_depth(4, 1.0, 1.0, MeasurementKind::Projective, 1.0, 50, 1).unwrap();
        assert_eq!(s.t_sat, 1);
        assert!(s.mean_curve.iter().all(|&v| v == 0.0));
        assert!(saturation_depth(4, 0.1, 1.0, MeasurementKind::Projective, 1.0, 10, 1).is_err());
    }
}
