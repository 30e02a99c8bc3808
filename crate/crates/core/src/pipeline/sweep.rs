//! Sweep execution.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{DepthPolicy, ExperimentConfig, Observable, SweepMode};
use super::result::{PointRecord, SweepResult};
use crate::circuit::{run_trajectory, sample_circuit, saturation_depth, CircuitParams, CircuitSpec, MeasurementKind};
use crate::entropy::{
    interpolate_quarter, mean, renyi_entropy, subsystem_for, BootstrapSpec, EntropyEstimate, SubsystemRule,
};
use crate::error::Result;
use crate::mitigation::{
    apply_readout_noise, apply_scheme, calibration_matrix, circuit_error, error_ratio, mitigate_counts,
    select_qubits, Calibration, DeviceModel, ErrorRates, GateCounts, Layout, ReadoutNoiseModel, ResidualScheme,
    SyntheticNoise,
};
use crate::qsim::{DensityMatrix, StateVector};
use crate::rng::{rng_from_seed, split_seed, SimRng, TrajectorySeeds};
use crate::tomography::estimate_density_matrix;

/// Stream indices under a point seed.
const STREAM_TRAJECTORIES: u64 = 1;
const STREAM_BOOTSTRAP: u64 = 2;
const STREAM_SATURATION: u64 = 3;
const STREAM_TOMOGRAPHY: u64 = 4;

/// Seed of the point `(L, p, η)`; independent of the grid it sits in, so the
/// same point reproduces across configs with the same master seed.
pub fn point_seed(master: u64, l: usize, p: f64, eta: f64) -> u64 {
    split_seed(split_seed(split_seed(master, l as u64), p.to_bits()), eta.to_bits())
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct PointKey {
    l: usize,
    p: f64,
    eta: f64,
}

/// Per-size physical setup derived from the noise configuration.
struct NoiseSetup {
    rates: ErrorRates,
    /// Readout flip rate of subsystem qubit `k`.
    readout: Vec<f64>,
}

/// Raw per-point output before summarizing and residual correction.
struct RawPoint {
    key: PointKey,
    seed: u64,
    depth: usize,
    samples: Vec<f64>,
    mean_error: f64,
    wall_time: f64,
}

struct Runner<'a> {
    config: &'a ExperimentConfig,
    device: Option<DeviceModel>,
    depth_cache: Mutex<HashMap<(usize, u64, u64), usize>>,
}

fn blocks(l: usize, rule: SubsystemRule) -> Result<Vec<Vec<usize>>> {
    Ok(match rule {
        SubsystemRule::QuarterInterpolated if l % 4 != 0 => vec![
            subsystem_for(l, SubsystemRule::QuarterFloor)?,
            subsystem_for(l, SubsystemRule::QuarterCeil)?,
        ],
        SubsystemRule::QuarterInterpolated => vec![subsystem_for(l, SubsystemRule::QuarterFloor)?],
        r => vec![subsystem_for(l, r)?],
    })
}

impl Runner<'_> {
    fn uses_error_model(&self) -> bool {
        let c = self.config;
        c.noise.as_ref().is_some_and(|n| n.gate.is_some() || n.readout) || c.mitigation.residual != ResidualScheme::Off
    }

    fn depth(&self, key: PointKey, seed: u64) -> Result<usize> {
        match self.config.depth {
            DepthPolicy::Fixed { t } => Ok(t),
            DepthPolicy::Auto => {
                let cache_key = (key.l, key.p.to_bits(), key.eta.to_bits());
                if let Some(&t) = self.depth_cache.lock().expect("depth cache").get(&cache_key) {
                    return Ok(t);
                }
                let t = saturation_depth(
                    key.l,
                    key.p,
                    key.eta,
                    self.config.kind,
                    self.config.alpha,
                    self.config.saturation_ensemble,
                    split_seed(seed, STREAM_SATURATION),
                )?
                .t_sat;
                self.depth_cache.lock().expect("depth cache").insert(cache_key, t);
                Ok(t)
            }
        }
    }

    fn noise_setup(&self, l: usize, counts: &[GateCounts]) -> Result<Option<NoiseSetup>> {
        if !self.uses_error_model() {
            return Ok(None);
        }
        let n_sub = blocks(l, self.config.subsystem)?.last().map_or(0, |b| b.len());
        let noise = self.config.noise.as_ref();
        if let Some(device) = &self.device {
            let layout = match self.config.kind {
                MeasurementKind::Weak => Layout::ChainWithAncillas,
                MeasurementKind::Projective => Layout::Chain,
            };
            let sel = select_qubits(device, counts, l, layout)?;
            let used: Vec<usize> = sel.chain.iter().chain(&sel.ancillas).copied().collect();
            let readout = sel.chain[..n_sub].iter().map(|&q| device.rates[q].ero).collect();
            return Ok(Some(NoiseSetup { rates: device.mean_rates(&used), readout }));
        }
        let rates = noise.and_then(|n| n.rates).unwrap_or(ErrorRates::SMALL_DEVICE);
        Ok(Some(NoiseSetup { rates, readout: vec![rates.ero; n_sub] }))
    }

    fn calibration(&self, setup: Option<&NoiseSetup>, n: usize) -> Result<Option<(ReadoutNoiseModel, Calibration)>> {
        let flips = self.config.noise.as_ref().is_some_and(|c| c.readout);
        if !(flips || self.config.mitigation.readout) {
            return Ok(None);
        }
        let rates = match setup {
            Some(s) if flips => s.readout[..n].to_vec(),
            _ => vec![0.0; n],
        };
        let model = ReadoutNoiseModel::symmetric(&rates)?;
        let cal = calibration_matrix(&model, self.config.calibration_mode(n))?;
        Ok(Some((model, cal)))
    }

    fn block_entropy(
        &self,
        state: &StateVector,
        block: &[usize],
        gate: Option<SyntheticNoise>,
        err: f64,
        readout: Option<&(ReadoutNoiseModel, Calibration)>,
        rng: &mut SimRng,
    ) -> Result<f64> {
        let c = self.config;
        let rho: DensityMatrix = match c.observable {
            Observable::Exact => state.reduced_density_matrix(block)?,
            Observable::Tomographic => {
                let shots = c.shots.expect("validated");
                let flips = c.noise.as_ref().is_some_and(|n| n.readout);
                let mitigate = c.mitigation.readout;
                estimate_density_matrix(state, block, shots, rng, |counts, rng| {
                    let counts = match readout {
                        Some((model, _)) if flips => apply_readout_noise(&counts, model, rng)?,
                        _ => counts,
                    };
                    let raw: Vec<f64> = counts.iter().map(|&v| v as f64).collect();
                    match readout {
                        Some((_, cal)) if mitigate => mitigate_counts(&raw, cal),
                        _ => Ok(raw),
                    }
                })?
            }
        };
        let rho = match gate {
            Some(g) => g.apply_state(&rho, err),
            None => rho,
        };
        let s = renyi_entropy(&rho, c.alpha)?;
        Ok(match gate {
            Some(g) => g.apply_entropy(s, err),
            None => s,
        })
    }

    fn trajectory_entropy(
        &self,
        circuit: &CircuitSpec,
        seeds: TrajectorySeeds,
        err: f64,
        calibrations: &[Option<(ReadoutNoiseModel, Calibration)>],
    ) -> Result<f64> {
        let c = self.config;
        let rec = run_trajectory(circuit, seeds.outcomes)?;
        let gate = c.noise.as_ref().and_then(|n| n.gate);
        let mut rng = rng_from_seed(split_seed(seeds.outcomes, STREAM_TOMOGRAPHY));
        let l = circuit.l();
        let bl = blocks(l, c.subsystem)?;
        let values = bl
            .iter()
            .zip(calibrations)
            .map(|(b, cal)| self.block_entropy(&rec.final_state, b, gate, err, cal.as_ref(), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(match values.as_slice() {
            [s] => *s,
            [lo, hi] => interpolate_quarter(*lo, *hi, l),
            _ => unreachable!("one or two subsystem blocks"),
        })
    }

    fn run_point(&self, key: PointKey) -> Result<RawPoint> {
        let start = Instant::now();
        let c = self.config;
        let seed = point_seed(c.seed, key.l, key.p, key.eta);
        let depth = self.depth(key, seed)?;
        let params = CircuitParams { l: key.l, t: depth, p: key.p, eta: key.eta, kind: c.kind };
        params.validate()?;
        let traj_master = split_seed(seed, STREAM_TRAJECTORIES);
        let members: Vec<TrajectorySeeds> = (0..c.trajectories).map(|i| TrajectorySeeds::member(traj_master, i)).collect();
        let circuits: Vec<CircuitSpec> =
            members.par_iter().map(|s| sample_circuit(params, s.circuit)).collect::<Result<_>>()?;

        let bl = blocks(key.l, c.subsystem)?;
        let tail = bl.last().expect("at least one block");
        let counts: Vec<GateCounts> = if self.uses_error_model() {
            circuits.iter().map(|circ| GateCounts::from_circuit(circ, tail)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let setup = self.noise_setup(key.l, &counts)?;
        let errors: Vec<f64> = match &setup {
            Some(s) => counts.iter().map(|g| circuit_error(g, s.rates)).collect(),
            None => vec![0.0; circuits.len()],
        };
        let calibrations =
            bl.iter().map(|b| self.calibration(setup.as_ref(), b.len())).collect::<Result<Vec<_>>>()?;

        let samples: Vec<f64> = (0..circuits.len())
            .into_par_iter()
            .map(|i| self.trajectory_entropy(&circuits[i], members[i], errors[i], &calibrations))
            .collect::<Result<_>>()?;
        Ok(RawPoint {
            key,
            seed,
            depth,
            samples,
            mean_error: mean(&errors),
            wall_time: start.elapsed().as_secs_f64(),
        })
    }

    fn summarize(&self, raw: RawPoint, reference: Option<&RawPoint>) -> Result<PointRecord> {
        let c = self.config;
        let boot = BootstrapSpec {
            level: c.ci_level(),
            n_resamples: c.bootstrap_resamples,
            seed: split_seed(raw.seed, STREAM_BOOTSTRAP),
        };
        let mut estimate = EntropyEstimate::from_samples(c.alpha, &raw.samples, boot)?;
        let mut shift = 0.0;
        if let (Some(r), scheme) = (reference, c.mitigation.residual) {
            if scheme != ResidualScheme::Off {
                let s_ref = mean(&r.samples).max(0.0);
                let ratio = error_ratio(raw.mean_error, r.mean_error)?;
                let corrected = apply_scheme(scheme, estimate.mean, s_ref, ratio)?;
                shift = estimate.mean - corrected;
                let delta = match scheme {
                    ResidualScheme::Trivial => s_ref,
                    _ => ratio * s_ref,
                };
                estimate.mean = corrected;
                estimate.ci_low = (estimate.ci_low - delta).max(0.0).min(corrected);
                estimate.ci_high = (estimate.ci_high - delta).max(corrected);
            }
        }
        Ok(PointRecord {
            l: raw.key.l,
            p: raw.key.p,
            eta: raw.key.eta,
            kind: c.kind,
            depth: raw.depth,
            seed: raw.seed,
            estimate,
            samples: raw.samples,
            mean_circuit_error: raw.mean_error,
            residual_shift: shift,
            wall_time: raw.wall_time,
        })
    }
}

/// Run every `(L, p, η)` point of the config. Points are processed in grid
/// order (L outer, then p, then η); trajectories within a point run in
/// parallel on per-trajectory seed streams, so the result does not depend on
/// the number of workers.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let device = match config.noise.as_ref().and_then(|n| n.device.as_ref()) {
        Some(path) => Some(DeviceModel::load(path)?),
        None => None,
    };
    let runner = Runner { config, device, depth_cache: Mutex::new(HashMap::new()) };
    let keys: Vec<PointKey> = config
        .sizes
        .iter()
        .flat_map(|&l| config.p.iter().flat_map(move |&p| config.eta_values().into_iter().map(move |eta| PointKey { l, p, eta })))
        .collect();
    let raws = keys.iter().map(|&k| runner.run_point(k)).collect::<Result<Vec<_>>>()?;

    // Residual-entropy references at p = η = 1, reused from the grid if present.
    let mut references: HashMap<usize, RawPoint> = HashMap::new();
    if config.mitigation.residual != ResidualScheme::Off {
        for &l in &config.sizes {
            if references.contains_key(&l) {
                continue;
            }
            let key = PointKey { l, p: 1.0, eta: 1.0 };
            let raw = match raws.iter().find(|r| r.key == key) {
                Some(r) => RawPoint {
                    key,
                    seed: r.seed,
                    depth: r.depth,
                    samples: r.samples.clone(),
                    mean_error: r.mean_error,
                    wall_time: r.wall_time,
                },
                None => runner.run_point(key)?,
            };
            references.insert(l, raw);
        }
    }
    let records = raws
        .into_iter()
        .map(|raw| {
            let reference = references.get(&raw.key.l);
            runner.summarize(raw, reference)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut result = SweepResult::new(config.clone(), records);
    if config.mode == SweepMode::Collapse {
        let p_star = match config.p_star {
            Some(p) => p,
            None => result.variance_peak()?,
        };
        let (fit, _) = super::analyze_collapse(&result.collapse_dataset(p_star)?, &Default::default())?;
        result.collapse = Some(fit);
    }
    Ok(result)
}
