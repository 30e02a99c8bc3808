//! Rényi entropies, ensemble statistics and subsystem conventions.
//!
//! All entropies are in bits.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{run_trajectory, sample_circuit, CircuitParams};
use crate::error::{Error, Result};
use crate::qsim::DensityMatrix;
use crate::rng::{rng_from_seed, TrajectorySeeds};

/// Eigenvalues below this are dropped from the entropy sums.
pub const EIGEN_CUTOFF: f64 = 1e-12;

/// `S_α` of a spectrum. `alpha = 1` is the von Neumann limit, `alpha = 0`
/// counts eigenvalues above [`EIGEN_CUTOFF`], `alpha = ∞` is the min-entropy.
pub fn renyi_from_spectrum(eigenvalues: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("Rényi order {alpha} < 0")));
    }
    let total: f64 = eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    let lam: Vec<f64> =
        eigenvalues.iter().map(|&l| l.max(0.0) / total).filter(|&l| l > EIGEN_CUTOFF).collect();
    let s = if alpha == 0.0 {
        (lam.len() as f64).log2()
    } else if alpha == 1.0 {
        -lam.iter().map(|&l| l * l.log2()).sum::<f64>()
    } else if alpha.is_infinite() {
        -lam.iter().copied().fold(0.0, f64::max).log2()
    } else {
        lam.iter().map(|&l| l.powf(alpha)).sum::<f64>().log2() / (1.0 - alpha)
    };
    // -0.0 and rounding noise on pure states.
    Ok(s.max(0.0))
}

pub fn renyi_entropy(rho: &DensityMatrix, alpha: f64) -> Result<f64> {
    renyi_from_spectrum(&rho.eigenvalues(), alpha)
}

/// Mean, variance and bootstrap interval of an entropy ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub alpha: f64,
    pub mean: f64,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    pub n_samples: usize,
}

/// Bootstrap settings used when summarizing an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub level: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self { level: 0.90, n_resamples: 1000, seed: 0 }
    }
}

/// Mean accumulated relative to the first sample, so constant data returns
/// that constant exactly.
pub fn mean(samples: &[f64]) -> f64 {
    let x0 = samples[0];
    x0 + samples.iter().map(|x| x - x0).sum::<f64>() / samples.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(samples: &[f64]) -> f64 {
    let m = mean(samples);
    samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (samples.len() as f64 - 1.0)
}

impl EntropyEstimate {
    pub fn from_samples(alpha: f64, samples: &[f64], boot: BootstrapSpec) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("need at least two samples"));
        }
        let m = mean(samples);
        let (lo, hi) = bootstrap_ci(samples, boot.level, boot.n_resamples, boot.seed)?;
        Ok(Self {
            alpha,
            mean: m,
            variance: sample_variance(samples),
            ci_low: lo.min(m),
            ci_high: hi.max(m),
            ci_level: boot.level,
            n_samples: samples.len(),
        })
    }

    pub fn overlaps(&self, other: &EntropyEstimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Linear-interpolated empirical quantile (order statistics `x_(⌊h⌋)`,
/// `x_(⌈h⌉)` with `h = (n − 1) q`) of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(samples: &[f64], level: f64, n_resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::invalid("bootstrap needs at least two samples"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    if n_resamples < 1 {
        return Err(Error::invalid("need at least one resample"));
    }
    let n = samples.len();
    let mut rng = rng_from_seed(seed);
    let mut buf = vec![0.0; n];
    let mut means: Vec<f64> = (0..n_resamples)
        .map(|_| {
            buf.iter_mut().for_each(|b| *b = samples[rng.random_range(0..n)]);
            mean(&buf)
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&means, tail), quantile_sorted(&means, 1.0 - tail)))
}

/// Which contiguous block starting at qubit 0 is the subsystem `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsystemRule {
    /// `|A| = ⌊L/2⌋`.
    Half,
    /// `|A| = ⌊L/4⌋`.
    QuarterFloor,
    /// `|A| = ⌈L/4⌉`.
    QuarterCeil,
    /// Linear interpolation between the two quarter sizes.
    QuarterInterpolated,
}

pub fn subsystem_size(l: usize, rule: SubsystemRule) -> Result<usize> {
    if l < 2 {
        return Err(Error::invalid(format!("chain length {l} < 2")));
    }
    let size = match rule {
        SubsystemRule::Half => l / 2,
        SubsystemRule::QuarterFloor | SubsystemRule::QuarterInterpolated => l / 4,
        SubsystemRule::QuarterCeil => l.div_ceil(4),
    };
    if size == 0 {
        return Err(Error::invalid(format!("subsystem rule {rule:?} gives an empty subsystem for L = {l}")));
    }
    Ok(size)
}

/// Qubits `0..|A|`. For [`SubsystemRule::QuarterInterpolated`] this is the
/// floor block.
pub fn subsystem_for(l: usize, rule: SubsystemRule) -> Result<Vec<usize>> {
    Ok((0..subsystem_size(l, rule)?).collect())
}

/// Interpolate between `|A| = ⌊L/4⌋` and `⌈L/4⌉` by the fractional part of
/// `L/4`.
pub fn interpolate_quarter(s_floor: f64, s_ceil: f64, l: usize) -> f64 {
    let frac = (l % 4) as f64 / 4.0;
    if frac == 0.0 {
        s_floor
    } else {
        s_floor + frac * (s_ceil - s_floor)
    }
}

/// Entropy of one final state under a subsystem rule, interpolating where the
/// rule asks for it.
pub fn state_entropy(
    state: &crate::qsim::StateVector,
    rule: SubsystemRule,
    alpha: f64,
) -> Result<f64> {
    let l = state.n_qubits();
    match rule {
        SubsystemRule::QuarterInterpolated => {
            let lo = subsystem_for(l, SubsystemRule::QuarterFloor)?;
            let s_lo = renyi_entropy(&state.reduced_density_matrix(&lo)?, alpha)?;
            if l % 4 == 0 {
                return Ok(s_lo);
            }
            let hi = subsystem_for(l, SubsystemRule::QuarterCeil)?;
            let s_hi = renyi_entropy(&state.reduced_density_matrix(&hi)?, alpha)?;
            Ok(interpolate_quarter(s_lo, s_hi, l))
        }
        _ => renyi_entropy(&state.reduced_density_matrix(&subsystem_for(l, rule)?)?, alpha),
    }
}

/// Per-trajectory entropies plus their summary.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleEntropy {
    pub estimate: EntropyEstimate,
    pub samples: Vec<f64>,
}

/// Sample `n_samples` circuits, run one trajectory each, and summarize the
/// subsystem entropy. Member `i` uses [`TrajectorySeeds::member`]`(seed, i)`.
pub fn ensemble_entropy(
    params: CircuitParams,
    rule: SubsystemRule,
    alpha: f64,
    n_samples: usize,
    seed: u64,
    boot: BootstrapSpec,
) -> Result<EnsembleEntropy> {
    if n_samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    params.validate()?;
    let samples: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let seeds = TrajectorySeeds::member(seed, i);
            let circuit = sample_circuit(params, seeds.circuit)?;
            let rec = run_trajectory(&circuit, seeds.outcomes)?;
            state_entropy(&rec.final_state, rule, alpha)
        })
        .collect::<Result<_>>()?;
    let estimate = EntropyEstimate::from_samples(alpha, &samples, boot)?;
    Ok(EnsembleEntropy { estimate, samples })
}
