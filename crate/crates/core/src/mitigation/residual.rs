//! Residual-entropy correction referenced to the fully measured point.
//!
//! At `p = η = 1` every noiseless trajectory ends in a product state, so any
//! entropy measured there is attributed to hardware noise. Assuming the
//! spurious entropy is linear in the circuit error, the contribution at any
//! other point is the reference entropy scaled by the ratio of mean circuit
//! errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::DensityMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualScheme {
    #[default]
    Off,
    /// Subtract the reference entropy scaled by the circuit-error ratio.
    Linear,
    /// Subtract the reference entropy unscaled.
    Trivial,
}

/// `max(0, s − ratio · s_ref)`.
pub fn residual_entropy_correct(s_alpha: f64, s_ref: f64, mean_error_ratio: f64) -> Result<f64> {
    if !(s_ref >= 0.0) {
        return Err(Error::invalid(format!("reference entropy must be non-negative, got {s_ref}")));
    }
    if !(mean_error_ratio >= 0.0) {
        return Err(Error::invalid(format!("error ratio must be non-negative, got {mean_error_ratio}")));
    }
    Ok((s_alpha - mean_error_ratio * s_ref).max(0.0))
}

/// `⟨E[C_{p,η}]⟩ / ⟨E[C_{1,1}]⟩`. A reference without error only makes sense
/// when the point has none either.
pub fn error_ratio(mean_error: f64, mean_error_ref: f64) -> Result<f64> {
    if mean_error_ref > 0.0 {
        Ok(mean_error / mean_error_ref)
    } else if mean_error == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::invalid("reference circuit error is zero"))
    }
}

pub fn apply_scheme(scheme: ResidualScheme, s_alpha: f64, s_ref: f64, mean_error_ratio: f64) -> Result<f64> {
    match scheme {
        ResidualScheme::Off => Ok(s_alpha),
        ResidualScheme::Linear => residual_entropy_correct(s_alpha, s_ref, mean_error_ratio),
        ResidualScheme::Trivial => residual_entropy_correct(s_alpha, s_ref, 1.0),
    }
}

/// Synthetic stand-ins for gate noise, driven by a trajectory's circuit error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SyntheticNoise {
    /// Adds `slope · E[C]` bits to the entropy.
    LinearEntropy { slope: f64 },
    /// Global depolarizing of the subsystem state with weight `min(1, E[C])`.
    Depolarizing,
}

impl SyntheticNoise {
    pub fn validate(&self) -> Result<()> {
        match self {
            SyntheticNoise::LinearEntropy { slope } if !(*slope >= 0.0) => {
                Err(Error::invalid(format!("noise slope must be non-negative, got {slope}")))
            }
            _ => Ok(()),
        }
    }

    /// Density-matrix level noise; identity for the entropy-level model.
    pub fn apply_state(&self, rho: &DensityMatrix, circuit_error: f64) -> DensityMatrix {
        match self {
            SyntheticNoise::LinearEntropy { .. } => rho.clone(),
            SyntheticNoise::Depolarizing => rho.depolarized(circuit_error),
        }
    }

    /// Entropy-level noise applied after the entropy is computed.
    pub fn apply_entropy(&self, s: f64, circuit_error: f64) -> f64 {
        match self {
            SyntheticNoise::LinearEntropy { slope } => s + slope * circuit_error,
            SyntheticNoise::Depolarizing => s,
        }
    }
}
