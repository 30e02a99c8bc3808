//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::MeasurementKind;
use crate::entropy::{subsystem_size, SubsystemRule};
use crate::error::{Error, Result};
use crate::mitigation::{CalibrationMode, ErrorRates, ResidualScheme, SyntheticNoise};
use crate::tomography::MAX_MUB_QUBITS;

/// Largest chain simulated unless the config raises the cap.
pub const DEFAULT_MAX_QUBITS: usize = 16;
pub const DEFAULT_TRAJECTORIES: usize = 300;
pub const DEFAULT_SATURATION_ENSEMBLE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    #[serde(rename = "p-sweep")]
    PSweep,
    #[serde(rename = "eta-sweep")]
    EtaSweep,
    #[serde(rename = "L-scaling")]
    LScaling,
    #[serde(rename = "collapse")]
    Collapse,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// Reduced density matrix straight from the statevector.
    #[default]
    Exact,
    /// Shots in every tomography setting followed by reconstruction.
    Tomographic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum DepthPolicy {
    /// Saturation depth of each `(L, p, η)`.
    #[default]
    Auto,
    Fixed { t: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Scalar gate and readout rates.
    pub rates: Option<ErrorRates>,
    /// Device description file; qubits are selected on it per point.
    pub device: Option<PathBuf>,
    /// Synthetic gate-noise model driven by each circuit's error.
    pub gate: Option<SyntheticNoise>,
    /// Flip tomography readout bits at the readout rates.
    #[serde(default)]
    pub readout: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationConfig {
    #[serde(default)]
    pub readout: bool,
    #[serde(default)]
    pub residual: ResidualScheme,
    /// Defaults to complete calibration up to five qubits, tensored beyond.
    pub calibration: Option<CalibrationMode>,
}

fn one() -> f64 {
    1.0
}
fn half() -> SubsystemRule {
    SubsystemRule::Half
}
fn projective() -> MeasurementKind {
    MeasurementKind::Projective
}
fn default_trajectories() -> usize {
    DEFAULT_TRAJECTORIES
}
fn default_resamples() -> usize {
    1000
}
fn default_saturation() -> usize {
    DEFAULT_SATURATION_ENSEMBLE
}
fn default_max_qubits() -> usize {
    DEFAULT_MAX_QUBITS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: SweepMode,
    #[serde(rename = "L")]
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub p: Vec<f64>,
    /// Empty means `[1.0]`.
    #[serde(default)]
    pub eta: Vec<f64>,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "half")]
    pub subsystem: SubsystemRule,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "projective")]
    pub kind: MeasurementKind,
    #[serde(default)]
    pub observable: Observable,
    /// Shots per tomography setting (tomographic observable only).
    pub shots: Option<u64>,
    #[serde(default)]
    pub depth: DepthPolicy,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to 0.98 for η-sweeps and 0.90 otherwise.
    pub ci_level: Option<f64>,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_saturation")]
    pub saturation_ensemble: usize,
    #[serde(default = "default_max_qubits")]
    pub max_qubits: usize,
    /// Critical rate for collapse mode; defaults to the variance peak.
    pub p_star: Option<f64>,
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub mitigation: MitigationConfig,
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| cfg(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // Device files are looked up next to the config.
        if let (Some(dev), Some(dir)) = (c.noise.as_mut().and_then(|n| n.device.as_mut()), path.parent()) {
            if dev.is_relative() {
                *dev = dir.join(&*dev);
            }
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg(e.to_string()))
    }

    pub fn eta_values(&self) -> Vec<f64> {
        if self.eta.is_empty() {
            vec![1.0]
        } else {
            self.eta.clone()
        }
    }

    pub fn ci_level(&self) -> f64 {
        self.ci_level.unwrap_or(match self.mode {
            SweepMode::EtaSweep => 0.98,
            _ => 0.90,
        })
    }

    pub fn calibration_mode(&self, n: usize) -> CalibrationMode {
        self.mitigation.calibration.unwrap_or(if n <= crate::mitigation::COMPLETE_MAX_QUBITS {
            CalibrationMode::Complete
        } else {
            CalibrationMode::Tensored
        })
    }

    /// Number of `(L, p, η)` points.
    pub fn grid_size(&self) -> usize {
        self.sizes.len() * self.p.len() * self.eta_values().len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(cfg("no system sizes (L) given"));
        }
        for &l in &self.sizes {
            if l < 2 {
                return Err(cfg(format!("L = {l} < 2")));
            }
            if l > self.max_qubits {
                return Err(cfg(format!(
                    "L = {l} exceeds the memory cap of {} qubits (raise max_qubits to override)",
                    self.max_qubits
                )));
            }
            subsystem_size(l, self.subsystem).map_err(|e| cfg(e.to_string()))?;
        }
        if self.p.is_empty() {
            return Err(cfg("no measurement rates (p) given"));
        }
        if self.p.iter().chain(&self.eta).any(|v| !(0.0..=1.0).contains(v)) {
            return Err(cfg("p and eta values must lie in [0, 1]"));
        }
        if !(self.alpha >= 0.0) {
            return Err(cfg(format!("alpha = {} must be non-negative", self.alpha)));
        }
        if self.trajectories < 2 {
            return Err(cfg("trajectories must be at least 2"));
        }
        let level = self.ci_level();
        if !(level > 0.0 && level < 1.0) {
            return Err(cfg(format!("ci_level {level} outside (0, 1)")));
        }
        if self.bootstrap_resamples == 0 {
            return Err(cfg("bootstrap_resamples must be positive"));
        }
        if self.kind == MeasurementKind::Projective && self.eta_values() != [1.0] {
            return Err(cfg("eta values only apply to weak measurements"));
        }
        if let DepthPolicy::Fixed { t } = self.depth {
            if t == 0 {
                return Err(cfg("fixed depth must be at least 1"));
            }
        } else if self.saturation_ensemble < 50 {
            return Err(cfg("saturation_ensemble must be at least 50"));
        }
        match self.observable {
            Observable::Exact => {
                if self.shots.is_some() {
                    return Err(cfg("shots is only valid with observable = \"tomographic\""));
                }
                if self.mitigation.readout || self.noise.as_ref().is_some_and(|n| n.readout) {
                    return Err(cfg("readout noise and mitigation need observable = \"tomographic\""));
                }
            }
            Observable::Tomographic => {
                if !self.shots.is_some_and(|s| s > 0) {
                    return Err(cfg("tomographic observable needs a positive shots value"));
                }
                for &l in &self.sizes {
                    let rule = match self.subsystem {
                        SubsystemRule::QuarterInterpolated => SubsystemRule::QuarterCeil,
                        r => r,
                    };
                    let n = subsystem_size(l, rule).map_err(|e| cfg(e.to_string()))?;
                    if n > MAX_MUB_QUBITS {
                        return Err(cfg(format!("tomography limited to {MAX_MUB_QUBITS} qubits, L = {l} needs {n}")));
                    }
                }
            }
        }
        if let Some(noise) = &self.noise {
            if noise.rates.is_some() && noise.device.is_some() {
                return Err(cfg("give either noise.rates or noise.device, not both"));
            }
            if let Some(r) = &noise.rates {
                r.validate().map_err(|e| cfg(e.to_string()))?;
                if noise.readout && r.ero >= 0.5 {
                    return Err(cfg("readout rate must be below 0.5"));
                }
            }
            if let Some(g) = &noise.gate {
                g.validate().map_err(|e| cfg(e.to_string()))?;
            }
            if (noise.gate.is_some() || noise.readout) && noise.rates.is_none() && noise.device.is_none() {
                return Err(cfg("noise needs rates or a device file"));
            }
        }
        match self.mode {
            SweepMode::PSweep => {}
            SweepMode::EtaSweep => {
                if self.kind != MeasurementKind::Weak {
                    return Err(cfg("eta-sweep needs kind = \"weak\""));
                }
                if self.eta.len() < 2 {
                    return Err(cfg("eta-sweep needs at least two eta values"));
                }
            }
            SweepMode::LScaling => {
                if self.sizes.len() < 2 {
                    return Err(cfg("L-scaling needs at least two sizes"));
                }
            }
            SweepMode::Collapse => {
                if self.sizes.len() < 2 {
                    return Err(cfg("collapse needs at least two sizes"));
                }
                if self.p.len() < crate::criticality::MIN_POINTS_PER_SIZE {
                    return Err(cfg("collapse needs at least four p values"));
                }
                if self.eta_values().len() != 1 {
                    return Err(cfg("collapse uses a single eta value"));
                }
                if self.p_star.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
                    return Err(cfg("p_star outside [0, 1]"));
                }
            }
        }
        Ok(())
    }
}
