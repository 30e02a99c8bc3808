//! Noise injection and error mitigation.

mod device;
mod readout;
mod residual;

pub use device::{circuit_error, select_qubits, DeviceModel, ErrorRates, GateCounts, Layout, QubitSelection};
pub use readout::{
    apply_readout_noise, calibration_from_counts, calibration_matrix, mitigate_counts, reduce_calibration,
    total_variation, Calibration, CalibrationMode, ReadoutNoiseModel, COMPLETE_MAX_QUBITS,
};
pub use residual::{apply_scheme, error_ratio, residual_entropy_correct, ResidualScheme, SyntheticNoise};
