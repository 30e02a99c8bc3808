//! Simulation and analysis of measurement-induced entanglement transitions in
//! monitored random circuits.
//!
//! * [`qsim`]: dense statevector engine with projective and weak measurements.
//! * [`circuit`]: brickwork circuit sampling and trajectory execution.
//! * [`entropy`]: Rényi entropies, ensemble statistics, bootstrap intervals.
//! * [`tomography`]: Pauli algebra, MUB partitions and constrained state
//!   reconstruction from simulated shots.
//! * [`mitigation`]: readout noise and mitigation, residual-entropy
//!   correction, circuit-error estimates and qubit selection.
//! * [`criticality`]: finite-size-scaling collapse and exponent fits.
//! * [`pipeline`]: experiment configs, sweeps and result persistence.

pub mod circuit;
pub mod criticality;
pub mod entropy;
pub mod error;
pub mod mitigation;
pub mod pipeline;
pub mod qsim;
pub mod rng;
pub mod tomography;

pub use error::{Error, Result};
