//! Experiment configs, sweeps, persistence and collapse analysis.

mod config;
mod result;
mod sweep;

use std::io::Write;

pub use config::{
    DepthPolicy, ExperimentConfig, MitigationConfig, NoiseConfig, Observable, SweepMode, DEFAULT_MAX_QUBITS,
    DEFAULT_SATURATION_ENSEMBLE, DEFAULT_TRAJECTORIES,
};
pub use result::{read_summary_csv, write_summary_csv, ExportFormat, PointRecord, SummaryRow, SweepResult, CSV_HEADER};
pub use sweep::{point_seed, run_sweep};

use crate::criticality::{fit_exponents, rescaled_table, CollapseDataset, CollapseFit, FitOptions};
use crate::error::{Error, Result};

/// Rescaled row `(L, p, q, W)` at the fitted exponents.
pub type RescaledRow = (usize, f64, f64, f64);

/// Fit the collapse and return the rescaled data at the optimum.
pub fn analyze_collapse(dataset: &CollapseDataset, opts: &FitOptions) -> Result<(CollapseFit, Vec<RescaledRow>)> {
    let fit = fit_exponents(dataset, opts)?;
    let used = dataset.restrict(&fit.sizes)?;
    let rows = rescaled_table(&used, fit.gamma0, fit.nu0)?;
    Ok((fit, rows))
}

pub fn write_rescaled_csv<W: Write>(rows: &[RescaledRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::invalid(e.to_string());
    w.write_record(["L", "p", "q", "W"]).map_err(err)?;
    for (l, p, q, wv) in rows {
        w.write_record([l.to_string(), p.to_string(), q.to_string(), wv.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::invalid(e.to_string()))
}
