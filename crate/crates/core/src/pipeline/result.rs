//! Sweep results and their persistence.
//!
//! JSON holds everything (config snapshot, per-trajectory samples, fits) and
//! round-trips exactly. CSV is the plot-ready summary with the fixed column
//! order `L,p,eta,alpha,mean,variance,ci_low,ci_high,n`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::circuit::MeasurementKind;
use crate::criticality::{CollapseDataset, CollapseFit, CollapsePoint};
use crate::entropy::EntropyEstimate;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = ["L", "p", "eta", "alpha", "mean", "variance", "ci_low", "ci_high", "n"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub eta: f64,
    pub kind: MeasurementKind,
    /// Circuit depth `T` used at this point.
    pub depth: usize,
    pub seed: u64,
    /// Summary after any residual-entropy correction.
    pub estimate: EntropyEstimate,
    /// Per-trajectory entropies before residual-entropy correction.
    pub samples: Vec<f64>,
    pub mean_circuit_error: f64,
    /// Amount subtracted from the mean by residual-entropy correction.
    pub residual_shift: f64,
    /// Seconds; excluded from determinism comparisons.
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub version: String,
    pub config: ExperimentConfig,
    pub records: Vec<PointRecord>,
    pub collapse: Option<CollapseFit>,
    /// Free-form notes, e.g. which settings are engineering defaults.
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::invalid(format!("unknown export format {other:?}"))),
        }
    }
}

/// Summary row of one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub eta: f64,
    pub alpha: f64,
    pub mean: f64,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

impl From<&PointRecord> for SummaryRow {
    fn from(r: &PointRecord) -> Self {
        let e = &r.estimate;
        SummaryRow {
            l: r.l,
            p: r.p,
            eta: r.eta,
            alpha: e.alpha,
            mean: e.mean,
            variance: e.variance,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            n: e.n_samples,
        }
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::invalid(e.to_string())
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(e.to_string())
}

impl SweepResult {
    pub fn new(config: ExperimentConfig, mut records: Vec<PointRecord>) -> Self {
        records.sort_by(|a, b| (a.l, a.p, a.eta).partial_cmp(&(b.l, b.p, b.eta)).expect("finite parameters"));
        let mut notes = vec![format!(
            "trajectories per point ({}) is an engineering default, not a published value",
            config.trajectories
        )];
        if let Some(shots) = config.shots {
            notes.push(format!("shots per tomography setting ({shots}) is an engineering default"));
        }
        Self { version: env!("CARGO_PKG_VERSION").to_string(), config, records, collapse: None, notes }
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.records.iter().map(SummaryRow::from).collect()
    }

    /// Copy with wall times zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        out.records.iter_mut().for_each(|r| r.wall_time = 0.0);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(json_err)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(json_err)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_summary_csv(&self.summary(), writer)
    }

    pub fn export(&self, format: ExportFormat, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        match format {
            ExportFormat::Json => {
                w.write_all(self.to_json()?.as_bytes()).map_err(|e| Error::io(path, e))?;
            }
            ExportFormat::Csv => self.write_csv(&mut w)?,
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Rate of largest variance, pooling all sizes at each rate. Ties go to
    /// the smaller rate.
    pub fn variance_peak(&self) -> Result<f64> {
        let mut pooled: Vec<(f64, f64)> = Vec::new();
        for r in &self.records {
            match pooled.iter_mut().find(|(p, _)| *p == r.p) {
                Some(slot) => slot.1 += r.estimate.variance,
                None => pooled.push((r.p, r.estimate.variance)),
            }
        }
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
        pooled
            .iter()
            .fold(None, |best: Option<(f64, f64)>, &(p, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((p, v)),
            })
            .map(|(p, _)| p)
            .ok_or_else(|| Error::invalid("empty result"))
    }

    /// Collapse input from the records; `s_err` is the CI half-width.
    pub fn collapse_dataset(&self, p_star: f64) -> Result<CollapseDataset> {
        let etas: Vec<f64> = self.records.iter().map(|r| r.eta).fold(Vec::new(), |mut v, e| {
            if !v.contains(&e) {
                v.push(e);
            }
            v
        });
        if etas.len() > 1 {
            return Err(Error::Collapse("result mixes several eta values".into()));
        }
        let entries = self
            .records
            .iter()
            .map(|r| CollapsePoint {
                l: r.l,
                p: r.p,
                s_mean: r.estimate.mean,
                s_err: Some(0.5 * (r.estimate.ci_high - r.estimate.ci_low)),
            })
            .collect();
        CollapseDataset::new(entries, p_star, self.config.alpha)
    }
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::invalid(e.to_string()))
}

pub fn read_summary_csv<R: Read>(reader: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::invalid(format!("unexpected CSV header {headers:?}")));
    }
    rdr.deserialize().collect::<std::result::Result<Vec<SummaryRow>, _>>().map_err(csv_err)
}
