//! CSV rows and JSON reports.

use std::fs;
use std::path::Path;

use sdm_core::field::ConductivityField;
use sdm_core::io::format_field;
use sdm_core::metrics::{RmseReport, TimingReport};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{FieldSource, RunConfig};
use crate::CliError;

/// One CSV line; columns are fixed and appear in this order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub method: String,
    pub variant: String,
    /// Method spacing over the fine grid interval of the run (FDM: over the finest `h`).
    pub spacing_ratio: f64,
    pub n_unknowns: usize,
    pub bandwidth: usize,
    pub rmse_vs_true: Option<f64>,
    pub rmse_vs_fdm_cp: Option<f64>,
    pub rmse_vs_fdm_full: Option<f64>,
    pub cpu_local_s: f64,
    pub cpu_global_s: f64,
    pub cpu_total_s: f64,
    pub n_local_solves: usize,
}

pub const CSV_COLUMNS: [&str; 12] = [
    "method",
    "variant",
    "spacing_ratio",
    "n_unknowns",
    "bandwidth",
    "rmse_vs_true",
    "rmse_vs_fdm_cp",
    "rmse_vs_fdm_full",
    "cpu_local_s",
    "cpu_global_s",
    "cpu_total_s",
    "n_local_solves",
];

/// Everything recorded for one method run.
#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub row: Row,
    /// Method spacing as a fraction of the unit side.
    pub spacing: f64,
    pub rmse: Vec<RmseReport>,
    pub timing: Vec<TimingReport>,
    /// Mean CPU seconds per local analysis.
    pub mean_local_cpu_s: Option<f64>,
    pub partition_defect: Option<f64>,
    pub sdm_plain_fallbacks: Option<usize>,
    pub sdm_pinv_fallbacks: Option<usize>,
    pub max_abs_diff_vs_fdm: Option<f64>,
    pub field_file: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryError {
    pub method: String,
    pub spacing_ratio: f64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldInfo {
    pub source: FieldSource,
    pub ncells: usize,
    pub seed: Option<u64>,
    pub kmin: f64,
    pub kmax: f64,
    /// SHA-256 of the canonical field file text.
    pub sha256: String,
}

impl FieldInfo {
    pub fn new(source: &FieldSource, field: &ConductivityField) -> FieldInfo {
        let meta = field.meta();
        FieldInfo {
            source: source.clone(),
            ncells: field.n_cells(),
            seed: meta.seed,
            kmin: meta.k_min,
            kmax: meta.k_max,
            sha256: sha256_hex(format_field(field).as_bytes()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Slope {
    pub method: String,
    pub n_points: usize,
    pub slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub field: FieldInfo,
    pub timing_mode: &'static str,
    pub entries: Vec<Entry>,
    pub errors: Vec<EntryError>,
    pub slopes: Vec<Slope>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}
