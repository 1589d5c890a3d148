//! File formats.
//!
//! - Quality matrix: UTF-8 CSV with LF line endings, header
//!   `config_id,t_1,t_2,...` where column names carry the checkpoint
//!   times in virtual ms; one row per configuration in id order;
//!   qualities printed with 9 significant digits. A JSON sidecar
//!   `<name>.meta.json` records the schedule and provenance.
//! - Racing results, truth summaries and SPLP instances: pretty JSON.
//! - Figure series: CSV `time_ms,series,value` with full-precision
//!   (round-trip exact) values.
//!
//! All writers are deterministic: identical inputs produce byte-identical
//! files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluators::SplpInstance;
use crate::metrics::{ExperimentRow, FigureRow, TruthSummary};
use crate::profiles::{CheckpointSchedule, ConfigId, PerformanceProfile, QualityMatrix};
use crate::racing::RacingResult;
use crate::{Error, Result};

/// Formats with `digits` significant digits (9 for matrix CSVs).
pub fn format_sig(value: f64, digits: u32) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let exponent = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    format!("{value:.decimals$}")
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Provenance sidecar for a matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub schedule: CheckpointSchedule,
    pub generator: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
}

/// `m.csv` -> `m.meta.json`.
pub fn meta_path_for(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn write_matrix_csv(path: &Path, matrix: &QualityMatrix) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["config_id".to_string()];
    header.extend(matrix.schedule().times_ms().iter().map(|t| format!("t_{t}")));
    writer.write_record(&header)?;
    for profile in matrix.profiles() {
        let mut record = vec![profile.config_id().to_string()];
        record.extend(profile.quality().iter().map(|&q| format_sig(q, 9)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the CSV plus its `<name>.meta.json` sidecar.
pub fn write_matrix_with_meta(path: &Path, matrix: &QualityMatrix, meta: &MatrixMeta) -> Result<()> {
    write_matrix_csv(path, matrix)?;
    write_json(&meta_path_for(path), meta)
}

pub fn read_matrix_csv(path: &Path) -> Result<QualityMatrix> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers().map_err(|e| parse_err(path, e.to_string()))?;
    let mut columns = header.iter();
    if columns.next() != Some("config_id") {
        return Err(parse_err(path, "first column must be `config_id`"));
    }
    let mut times = Vec::new();
    for (i, column) in columns.enumerate() {
        let time: u64 = column
            .strip_prefix("t_")
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| {
                parse_err(path, format!("column {} (`{column}`) is not `t_<ms>`", i + 1))
            })?;
        times.push(time);
    }
    let schedule = CheckpointSchedule::from_times(&times)?;

    let mut profiles = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if record.len() != times.len() + 1 {
            return Err(parse_err(
                path,
                format!(
                    "row {} has {} fields, expected {}",
                    row + 2,
                    record.len(),
                    times.len() + 1
                ),
            ));
        }
        let id: u32 = record[0]
            .parse()
            .map_err(|_| parse_err(path, format!("row {}: bad config id `{}`", row + 2, &record[0])))?;
        let mut quality = Vec::with_capacity(times.len());
        for field in record.iter().skip(1) {
            let value: f64 = field
                .parse()
                .map_err(|_| parse_err(path, format!("row {}: bad value `{field}`", row + 2)))?;
            quality.push(value);
        }
        profiles.push(PerformanceProfile::new(ConfigId(id), quality)?);
    }
    QualityMatrix::new(schedule, profiles)
}

pub fn read_matrix_meta(csv_path: &Path) -> Result<Option<MatrixMeta>> {
    let path = meta_path_for(csv_path);
    if !path.exists() {
        return Ok(None);
    }
    read_json(&path).map(Some)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| parse_err(path, format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))
}

pub fn write_result_json(path: &Path, result: &RacingResult) -> Result<()> {
    write_json(path, result)
}

pub fn read_result_json(path: &Path) -> Result<RacingResult> {
    read_json(path)
}

pub fn write_truth_json(path: &Path, truth: &TruthSummary) -> Result<()> {
    write_json(path, truth)
}

pub fn read_truth_json(path: &Path) -> Result<TruthSummary> {
    read_json(path)
}

pub fn write_instance_json(path: &Path, instance: &SplpInstance) -> Result<()> {
    write_json(path, instance)
}

pub fn read_instance_json(path: &Path) -> Result<SplpInstance> {
    let instance: SplpInstance = read_json(path)?;
    // Re-validate through the checked constructor.
    SplpInstance::new(instance.open_cost, instance.service_cost, instance.seed)
}

pub fn write_figure_csv(path: &Path, rows: &[FigureRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["time_ms", "series", "value"])?;
    for row in rows {
        writer.write_record([
            row.time_ms.to_string(),
            row.series.clone(),
            row.value.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_figure_csv(path: &Path) -> Result<Vec<FigureRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers().map_err(|e| parse_err(path, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["time_ms", "series", "value"] {
        return Err(parse_err(path, "expected header `time_ms,series,value`"));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        let time_ms: u64 = record
            .get(0)
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| parse_err(path, format!("row {}: bad time", i + 2)))?;
        let series = record
            .get(1)
            .ok_or_else(|| parse_err(path, format!("row {}: missing series", i + 2)))?
            .to_string();
        let value: f64 = record
            .get(2)
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| parse_err(path, format!("row {}: bad value", i + 2)))?;
        rows.push(FigureRow {
            time_ms,
            series,
            value,
        });
    }
    Ok(rows)
}

/// Experiment CSV: a label column followed by the table columns
/// (configuration count, speedup, top-configuration overlap, top-set
/// overlap).
pub fn write_experiment_csv(path: &Path, label: &str, row: &ExperimentRow) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "label",
        "configs",
        "repetitions",
        "speedup",
        "overlap_top_pct",
        "overlap_pct",
    ])?;
    writer.write_record([
        label.to_string(),
        row.configs.to_string(),
        row.repetitions.to_string(),
        row.mean_speedup.to_string(),
        row.overlap_top_pct.to_string(),
        row.mean_overlap_pct.to_string(),
    ])?;
    writer.flush()?;
    Ok(())
}
