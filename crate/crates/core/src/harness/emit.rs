use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{RunReport, RunSummary};
use super::sweep::SweepTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format '{other}' (csv | json)"))),
        }
    }
}

/// One row of the long-format round table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub run_id: String,
    pub t: usize,
    /// Context coordinates joined by `;`.
    pub u: String,
    pub y: f64,
    pub z: f64,
    pub sigma: i8,
    pub y_star_clean: f64,
    pub y_star_corrupt: f64,
    pub loss_clean: f64,
    pub loss_corrupt: f64,
    pub cum_regret: f64,
    pub cum_regret_clean: f64,
    #[serde(with = "crate::model::lossless_float")]
    pub est_error: f64,
    /// Potential before the round, when oracle checks ran.
    pub phi: Option<f64>,
    pub phi_next: Option<f64>,
    pub label: Option<String>,
}

pub fn round_rows(report: &RunReport) -> Vec<RoundRow> {
    let (mut cum, mut cum_clean) = (0.0, 0.0);
    report
        .rounds
        .iter()
        .enumerate()
        .map(|(i, r)| {
            cum += r.loss_corrupt;
            cum_clean += r.loss_clean;
            let trace = report.oracle.as_ref().map(|o| &o.trace);
            RoundRow {
                run_id: report.run_id.clone(),
                t: r.t,
                u: r.u.as_slice().iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
                y: r.y,
                z: r.z,
                sigma: r.sigma.value() as i8,
                y_star_clean: r.y_star_clean,
                y_star_corrupt: r.y_star_corrupt,
                loss_clean: r.loss_clean,
                loss_corrupt: r.loss_corrupt,
                cum_regret: cum,
                cum_regret_clean: cum_clean,
                est_error: r.est_error,
                phi: trace.map(|tr| tr.phi[i].value),
                phi_next: trace.map(|tr| tr.phi[i + 1].value),
                label: trace.map(|tr| format!("{:?}", tr.labels[i])),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Writes `rounds.csv` + `summary.csv`, or `runs.json` + `summary.json`, into `dir`.
///
/// Returns the paths written.
pub fn emit_results(reports: &[RunReport], format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let summaries: Vec<&RunSummary> = reports.iter().map(|r| &r.summary).collect();
    match format {
        Format::Csv => {
            let rounds = dir.join("rounds.csv");
            let rows: Vec<RoundRow> = reports.iter().flat_map(round_rows).collect();
            write_csv(&rounds, &rows)?;
            let summary = dir.join("summary.csv");
            write_csv(&summary, &summaries)?;
            Ok(vec![rounds, summary])
        }
        Format::Json => {
            let runs = dir.join("runs.json");
            write_json(&runs, reports)?;
            let summary = dir.join("summary.json");
            write_json(&summary, &summaries)?;
            Ok(vec![runs, summary])
        }
    }
}

/// Writes `sweep.{csv,json}` (one row per cell) and `sweep_runs.{csv,json}`.
pub fn emit_sweep(table: &SweepTable, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let (cells, runs) = match format {
        Format::Csv => (dir.join("sweep.csv"), dir.join("sweep_runs.csv")),
        Format::Json => (dir.join("sweep.json"), dir.join("sweep_runs.json")),
    };
    match format {
        Format::Csv => {
            write_csv(&cells, &table.cells)?;
            write_csv(&runs, &table.runs)?;
        }
        Format::Json => {
            write_json(&cells, &table.cells)?;
            write_json(&runs, &table.runs)?;
        }
    }
    Ok(vec![cells, runs])
}

pub fn read_summaries(path: &Path) -> Result<Vec<RunSummary>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_csv(path),
        _ => Ok(serde_json::from_str(&fs::read_to_string(path)?)?),
    }
}

pub fn read_round_rows(path: &Path) -> Result<Vec<RoundRow>> {
    read_csv(path)
}

/// Reads a `runs.json` array or a single report object.
pub fn read_reports(path: &Path) -> Result<Vec<RunReport>> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(match v {
        serde_json::Value::Array(_) => serde_json::from_value(v)?,
        other => vec![serde_json::from_value(other)?],
    })
}
