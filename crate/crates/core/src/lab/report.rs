//! Versioned experiment reports in long-format CSV and JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiments::Grid;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Dimension,
    Contraction,
    Selection,
    Bvm,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Dimension => "dimension",
            ExperimentKind::Contraction => "contraction",
            ExperimentKind::Selection => "selection",
            ExperimentKind::Bvm => "bvm",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dimension" => Ok(ExperimentKind::Dimension),
            "contraction" => Ok(ExperimentKind::Contraction),
            "selection" => Ok(ExperimentKind::Selection),
            "bvm" => Ok(ExperimentKind::Bvm),
            other => Err(Error::InvalidConfig(format!(
                "unknown experiment '{other}' (expected dimension, contraction, selection or bvm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub cell: usize,
    pub replicate: usize,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub s0: usize,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub grid: Grid,
    pub records: Vec<ReplicateRecord>,
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

impl ExperimentReport {
    /// Values of `metric` across the replicates of `cell`, in replicate order.
    pub fn cell_values(&self, cell: usize, metric: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.cell == cell)
            .filter_map(|r| r.metrics.get(metric).copied())
            .collect()
    }

    pub fn cell_median(&self, cell: usize, metric: &str) -> f64 {
        median(&self.cell_values(cell, metric))
    }

    pub fn num_cells(&self) -> usize {
        self.grid.cells.len()
    }

    pub fn metric_count(&self) -> usize {
        self.records.iter().map(|r| r.metrics.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown report format '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    schema_version: u32,
    experiment: ExperimentKind,
    cell: usize,
    replicate: usize,
    seed: u64,
    n: usize,
    p: usize,
    s0: usize,
    design: String,
    eta0: String,
    metric: String,
    value: f64,
}

fn design_label(report: &ExperimentReport, cell: usize) -> (String, String) {
    report.grid.cells.get(cell).map_or_else(
        || (String::new(), String::new()),
        |c| {
            let design = serde_json::to_string(&c.design).unwrap_or_default();
            (
                design.trim_matches('"').to_string(),
                c.eta0.label().to_string(),
            )
        },
    )
}

/// Writes the report to `w`: one CSV row per (replicate, metric), or the
/// whole report as JSON.
pub fn write_report<W: Write>(
    report: &ExperimentReport,
    mut w: W,
    format: ReportFormat,
) -> Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            w.write_all(b"\n")?;
        }
        ReportFormat::Csv => {
            let mut csv = csv::Writer::from_writer(&mut w);
            for r in &report.records {
                let (design, eta0) = design_label(report, r.cell);
                for (metric, value) in &r.metrics {
                    csv.serialize(CsvRow {
                        schema_version: report.schema_version,
                        experiment: report.experiment,
                        cell: r.cell,
                        replicate: r.replicate,
                        seed: r.seed,
                        n: r.n,
                        p: r.p,
                        s0: r.s0,
                        design: design.clone(),
                        eta0: eta0.clone(),
                        metric: metric.clone(),
                        value: *value,
                    })?;
                }
            }
            csv.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the report to `path`.
pub fn emit_report(
    report: &ExperimentReport,
    path: &std::path::Path,
    format: ReportFormat,
) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_report(report, std::io::BufWriter::new(f), format)
}

pub fn read_report_json<R: Read>(r: R) -> Result<ExperimentReport> {
    let rep: ExperimentReport = serde_json::from_reader(r)?;
    if rep.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported report schema {}",
            rep.schema_version
        )));
    }
    Ok(rep)
}

/// Rebuilds the replicate records from a CSV report.
pub fn read_report_csv<R: Read>(r: R) -> Result<Vec<ReplicateRecord>> {
    let mut out: Vec<ReplicateRecord> = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: CsvRow = row?;
        if row.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported report schema {}",
                row.schema_version
            )));
        }
        match out.last_mut() {
            Some(last) if last.cell == row.cell && last.replicate == row.replicate => {
                last.metrics.insert(row.metric, row.value);
            }
            _ => out.push(ReplicateRecord {
                cell: row.cell,
                replicate: row.replicate,
                seed: row.seed,
                n: row.n,
                p: row.p,
                s0: row.s0,
                metrics: BTreeMap::from([(row.metric, row.value)]),
            }),
        }
    }
    Ok(out)
}
