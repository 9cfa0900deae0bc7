use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use semibayes::lab::{run_experiment, write_report, ExperimentKind, Grid, ReportFormat};

use crate::error::Result;
use crate::io::OutDir;
use crate::manifest::ManifestBuilder;
use crate::{Format, OutArgs};

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// One of dimension, contraction, selection, bvm.
    name: String,
    /// Grid JSON.
    #[arg(long)]
    grid: PathBuf,
    /// Master seed; overrides the grid.
    #[arg(long)]
    seed: Option<u64>,
    /// Write only this report format (default: both).
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[command(flatten)]
    out: OutArgs,
}

pub fn run(a: ExperimentArgs) -> Result<()> {
    let kind: ExperimentKind = a.name.parse()?;
    let mut mb = ManifestBuilder::new(&format!("experiment {kind}"));
    let mut grid: Grid = mb.json(&a.grid)?;
    if let Some(seed) = a.seed {
        grid.seed = seed;
    }
    grid.validate()?;
    log::info!(
        "{kind}: {} cells x {} replicates",
        grid.cells.len(),
        grid.replicates
    );
    let report = run_experiment(kind, &grid)?;
    let mut out = OutDir::create(&a.out.out)?;
    for (format, name, rf) in [
        (Format::Csv, "report.csv", ReportFormat::Csv),
        (Format::Json, "report.json", ReportFormat::Json),
    ] {
        if a.format.is_none_or(|f| f == format) {
            let mut buf = Vec::new();
            write_report(&report, &mut buf, rf)?;
            out.write(name, &buf)?;
        }
    }
    let seed = grid.seed;
    mb.finish(
        &mut out,
        json!({ "experiment": kind.as_str(), "grid": grid }),
        Some(seed),
    )
}
