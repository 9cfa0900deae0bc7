use std::io::BufReader;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde_json::json;

use semibayes::diagnostics::{
    bvm_approximant, compatibility_number, design_table, hat_w, restricted_eigenvalue,
    tv_surrogate, DesignRow, GramSummary, SearchConfig, TvReport,
};
use semibayes::model::{Dataset, QuadratureGrid, Truth};
use semibayes::priors::PriorConfig;
use semibayes::sampler::{draw_weights, parse_support, read_draws_jsonl, ModelWeightTable};

use crate::error::{CliError, Result};
use crate::io::OutDir;
use crate::manifest::ManifestBuilder;
use crate::{Format, OutArgs};

#[derive(Debug, Subcommand)]
pub enum DiagnoseCommand {
    /// Compatibility numbers and restricted eigenvalues of the design.
    Design(DesignArgs),
    /// Closed-form approximate posterior weights of listed supports.
    Evidence(EvidenceArgs),
    /// Total-variation surrogate between posterior draws and the normal mixture limit.
    Bvm(BvmArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// CSV with header `y,x1,...,xp`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    common: Common,
    /// Largest support size in the table (default: min(p, s_max)).
    #[arg(long)]
    max_size: Option<usize>,
    /// Search budget JSON (defaults when omitted).
    #[arg(long)]
    search: Option<PathBuf>,
    /// Report randomized upper bounds where exhaustive search exceeds the budget.
    #[arg(long)]
    randomized: bool,
}

#[derive(Debug, Args)]
pub struct EvidenceArgs {
    #[command(flatten)]
    common: Common,
    /// Truth JSON `{"theta0": .., "eta0": ..}`; the scores are evaluated at `eta0`.
    #[arg(long)]
    truth: PathBuf,
    /// Prior configuration JSON (defaults when omitted).
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Support as `;`-separated indices, repeatable; each must contain the
    /// true support.
    #[arg(long = "support", required = true)]
    supports: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BvmArgs {
    #[command(flatten)]
    common: Common,
    /// Truth JSON `{"theta0": .., "eta0": ..}`.
    #[arg(long)]
    truth: PathBuf,
    /// Sample files written by `fit`, repeatable; draws are pooled.
    #[arg(long = "samples", required = true)]
    samples: Vec<PathBuf>,
}

pub fn run(cmd: DiagnoseCommand) -> Result<()> {
    match cmd {
        DiagnoseCommand::Design(a) => design(a),
        DiagnoseCommand::Evidence(a) => evidence(a),
        DiagnoseCommand::Bvm(a) => bvm(a),
    }
}

fn load_data(mb: &mut ManifestBuilder, c: &Common) -> Result<Dataset> {
    Ok(Dataset::from_csv(mb.read(&c.data)?.as_slice())?)
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(semibayes::Error::from)?;
    for r in rows {
        w.write_record(&r).map_err(semibayes::Error::from)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Usage(format!("csv buffer: {e}")))
}

fn label(support: &[usize]) -> String {
    support
        .iter()
        .map(|j| j.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn design(a: DesignArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new("diagnose design");
    let data = load_data(&mut mb, &a.common)?;
    let search: SearchConfig = mb.json_or_default(a.search.as_deref())?;
    let g = GramSummary::from_design(data.x());
    let s_hi = a.max_size.unwrap_or(search.s_max).min(g.p());
    let rows: Vec<DesignRow> = if a.randomized {
        design_table(&g, s_hi, &search)?
    } else {
        (1..=s_hi)
            .map(|s| {
                Ok(DesignRow {
                    s,
                    phi: compatibility_number(&g, s, &search)?,
                    psi: restricted_eigenvalue(&g, s, &search)?,
                    exact: true,
                })
            })
            .collect::<Result<_>>()?
    };
    let mut out = OutDir::create(&a.common.out.out)?;
    match a.common.format {
        Format::Json => out.write_json("design.json", &rows)?,
        Format::Csv => {
            let body = rows
                .iter()
                .map(|r| {
                    vec![
                        r.s.to_string(),
                        format!("{:.12e}", r.phi),
                        format!("{:.12e}", r.psi),
                        r.exact.to_string(),
                    ]
                })
                .collect();
            out.write(
                "design.csv",
                &csv_bytes(&["s", "phi", "psi", "exact"], body)?,
            )?;
        }
    }
    mb.finish(
        &mut out,
        json!({ "search": search, "max_size": s_hi, "randomized": a.randomized }),
        a.randomized.then_some(search.seed),
    )
}

fn write_weights(
    out: &mut OutDir,
    stem: &str,
    format: Format,
    table: &ModelWeightTable,
) -> Result<()> {
    match format {
        Format::Json => {
            let entries: Vec<_> = table
                .top(table.len())
                .into_iter()
                .map(|(s, w)| json!({ "support": s, "weight": w }))
                .collect();
            out.write_json(&format!("{stem}.json"), &entries)
        }
        Format::Csv => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            out.write(&format!("{stem}.csv"), &buf)
        }
    }
}

fn evidence(a: EvidenceArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new("diagnose evidence");
    let data = load_data(&mut mb, &a.common)?;
    let truth: Truth = mb.json(&a.truth)?;
    let data = data.with_truth(truth.clone())?;
    let prior: PriorConfig = mb.json_or_default(a.prior.as_deref())?;
    let collection = a
        .supports
        .iter()
        .map(|s| parse_support(s))
        .collect::<semibayes::Result<Vec<_>>>()?;
    let s0 = truth.theta0.support();
    if let Some(bad) = collection
        .iter()
        .find(|s| !s0.iter().all(|j| s.contains(j)))
    {
        return Err(CliError::Usage(format!(
            "support {:?} does not contain the true support {s0:?}; the approximation only covers supersets",
            bad
        )));
    }
    let grid = QuadratureGrid::covering(&[&truth.eta0], 0.0);
    let table = hat_w(&data, &prior, &truth.eta0, &collection, &grid)?;
    let mut out = OutDir::create(&a.common.out.out)?;
    write_weights(&mut out, "evidence", a.common.format, &table)?;
    mb.finish(
        &mut out,
        json!({ "prior": prior, "supports": a.supports }),
        None,
    )
}

fn bvm(a: BvmArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new("diagnose bvm");
    let data = load_data(&mut mb, &a.common)?;
    let truth: Truth = mb.json(&a.truth)?;
    let data = data.with_truth(truth.clone())?;
    let mut draws = Vec::new();
    for path in &a.samples {
        let bytes = mb.read(path)?;
        draws.extend(read_draws_jsonl(
            BufReader::new(bytes.as_slice()),
            data.p(),
        )?);
    }
    let weights = draw_weights(&draws)?;
    let grid = QuadratureGrid::covering(&[&truth.eta0], 0.0);
    let approx = bvm_approximant(&data, &weights, &truth.eta0, &grid)?;
    let report: TvReport = tv_surrogate(&draws, &approx, &truth, data.n())?;
    let mut out = OutDir::create(&a.common.out.out)?;
    match a.common.format {
        Format::Json => out.write_json("bvm.json", &report)?,
        Format::Csv => {
            let mut rows = vec![
                vec![
                    "surrogate_tv".into(),
                    String::new(),
                    draws.len().to_string(),
                    format!("{:.12e}", report.surrogate_tv),
                ],
                vec![
                    "weight_tv".into(),
                    String::new(),
                    draws.len().to_string(),
                    format!("{:.12e}", report.weight_tv),
                ],
            ];
            rows.extend(report.per_model.iter().map(|m| {
                vec![
                    "tv_s".into(),
                    label(&m.support),
                    m.draws.to_string(),
                    format!("{:.12e}", m.tv_s),
                ]
            }));
            out.write(
                "bvm.csv",
                &csv_bytes(&["quantity", "support", "draws", "value"], rows)?,
            )?;
        }
    }
    mb.finish(&mut out, json!({ "samples": a.samples }), None)
}
