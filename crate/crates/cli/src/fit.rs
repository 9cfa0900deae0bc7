use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::json;

use semibayes::lab::quantile;
use semibayes::model::Dataset;
use semibayes::priors::PriorConfig;
use semibayes::sampler::{merged_model_weights, run_chains, Chain, McmcConfig, MoveCounters};

use crate::error::Result;
use crate::io::OutDir;
use crate::manifest::ManifestBuilder;
use crate::OutArgs;

/// Number of models listed in the summary.
const TOP_MODELS: usize = 10;

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with header `y,x1,...,xp`.
    #[arg(long)]
    data: PathBuf,
    /// Prior configuration JSON (defaults when omitted).
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Sampler configuration JSON (defaults when omitted).
    #[arg(long)]
    mcmc: Option<PathBuf>,
    /// Master seed; overrides the sampler configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of chains; overrides the sampler configuration.
    #[arg(long)]
    chains: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Serialize)]
struct CoefficientSummary {
    index: usize,
    median: f64,
    lower_05: f64,
    upper_95: f64,
    inclusion: f64,
}

#[derive(Debug, Serialize)]
struct ModelSummary {
    support: Vec<usize>,
    weight: f64,
}

#[derive(Debug, Serialize)]
struct FitSummary {
    n: usize,
    p: usize,
    chains: usize,
    draws: usize,
    mean_size: f64,
    coefficients: Vec<CoefficientSummary>,
    top_models: Vec<ModelSummary>,
    counters: MoveCounters,
}

fn summarize(data: &Dataset, chains: &[Chain]) -> Result<FitSummary> {
    let draws: Vec<_> = chains.iter().flat_map(|c| &c.draws).collect();
    let total = draws.len() as f64;
    let coefficients = (0..data.p())
        .map(|j| {
            let values: Vec<f64> = draws.iter().map(|d| d.theta.get(j)).collect();
            CoefficientSummary {
                index: j,
                median: quantile(&values, 0.5),
                lower_05: quantile(&values, 0.05),
                upper_95: quantile(&values, 0.95),
                inclusion: values.iter().filter(|v| **v != 0.0).count() as f64 / total,
            }
        })
        .collect();
    let weights = merged_model_weights(chains)?;
    let mut counters = MoveCounters::default();
    for c in chains {
        counters.merge(&c.counters);
    }
    Ok(FitSummary {
        n: data.n(),
        p: data.p(),
        chains: chains.len(),
        draws: draws.len(),
        mean_size: draws.iter().map(|d| d.theta.len() as f64).sum::<f64>() / total,
        coefficients,
        top_models: weights
            .top(TOP_MODELS)
            .into_iter()
            .map(|(support, weight)| ModelSummary { support, weight })
            .collect(),
        counters,
    })
}

pub fn run(args: FitArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new("fit");
    let data = Dataset::from_csv(mb.read(&args.data)?.as_slice())?;
    let prior: PriorConfig = mb.json_or_default(args.prior.as_deref())?;
    let mut mcmc: McmcConfig = mb.json_or_default(args.mcmc.as_deref())?;
    if let Some(seed) = args.seed {
        mcmc.seed = seed;
    }
    if let Some(chains) = args.chains {
        mcmc.chains = chains;
    }
    prior.validate()?;
    mcmc.validate()?;
    log::info!(
        "fitting n = {}, p = {} with {} chain(s) of {} sweeps",
        data.n(),
        data.p(),
        mcmc.chains,
        mcmc.iters
    );
    let chains = run_chains(&data, &prior, &mcmc)?;

    let mut out = OutDir::create(&args.out.out)?;
    for (c, chain) in chains.iter().enumerate() {
        let name = if chains.len() == 1 {
            "samples.jsonl".to_string()
        } else {
            format!("samples_chain{c}.jsonl")
        };
        let mut buf = Vec::new();
        chain.write_jsonl(&mut buf)?;
        out.write(&name, &buf)?;
    }
    let mut buf = Vec::new();
    merged_model_weights(&chains)?.write_csv(&mut buf)?;
    out.write("weights.csv", &buf)?;
    out.write_json("summary.json", &summarize(&data, &chains)?)?;
    let seed = mcmc.seed;
    mb.finish(
        &mut out,
        json!({ "prior": prior, "mcmc": mcmc }),
        Some(seed),
    )
}
