//! Experiment drivers: replicated fits over a grid of scenarios, summarized
//! into per-replicate metrics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{ExperimentKind, ExperimentReport, ReplicateRecord, SCHEMA_VERSION};
use super::scenario::{generate_scenario, psi_certificate, Generated, Scenario};
use crate::diagnostics::{
    beta_min_check, bvm_approximant, compatibility_number, compatibility_upper_bound, hat_w,
    tv_surrogate, GramSummary, RateConstants, SearchConfig,
};
use crate::error::{Error, Result};
use crate::model::{hellinger, QuadratureGrid, SparseVector};
use crate::priors::PriorConfig;
use crate::rng::{derive_seed, seeded};
use crate::sampler::{merged_model_weights, run_chains, Chain, Draw, McmcConfig};

/// Experiment grid: cells, replicates, and shared configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub cells: Vec<Scenario>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub rates: RateConstants,
    #[serde(default)]
    pub search: SearchConfig,
    /// Draws (evenly thinned) used for Hellinger quantiles.
    #[serde(default = "default_hellinger_draws")]
    pub hellinger_draws: usize,
    /// Multiples `c` for the masses of `{s_theta > c s0}`.
    #[serde(default = "default_size_multiples")]
    pub size_multiples: Vec<f64>,
}

fn default_hellinger_draws() -> usize {
    200
}

fn default_size_multiples() -> Vec<f64> {
    vec![1.5, 2.0, 3.0]
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() || self.replicates == 0 {
            return Err(Error::InvalidConfig(
                "grid needs at least one cell and one replicate".into(),
            ));
        }
        if self.hellinger_draws == 0 {
            return Err(Error::InvalidConfig(
                "hellinger_draws must be positive".into(),
            ));
        }
        self.cells.iter().try_for_each(Scenario::validate)?;
        self.mcmc.validate()?;
        self.prior.validate()?;
        self.rates.validate()
    }

    /// Seed of replicate `rep` in cell `cell`.
    pub fn replicate_seed(&self, cell: usize, rep: usize) -> u64 {
        derive_seed(self.seed, &[cell as u64, rep as u64])
    }
}

/// A fitted replicate.
pub struct Fit {
    pub generated: Generated,
    pub chains: Vec<Chain>,
}

impl Fit {
    pub fn draws(&self) -> impl Iterator<Item = &Draw> {
        self.chains.iter().flat_map(|c| &c.draws)
    }

    fn pooled(&self) -> Vec<Draw> {
        self.draws().cloned().collect()
    }
}

/// Generates and fits one replicate.
pub fn fit_replicate(grid: &Grid, cell: usize, rep: usize) -> Result<Fit> {
    let seed = grid.replicate_seed(cell, rep);
    let mut rng = seeded(derive_seed(seed, &[0]));
    let generated = generate_scenario(&grid.cells[cell], &grid.rates, &grid.search, &mut rng)?;
    let mcmc = McmcConfig {
        seed: derive_seed(seed, &[1]),
        ..grid.mcmc.clone()
    };
    let chains = run_chains(&generated.data, &grid.prior, &mcmc)?;
    Ok(Fit { generated, chains })
}

/// Runs `kind` over every (cell, replicate) pair; records are in cell-major
/// order regardless of scheduling.
pub fn run_experiment(kind: ExperimentKind, grid: &Grid) -> Result<ExperimentReport> {
    Ok(run_experiments(&[kind], grid)?.remove(0))
}

/// Fits every replicate once and summarizes it for each of `kinds`.
pub fn run_experiments(kinds: &[ExperimentKind], grid: &Grid) -> Result<Vec<ExperimentReport>> {
    grid.validate()?;
    let jobs: Vec<(usize, usize)> = (0..grid.cells.len())
        .flat_map(|c| (0..grid.replicates).map(move |r| (c, r)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(cell, rep)| {
            let fit = fit_replicate(grid, cell, rep)?;
            let sc = &grid.cells[cell];
            let records = kinds
                .iter()
                .map(|&kind| {
                    let metrics = match kind {
                        ExperimentKind::Dimension => dimension_metrics(grid, cell, &fit),
                        ExperimentKind::Contraction => contraction_metrics(grid, cell, &fit),
                        ExperimentKind::Selection => selection_metrics(grid, cell, &fit),
                        ExperimentKind::Bvm => bvm_metrics(grid, &fit),
                    }?;
                    if let Some((name, v)) = metrics.iter().find(|(_, v)| !v.is_finite()) {
                        return Err(Error::InvalidConfig(format!(
                            "metric {name} is not finite ({v}) in cell {cell}"
                        )));
                    }
                    let seed = grid.replicate_seed(cell, rep);
                    Ok(ReplicateRecord {
                        cell,
                        replicate: rep,
                        seed,
                        n: sc.n,
                        p: sc.p,
                        s0: sc.s0,
                        metrics,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            log::info!("cell {cell} replicate {rep} done");
            Ok(records)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| ExperimentReport {
            schema_version: SCHEMA_VERSION,
            experiment: kind,
            grid: grid.clone(),
            records: per_job.iter().map(|recs| recs[k].clone()).collect(),
        })
        .collect())
}

pub fn run_dimension_experiment(grid: &Grid) -> Result<ExperimentReport> {
    run_experiment(ExperimentKind::Dimension, grid)
}

pub fn run_contraction_experiment(grid: &Grid) -> Result<ExperimentReport> {
    run_experiment(ExperimentKind::Contraction, grid)
}

pub fn run_selection_experiment(grid: &Grid) -> Result<ExperimentReport> {
    run_experiment(ExperimentKind::Selection, grid)
}

pub fn run_bvm_experiment(grid: &Grid) -> Result<ExperimentReport> {
    run_experiment(ExperimentKind::Bvm, grid)
}

/// Linear-interpolation quantile of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let h = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn size_label(c: f64) -> String {
    format!("mass_s_gt_{c}s0")
}

fn dimension_metrics(grid: &Grid, cell: usize, fit: &Fit) -> Result<BTreeMap<String, f64>> {
    let sc = &grid.cells[cell];
    let truth = fit.generated.data.require_truth()?;
    let s0 = truth.theta0.len() as f64;
    let sizes: Vec<usize> = fit.draws().map(|d| d.theta.len()).collect();
    if sizes.is_empty() {
        return Err(Error::EmptyChain);
    }
    let m = sizes.len() as f64;
    let frac = |pred: &dyn Fn(usize) -> bool| sizes.iter().filter(|&&s| pred(s)).count() as f64 / m;
    let mut out = BTreeMap::new();
    for &c in &grid.size_multiples {
        out.insert(size_label(c), frac(&|s| s as f64 > c * s0));
    }
    let bound = grid.rates.k_dim * s0.max((sc.n as f64).ln().powi(2));
    out.insert("mass_s_gt_kdim_bound".into(), frac(&|s| s as f64 > bound));
    out.insert("mean_s".into(), sizes.iter().sum::<usize>() as f64 / m);
    let max_s = *sizes.iter().max().unwrap_or(&0);
    for k in 0..=max_s {
        out.insert(format!("s_prob_{k:03}"), frac(&|s| s == k));
    }
    Ok(out)
}

fn errors(d: &Draw, theta0: &SparseVector, fit: &Fit) -> (f64, f64, f64) {
    let data = &fit.generated.data;
    let dense = d.theta.sub_dense(theta0);
    let l1 = dense.iter().map(|v| v.abs()).sum();
    let l2 = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = nalgebra::DVector::from_vec(dense);
    let pred = (data.x() * diff).norm();
    (l1, l2, pred)
}

fn thinned<'a>(draws: &'a [Draw], k: usize) -> Vec<&'a Draw> {
    let m = draws.len();
    if m <= k {
        return draws.iter().collect();
    }
    (0..k).map(|i| &draws[i * m / k]).collect()
}

/// `phi(s)` exact within budget, otherwise a randomized upper bound.
fn phi_certificate(g: &GramSummary, s: usize, search: &SearchConfig) -> Result<(f64, bool)> {
    match compatibility_number(g, s, search) {
        Ok(v) => Ok((v, true)),
        Err(Error::BudgetExceeded { .. } | Error::SubsetBudget { .. }) => {
            Ok((compatibility_upper_bound(g, s, search)?.value, false))
        }
        Err(e) => Err(e),
    }
}

fn contraction_metrics(grid: &Grid, cell: usize, fit: &Fit) -> Result<BTreeMap<String, f64>> {
    let sc = &grid.cells[cell];
    let data = &fit.generated.data;
    let truth = data.require_truth()?;
    let draws = fit.pooled();
    let mut l1s = Vec::with_capacity(draws.len());
    let mut l2s = Vec::with_capacity(draws.len());
    let mut preds = Vec::with_capacity(draws.len());
    for d in &draws {
        let (a, b, c) = errors(d, &truth.theta0, fit);
        l1s.push(a);
        l2s.push(b);
        preds.push(c);
    }
    let hels = thinned(&draws, grid.hellinger_draws)
        .into_iter()
        .map(|d| {
            hellinger(
                &d.eta,
                &truth.eta0,
                &QuadratureGrid::covering(&[&d.eta, &truth.eta0], 0.0),
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let (n, p) = (sc.n as f64, sc.p as f64);
    let s0 = sc.s0.max(1);
    let s_n = grid.rates.s_n(sc.s0, sc.n);
    let env_l1 = s0 as f64 * (p.ln() / n).sqrt();
    let env_l2 = (s0 as f64 * p.ln() / n).sqrt();
    let env_hel = (s_n * p.ln() / n).sqrt();
    let gram = GramSummary::from_design(data.x());
    let s_cert = s0.min(sc.p);
    let (phi, phi_exact) = phi_certificate(&gram, s_cert, &grid.search)?;
    let psi = psi_certificate(data.x(), s_cert, &grid.search)?;
    let q = |v: &[f64]| quantile(v, 0.9);
    let mut out = BTreeMap::new();
    out.insert("q90_l1".into(), q(&l1s));
    out.insert("q90_l2".into(), q(&l2s));
    out.insert("q90_pred".into(), q(&preds));
    out.insert("q90_hellinger".into(), q(&hels));
    out.insert("env_l1".into(), env_l1);
    out.insert("env_l2".into(), env_l2);
    out.insert("env_hellinger".into(), env_hel);
    out.insert("ratio_l1".into(), q(&l1s) / env_l1);
    out.insert("ratio_l2".into(), q(&l2s) / env_l2);
    out.insert("ratio_hellinger".into(), q(&hels) / env_hel);
    out.insert("phi_s0".into(), phi);
    out.insert("psi_s0".into(), psi.value);
    out.insert(
        "certificates_exact".into(),
        if phi_exact && psi.exact { 1.0 } else { 0.0 },
    );
    if phi > 0.0 && psi.value > 0.0 {
        out.insert("ratio_l1_design".into(), q(&l1s) * phi / env_l1);
        out.insert("ratio_l2_design".into(), q(&l2s) * psi.value / env_l2);
    }
    out.insert("clip_rate".into(), fit.generated.clip_rate);
    Ok(out)
}

fn selection_metrics(grid: &Grid, cell: usize, fit: &Fit) -> Result<BTreeMap<String, f64>> {
    let sc = &grid.cells[cell];
    let truth = fit.generated.data.require_truth()?;
    let weights = merged_model_weights(&fit.chains)?;
    let s0 = truth.theta0.support();
    let post = weights.get(s0);
    let mut out = BTreeMap::new();
    out.insert("post_s0".into(), post);
    out.insert(
        "post_strict_superset".into(),
        weights.strict_superset_mass(s0),
    );
    out.insert("selected".into(), if post > 0.9 { 1.0 } else { 0.0 });
    out.insert("magnitude".into(), truth.theta0.min_abs().unwrap_or(0.0));
    if let Some((t, psi)) = &fit.generated.threshold {
        let s_n = grid.rates.s_n(sc.s0, sc.n);
        out.insert("beta_min_threshold".into(), *t);
        out.insert("psi_sn".into(), psi.value);
        out.insert("psi_exact".into(), if psi.exact { 1.0 } else { 0.0 });
        let ok = beta_min_check(
            &truth.theta0,
            psi.value,
            &grid.rates,
            sc.n,
            sc.p as f64,
            s_n,
        );
        out.insert("beta_min_ok".into(), if ok { 1.0 } else { 0.0 });
    }
    Ok(out)
}

/// Supports on which the approximate weights are compared: the true support,
/// its single-variable extensions, and every visited superset.
pub fn evidence_collection(
    s0: &[usize],
    p: usize,
    visited: impl IntoIterator<Item = Vec<usize>>,
) -> Vec<Vec<usize>> {
    let mut set: std::collections::BTreeSet<Vec<usize>> = std::collections::BTreeSet::new();
    set.insert(s0.to_vec());
    for j in (0..p).filter(|j| !s0.contains(j)) {
        let mut s = s0.to_vec();
        s.push(j);
        s.sort_unstable();
        set.insert(s);
    }
    for s in visited {
        if s0.iter().all(|j| s.contains(j)) {
            set.insert(s);
        }
    }
    set.into_iter().collect()
}

fn bvm_metrics(grid: &Grid, fit: &Fit) -> Result<BTreeMap<String, f64>> {
    let data = &fit.generated.data;
    let truth = data.require_truth()?;
    let draws = fit.pooled();
    let weights = merged_model_weights(&fit.chains)?;
    let qgrid = QuadratureGrid::covering(&[&truth.eta0], 0.0);
    let comps = bvm_approximant(data, &weights, &truth.eta0, &qgrid)?;
    let rep = tv_surrogate(&draws, &comps, truth, data.n())?;
    let collection = evidence_collection(
        truth.theta0.support(),
        data.p(),
        weights.entries().keys().cloned(),
    );
    let what = hat_w(data, &grid.prior, &truth.eta0, &collection, &qgrid)?;
    let s0_model = rep
        .per_model
        .iter()
        .find(|m| m.support == truth.theta0.support());
    let mut out = BTreeMap::new();
    out.insert("tv_surrogate".into(), rep.surrogate_tv);
    out.insert("weight_tv".into(), rep.weight_tv);
    out.insert("within_tv".into(), rep.surrogate_tv - 2.0 * rep.weight_tv);
    out.insert("tv_s0".into(), s0_model.map_or(1.0, |m| m.tv_s));
    out.insert("hat_w_tv".into(), what.total_variation(&weights));
    out.insert("post_s0".into(), weights.get(truth.theta0.support()));
    out.insert("models_visited".into(), weights.len() as f64);
    Ok(out)
}
