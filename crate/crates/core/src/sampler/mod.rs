//! Metropolis-within-Gibbs sampling of the joint posterior of `(theta, eta)`.
//!
//! One sweep updates, in order: mixture allocations, stick variables, atom
//! parameters, the support (a run of add/delete/swap moves), the active
//! coefficients, and the slab variances.

mod state;
mod truncnorm;
mod weights;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use state::{
    log_add_ratio, log_delete_ratio, pair_counts, update_allocations, update_atoms,
    update_coefficients, update_sticks, update_support, update_tau, McmcState, MoveCounters,
    SupportMove,
};
pub use truncnorm::{standard_truncated, truncated_normal};
pub use weights::{parse_support, ModelWeightTable, WeightSource};

use crate::error::{Error, Result};
use crate::model::{Atom, Dataset, SparseVector, SymmetricNormalMixture};
use crate::priors::{self, PriorConfig};
use crate::rng::{derive_seed, seeded};

const DRIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddProposal {
    /// Gaussian matched to the coordinate's conditional likelihood.
    Conditional,
    /// The Laplace slab itself.
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoveConfig {
    pub add: f64,
    pub delete: f64,
    pub swap: f64,
    pub add_proposal: AddProposal,
    /// Random-walk step on `log sigma` for atom scales.
    pub sigma_step: f64,
}

impl Default for MoveConfig {
    fn default() -> Self {
        Self {
            add: 1.0 / 3.0,
            delete: 1.0 / 3.0,
            swap: 1.0 / 3.0,
            add_proposal: AddProposal::Conditional,
            sigma_step: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitStrategy {
    Empty,
    /// Forward selection under a Gaussian working model, stopped by an
    /// extended BIC, capped at `max_size` (default `min(20, n/3, p)`).
    Screening {
        max_size: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
    pub moves: MoveConfig,
    pub init: InitStrategy,
    /// Hold the error density fixed instead of sampling it.
    pub fixed_eta: Option<SymmetricNormalMixture>,
    /// Sweeps between cached log-likelihood drift checks.
    pub check_every: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iters: 2000,
            burnin: 500,
            thin: 1,
            chains: 1,
            seed: 1,
            moves: MoveConfig::default(),
            init: InitStrategy::Screening { max_size: None },
            fixed_eta: None,
            check_every: 100,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.thin == 0 || self.chains == 0 || self.check_every == 0 {
            return bad("thin, chains and check_every must be positive");
        }
        if self.burnin > self.iters {
            return bad("burnin exceeds iters");
        }
        let m = &self.moves;
        if !(m.add > 0.0 && m.delete > 0.0 && m.swap >= 0.0)
            || ![m.add, m.delete, m.swap].iter().all(|v| v.is_finite())
        {
            return bad("move probabilities need add > 0, delete > 0, swap >= 0");
        }
        if !(m.sigma_step > 0.0 && m.sigma_step.is_finite()) {
            return bad("sigma_step must be positive");
        }
        Ok(())
    }

    pub fn kept_draws(&self) -> usize {
        (self.iters - self.burnin) / self.thin
    }
}

/// One retained posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iter: usize,
    pub theta: SparseVector,
    pub eta: SymmetricNormalMixture,
    pub loglik: f64,
}

#[derive(Serialize, Deserialize)]
struct DrawRecord {
    iter: usize,
    support: Vec<usize>,
    values: Vec<f64>,
    atoms: Vec<Atom>,
    loglik: f64,
}

#[derive(Debug, Clone)]
pub struct Chain {
    pub draws: Vec<Draw>,
    pub counters: MoveCounters,
    pub seed: u64,
    pub config: McmcConfig,
    pub prior: PriorConfig,
}

impl Chain {
    /// One JSON object per kept draw.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for d in &self.draws {
            let rec = DrawRecord {
                iter: d.iter,
                support: d.theta.support().to_vec(),
                values: d.theta.values().to_vec(),
                atoms: d.eta.atoms().to_vec(),
                loglik: d.loglik,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads draws written by [`Chain::write_jsonl`]; `p` is the ambient dimension.
pub fn read_draws_jsonl<R: BufRead>(reader: R, p: usize) -> Result<Vec<Draw>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DrawRecord = serde_json::from_str(&line)?;
        out.push(Draw {
            iter: rec.iter,
            theta: SparseVector::new(p, rec.support, rec.values)?,
            eta: SymmetricNormalMixture::new(rec.atoms)?,
            loglik: rec.loglik,
        });
    }
    Ok(out)
}

/// Forward selection with least-squares refits; returns the EBIC-best fit.
pub fn screening_init(data: &Dataset, max_size: Option<usize>) -> Result<SparseVector> {
    let (n, p) = (data.n(), data.p());
    let cap = max_size
        .unwrap_or_else(|| 20.min(n / 3).min(p))
        .min(p)
        .min(n.saturating_sub(1));
    let x = data.x();
    let y = nalgebra::DVector::from_column_slice(data.y());
    let norms: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    let ebic = |rss: f64, k: usize| {
        n as f64 * (rss.max(1e-300) / n as f64).ln()
            + k as f64 * ((n as f64).ln() + 2.0 * (p as f64).ln())
    };
    let mut chosen: Vec<usize> = Vec::new();
    let mut resid = y.clone();
    let mut best = (ebic(y.norm_squared(), 0), Vec::new(), Vec::new());
    for _ in 0..cap {
        let next = (0..p)
            .filter(|j| norms[*j] > 0.0 && !chosen.contains(j))
            .map(|j| (j, (x.column(j).dot(&resid) / norms[j]).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((j, _)) = next else { break };
        chosen.push(j);
        let xs = DMatrix::from_fn(n, chosen.len(), |i, k| x[(i, chosen[k])]);
        let Some(coef) = xs.clone().svd(true, true).solve(&y, 1e-12).ok() else {
            break;
        };
        resid = &y - &xs * &coef;
        let score = ebic(resid.norm_squared(), chosen.len());
        if score < best.0 {
            best = (score, chosen.clone(), coef.iter().copied().collect());
        }
    }
    let mut pairs: Vec<(usize, f64)> = best
        .1
        .into_iter()
        .zip(best.2)
        .filter(|(_, v)| *v != 0.0 && v.is_finite())
        .collect();
    pairs.sort_by_key(|(j, _)| *j);
    let (support, values) = pairs.into_iter().unzip();
    SparseVector::new(p, support, values)
}

/// Initial state per the configured strategy.
pub fn initial_state<R: Rng + ?Sized>(
    data: &Dataset,
    prior: &PriorConfig,
    mcmc: &McmcConfig,
    rng: &mut R,
) -> Result<McmcState> {
    let theta = match &mcmc.init {
        InitStrategy::Empty => SparseVector::zeros(data.p()),
        InitStrategy::Screening { max_size } => screening_init(data, *max_size)?,
    };
    let tau = theta
        .values()
        .iter()
        .map(|t| state::draw_tau(*t, prior.lambda, rng))
        .collect();
    match &mcmc.fixed_eta {
        Some(eta) => McmcState::with_fixed_eta(data, theta, tau, eta, rng),
        None => {
            let sticks = priors::sample_sticks(prior, rng);
            let atoms = (0..prior.k)
                .map(|_| priors::sample_base(prior, rng))
                .collect();
            McmcState::from_parts(data, theta, tau, sticks, atoms, rng)
        }
    }
}

/// One full sweep with `support_moves` add/delete/swap proposals. Refreshes
/// the cached log-likelihood at the end.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut McmcState,
    data: &Dataset,
    prior: &PriorConfig,
    moves: &MoveConfig,
    support_moves: usize,
    rng: &mut R,
) -> Result<()> {
    update_allocations(state, data, rng);
    update_sticks(state, prior.alpha0, rng);
    update_atoms(state, data, prior, moves.sigma_step, rng);
    for _ in 0..support_moves {
        update_support(state, data, prior, moves, rng)?;
    }
    update_coefficients(state, data, rng)?;
    update_tau(state, prior.lambda, rng);
    state.refresh_loglik()
}

/// Runs one chain. Deterministic given the rng state.
pub fn run_mcmc<R: Rng + ?Sized>(
    data: &Dataset,
    prior: &PriorConfig,
    mcmc: &McmcConfig,
    rng: &mut R,
    seed: u64,
) -> Result<Chain> {
    prior.validate()?;
    mcmc.validate()?;
    let mut state = initial_state(data, prior, mcmc, rng)?;
    let mut draws = Vec::with_capacity(mcmc.kept_draws());
    // During burn-in each sweep makes s + 1 support moves. The count is then
    // frozen at the burn-in average: a count that tracks the current state
    // would not leave the posterior invariant.
    let mut frozen = state.theta().len() + 1;
    let mut burn_total = 0usize;
    for it in 0..mcmc.iters {
        let support_moves = if it < mcmc.burnin {
            state.theta().len() + 1
        } else {
            frozen
        };
        sweep(&mut state, data, prior, &mcmc.moves, support_moves, rng)?;
        if it < mcmc.burnin {
            burn_total += support_moves;
            if it + 1 == mcmc.burnin {
                frozen = (burn_total as f64 / mcmc.burnin as f64).round().max(1.0) as usize;
            }
        }
        if !state.loglik().is_finite() {
            return Err(Error::NonFinite {
                iter: it,
                dump: state.dump(),
            });
        }
        if (it + 1) % mcmc.check_every == 0 {
            let drift = state.resync(data)?;
            if !(drift.abs() < DRIFT_TOL) {
                return Err(Error::LoglikDrift { iter: it, drift });
            }
        }
        if it >= mcmc.burnin && (it + 1 - mcmc.burnin) % mcmc.thin == 0 {
            draws.push(Draw {
                iter: it,
                theta: state.theta().clone(),
                eta: state.mixture()?,
                loglik: state.loglik(),
            });
        }
        log::debug!(
            "sweep {it}: s = {}, loglik = {:.6}",
            state.theta().len(),
            state.loglik()
        );
    }
    Ok(Chain {
        draws,
        counters: state.counters.clone(),
        seed,
        config: mcmc.clone(),
        prior: prior.clone(),
    })
}

/// Seed of chain `c` under master seed `seed`.
pub fn chain_seed(seed: u64, c: usize) -> u64 {
    derive_seed(seed, &[c as u64])
}

/// Runs `mcmc.chains` independent chains in parallel, ordered by chain index.
pub fn run_chains(data: &Dataset, prior: &PriorConfig, mcmc: &McmcConfig) -> Result<Vec<Chain>> {
    (0..mcmc.chains)
        .into_par_iter()
        .map(|c| {
            let seed = chain_seed(mcmc.seed, c);
            run_mcmc(data, prior, mcmc, &mut seeded(seed), seed)
        })
        .collect()
}

/// Empirical frequency of visited supports.
pub fn model_weights(chain: &Chain) -> Result<ModelWeightTable> {
    merged_model_weights(std::slice::from_ref(chain))
}

/// Frequencies pooled over chains (counts are summed in chain order).
pub fn merged_model_weights(chains: &[Chain]) -> Result<ModelWeightTable> {
    draw_weights(chains.iter().flat_map(|c| &c.draws))
}

/// Frequencies of the supports of raw draws.
pub fn draw_weights<'a>(draws: impl IntoIterator<Item = &'a Draw>) -> Result<ModelWeightTable> {
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    for d in draws {
        *counts.entry(d.theta.support().to_vec()).or_insert(0) += 1;
    }
    if counts.is_empty() {
        return Err(Error::EmptyChain);
    }
    ModelWeightTable::from_counts(&counts, WeightSource::Mcmc)
}
