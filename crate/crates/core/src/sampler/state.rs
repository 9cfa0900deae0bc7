//! Augmented sampler state and the individual Gibbs / Metropolis updates.
//!
//! The error density is represented by `K` atom pairs `(z_k, sigma_k)` with
//! pair weights `w_k`; mixture component `c in [0, 2K)` is pair `c / 2` with
//! location `+z` for even `c` and `-z` for odd `c`, each with weight `w_k / 2`.
//! The Laplace slab is written as a normal scale mixture with one latent
//! variance `tau_j` per active coordinate.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, InverseGaussian, StandardNormal};
use serde::{Deserialize, Serialize};

use super::truncnorm::truncated_normal;
use super::{AddProposal, MoveConfig};
use crate::error::{Error, Result};
use crate::model::{Dataset, SparseVector, SymmetricNormalMixture, LN_SQRT_2PI};
use crate::priors::{self, ln_binomial, log_pi_p, log_slab, PriorConfig};

const THETA_FLOOR: f64 = 1e-10;
const CHOL_JITTER: f64 = 1e-10;
const MIN_INFO: f64 = 1e-12;

/// Attempt / acceptance counters per move type.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCounters {
    pub add_attempts: u64,
    pub add_accepts: u64,
    pub delete_attempts: u64,
    pub delete_accepts: u64,
    pub swap_attempts: u64,
    pub swap_accepts: u64,
    pub sigma_attempts: u64,
    pub sigma_accepts: u64,
}

impl MoveCounters {
    pub fn merge(&mut self, other: &MoveCounters) {
        self.add_attempts += other.add_attempts;
        self.add_accepts += other.add_accepts;
        self.delete_attempts += other.delete_attempts;
        self.delete_accepts += other.delete_accepts;
        self.swap_attempts += other.swap_attempts;
        self.swap_accepts += other.swap_accepts;
        self.sigma_attempts += other.sigma_attempts;
        self.sigma_accepts += other.sigma_accepts;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportMove {
    Add,
    Delete,
    Swap,
}

#[derive(Debug, Clone)]
pub struct McmcState {
    pub(crate) theta: SparseVector,
    pub(crate) tau: Vec<f64>,
    pub(crate) alloc: Vec<usize>,
    pub(crate) sticks: Vec<f64>,
    pub(crate) atoms: Vec<(f64, f64)>,
    pub(crate) weights: Vec<f64>,
    pub(crate) eta_fixed: bool,
    pub(crate) resid: Vec<f64>,
    pub(crate) loglik: f64,
    pub counters: MoveCounters,
}

/// Splits a symmetric mixture into atom pairs and pair weights.
fn pairs_of(eta: &SymmetricNormalMixture) -> (Vec<f64>, Vec<(f64, f64)>) {
    let mut weights = Vec::new();
    let mut atoms = Vec::new();
    for a in eta.atoms() {
        if a.z > 0.0 {
            weights.push(2.0 * a.w);
            atoms.push((a.z, a.sigma));
        } else if a.z == 0.0 {
            weights.push(a.w);
            atoms.push((0.0, a.sigma));
        }
    }
    (weights, atoms)
}

impl McmcState {
    /// Builds a state from explicit parts and allocates observations by
    /// drawing from their conditional.
    pub fn from_parts<R: Rng + ?Sized>(
        data: &Dataset,
        theta: SparseVector,
        tau: Vec<f64>,
        sticks: Vec<f64>,
        atoms: Vec<(f64, f64)>,
        rng: &mut R,
    ) -> Result<Self> {
        data.check_dim(&theta)?;
        if tau.len() != theta.len() || tau.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidConfig(
                "tau must be positive, one per active coordinate".into(),
            ));
        }
        if sticks.len() != atoms.len() || sticks.len() < 2 {
            return Err(Error::InvalidConfig(
                "need K >= 2 sticks and matching atoms".into(),
            ));
        }
        let weights = priors::stick_weights(&sticks);
        let resid = data.residuals(&theta)?;
        let mut state = Self {
            theta,
            tau,
            alloc: vec![0; data.n()],
            sticks,
            atoms,
            weights,
            eta_fixed: false,
            resid,
            loglik: 0.0,
            counters: MoveCounters::default(),
        };
        update_allocations(&mut state, data, rng);
        state.loglik = state.marginal_loglik()?;
        Ok(state)
    }

    /// A state whose error density stays at `eta` for the whole run.
    pub fn with_fixed_eta<R: Rng + ?Sized>(
        data: &Dataset,
        theta: SparseVector,
        tau: Vec<f64>,
        eta: &SymmetricNormalMixture,
        rng: &mut R,
    ) -> Result<Self> {
        let (weights, atoms) = pairs_of(eta);
        let k = atoms.len();
        let mut state =
            Self::from_parts(data, theta, tau, vec![0.5; k.max(2)], pad(atoms, 2), rng)?;
        state.weights = weights;
        state.weights.resize(state.atoms.len(), 0.0);
        state.eta_fixed = true;
        update_allocations(&mut state, data, rng);
        state.loglik = state.marginal_loglik()?;
        Ok(state)
    }

    /// Draws every parameter and latent from the prior; allocations follow
    /// the pair weights, not the data.
    pub fn from_prior<R: Rng + ?Sized>(
        data: &Dataset,
        cfg: &PriorConfig,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let theta = priors::sample_theta(data.p(), cfg, rng)?;
        let tau = theta
            .values()
            .iter()
            .map(|t| draw_tau(*t, cfg.lambda, rng))
            .collect();
        let sticks = priors::sample_sticks(cfg, rng);
        let atoms = (0..cfg.k).map(|_| priors::sample_base(cfg, rng)).collect();
        let mut state = Self::from_parts(data, theta, tau, sticks, atoms, rng)?;
        state.alloc = (0..data.n())
            .map(|_| state.draw_component_prior(rng))
            .collect();
        Ok(state)
    }

    fn draw_component_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pair = self.weights.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pair = k;
                break;
            }
        }
        if self.atoms[pair].0 == 0.0 {
            2 * pair
        } else {
            2 * pair + usize::from(rng.random::<bool>())
        }
    }

    pub fn theta(&self) -> &SparseVector {
        &self.theta
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn alloc(&self) -> &[usize] {
        &self.alloc
    }

    pub fn sticks(&self) -> &[f64] {
        &self.sticks
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn pair_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn residuals(&self) -> &[f64] {
        &self.resid
    }

    /// Cached marginal log-likelihood `sum_i log eta(y_i - x_i theta)`.
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn mixture(&self) -> Result<SymmetricNormalMixture> {
        SymmetricNormalMixture::from_pairs(&self.weights, &self.atoms)
    }

    #[inline]
    pub(crate) fn location(&self, c: usize) -> f64 {
        let z = self.atoms[c / 2].0;
        if c % 2 == 0 {
            z
        } else {
            -z
        }
    }

    #[inline]
    fn precision(&self, c: usize) -> f64 {
        let s = self.atoms[c / 2].1;
        1.0 / (s * s)
    }

    pub(crate) fn marginal_loglik(&self) -> Result<f64> {
        let eta = self.mixture()?;
        Ok(self.resid.iter().map(|r| eta.log_pdf(*r)).sum())
    }

    /// Recomputes residuals from scratch, returning the cached log-likelihood
    /// minus its recomputation.
    pub fn resync(&mut self, data: &Dataset) -> Result<f64> {
        let cached = self.marginal_loglik()?;
        self.resid = data.residuals(&self.theta)?;
        self.loglik = self.marginal_loglik()?;
        Ok(cached - self.loglik)
    }

    /// Replaces the responses' effect after `data` changed (same design).
    pub fn refresh_data(&mut self, data: &Dataset) -> Result<()> {
        self.resid = data.residuals(&self.theta)?;
        self.loglik = self.marginal_loglik()?;
        Ok(())
    }

    pub(crate) fn refresh_loglik(&mut self) -> Result<()> {
        self.loglik = self.marginal_loglik()?;
        Ok(())
    }

    /// Simulates responses `x_i theta + loc(alloc_i) + sigma(alloc_i) u_i`.
    pub fn simulate_response<R: Rng + ?Sized>(&self, data: &Dataset, rng: &mut R) -> Vec<f64> {
        (0..data.n())
            .map(|i| {
                let c = self.alloc[i];
                let u: f64 = StandardNormal.sample(rng);
                data.row_dot(i, &self.theta) + self.location(c) + self.atoms[c / 2].1 * u
            })
            .collect()
    }

    /// Short human-readable dump for abort diagnostics.
    pub fn dump(&self) -> String {
        format!(
            "support={:?} values={:?} tau={:?} pair_weights={:?} atoms={:?}",
            self.theta.support(),
            self.theta.values(),
            self.tau,
            self.weights,
            self.atoms
        )
    }
}

fn pad(mut atoms: Vec<(f64, f64)>, min: usize) -> Vec<(f64, f64)> {
    while atoms.len() < min {
        let last = *atoms.last().expect("mixture has an atom");
        atoms.push(last);
    }
    atoms
}

/// `tau` from `1/tau | theta ~ InverseGaussian(lambda / |theta|, lambda^2)`.
pub(crate) fn draw_tau<R: Rng + ?Sized>(theta: f64, lambda: f64, rng: &mut R) -> f64 {
    let mean = lambda / theta.abs().max(THETA_FLOOR);
    let ig =
        InverseGaussian::new(mean, lambda * lambda).expect("positive inverse-Gaussian parameters");
    let inv: f64 = ig.sample(rng);
    (1.0 / inv).max(f64::MIN_POSITIVE)
}

/// A centered pair puts its whole weight on the even component, which keeps
/// allocations deterministic for a single centered atom.
fn component_log_weight(z: f64, w: f64, c: usize) -> f64 {
    match (z == 0.0, c % 2 == 0) {
        (true, true) => w.ln(),
        (true, false) => f64::NEG_INFINITY,
        (false, _) => (0.5 * w).ln(),
    }
}

/// Resamples every observation's mixture component given its residual.
pub fn update_allocations<R: Rng + ?Sized>(state: &mut McmcState, _data: &Dataset, rng: &mut R) {
    let k2 = 2 * state.atoms.len();
    let mut lnc = vec![f64::NEG_INFINITY; k2];
    let mut half_prec = vec![0.0; k2];
    let mut loc = vec![0.0; k2];
    for c in 0..k2 {
        let (_, s) = state.atoms[c / 2];
        let w = state.weights[c / 2];
        if w > 0.0 {
            lnc[c] = component_log_weight(state.atoms[c / 2].0, w, c) - s.ln();
        }
        half_prec[c] = 0.5 / (s * s);
        loc[c] = state.location(c);
    }
    let mut buf = vec![0.0; k2];
    for i in 0..state.resid.len() {
        let r = state.resid[i];
        let mut max = f64::NEG_INFINITY;
        for c in 0..k2 {
            let d = r - loc[c];
            let t = lnc[c] - d * d * half_prec[c];
            buf[c] = t;
            if t > max {
                max = t;
            }
        }
        let mut total = 0.0;
        for t in buf.iter_mut() {
            *t = (*t - max).exp();
            total += *t;
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = k2 - 1;
        for (c, t) in buf.iter().enumerate() {
            acc += t;
            if u < acc {
                chosen = c;
                break;
            }
        }
        // never land on a zero-weight component through rounding
        while buf[chosen] == 0.0 && chosen > 0 {
            chosen -= 1;
        }
        state.alloc[i] = chosen;
    }
}

/// Observations per atom pair, both signs pooled.
pub fn pair_counts(state: &McmcState) -> Vec<usize> {
    let mut counts = vec![0; state.atoms.len()];
    for &c in &state.alloc {
        counts[c / 2] += 1;
    }
    counts
}

/// `V_k ~ Beta(1 + n_k, alpha0 + sum_{l > k} n_l)`, last stick fixed at one.
pub fn update_sticks<R: Rng + ?Sized>(state: &mut McmcState, alpha0: f64, rng: &mut R) {
    if state.eta_fixed {
        return;
    }
    let counts = pair_counts(state);
    let kk = state.sticks.len();
    let mut tail: usize = counts.iter().sum();
    for k in 0..kk {
        tail -= counts[k];
        state.sticks[k] = if k + 1 == kk {
            1.0
        } else {
            Beta::new(1.0 + counts[k] as f64, alpha0 + tail as f64)
                .expect("positive beta parameters")
                .sample(rng)
        };
    }
    state.weights = priors::stick_weights(&state.sticks);
}

/// Location (truncated normal) and scale (random walk on `log sigma`) updates
/// for each atom pair; empty pairs are refreshed from the base measure.
pub fn update_atoms<R: Rng + ?Sized>(
    state: &mut McmcState,
    _data: &Dataset,
    cfg: &PriorConfig,
    sigma_step: f64,
    rng: &mut R,
) {
    if state.eta_fixed {
        return;
    }
    let kk = state.atoms.len();
    let mut count = vec![0usize; kk];
    let mut sum = vec![0.0; kk];
    let mut sumsq = vec![0.0; kk];
    for (i, &c) in state.alloc.iter().enumerate() {
        let r = if c % 2 == 0 {
            state.resid[i]
        } else {
            -state.resid[i]
        };
        let k = c / 2;
        count[k] += 1;
        sum[k] += r;
        sumsq[k] += r * r;
    }
    for k in 0..kk {
        if count[k] == 0 {
            state.atoms[k] = priors::sample_base(cfg, rng);
            continue;
        }
        let n = count[k] as f64;
        let (_, sigma) = state.atoms[k];
        let z = truncated_normal(sum[k] / n, sigma / n.sqrt(), -cfg.m, cfg.m, rng);
        let ss = (sumsq[k] - 2.0 * z * sum[k] + n * z * z).max(0.0);
        let proposal = sigma * (sigma_step * rng.sample::<f64, _>(StandardNormal)).exp();
        state.counters.sigma_attempts += 1;
        let mut new_sigma = sigma;
        if proposal >= cfg.sigma1 && proposal <= cfg.sigma2 {
            let log_target = |s: f64| -n * s.ln() - 0.5 * ss / (s * s) + s.ln();
            if rng.random::<f64>().ln() < log_target(proposal) - log_target(sigma) {
                new_sigma = proposal;
                state.counters.sigma_accepts += 1;
            }
        }
        state.atoms[k] = (z, new_sigma);
    }
}

/// Sufficient statistics `(a, b)` of coordinate `j` against the working
/// residual `resid - loc + t_out * x_out` under the current allocations:
/// `a = sum x_ij^2 / sigma_i^2`, `b = sum x_ij e_i / sigma_i^2`.
fn coordinate_stats(
    state: &McmcState,
    data: &Dataset,
    j: usize,
    out: Option<(usize, f64)>,
) -> (f64, f64) {
    let xj = data.x().column(j);
    let xo = out.map(|(o, t)| (data.x().column(o), t));
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..state.resid.len() {
        let c = state.alloc[i];
        let prec = state.precision(c);
        let mut e = state.resid[i] - state.location(c);
        if let Some((col, t)) = &xo {
            e += t * col[i];
        }
        let x = xj[i];
        a += x * x * prec;
        b += x * e * prec;
    }
    (a, b)
}

struct Proposal {
    mean: f64,
    sd: f64,
    from_prior: bool,
}

fn proposal_for(a: f64, b: f64, kind: AddProposal) -> Proposal {
    if kind == AddProposal::Prior || a < MIN_INFO {
        Proposal {
            mean: 0.0,
            sd: 0.0,
            from_prior: true,
        }
    } else {
        Proposal {
            mean: b / a,
            sd: 1.0 / a.sqrt(),
            from_prior: false,
        }
    }
}

impl Proposal {
    fn draw<R: Rng + ?Sized>(&self, lambda: f64, rng: &mut R) -> f64 {
        let t = if self.from_prior {
            let e: f64 = rng.sample(rand_distr::Exp1);
            if rng.random::<bool>() {
                e / lambda
            } else {
                -e / lambda
            }
        } else {
            self.mean + self.sd * rng.sample::<f64, _>(StandardNormal)
        };
        if t == 0.0 {
            f64::MIN_POSITIVE
        } else {
            t
        }
    }

    fn log_density(&self, t: f64, lambda: f64) -> f64 {
        if self.from_prior {
            log_slab(&[t], lambda)
        } else {
            let d = (t - self.mean) / self.sd;
            -0.5 * d * d - self.sd.ln() - LN_SQRT_2PI
        }
    }
}

/// `log [L(t)/L(0)] + log g(t) - log q(t)` for inserting value `t` given
/// coordinate statistics `(a, b)`.
fn log_insert_term(a: f64, b: f64, t: f64, q: &Proposal, lambda: f64) -> f64 {
    t * b - 0.5 * t * t * a + log_slab(&[t], lambda) - q.log_density(t, lambda)
}

/// Model-size part of the add ratio `s -> s + 1`, including move-choice and
/// index-choice probabilities.
fn log_add_size_term(s: usize, p: usize, cfg: &PriorConfig, moves: &MoveConfig) -> Result<f64> {
    Ok(
        log_pi_p(s + 1, p, cfg)? - log_pi_p(s, p, cfg)? + ln_binomial(p, s) - ln_binomial(p, s + 1)
            + (moves.delete / moves.add).ln()
            + ((p - s) as f64 / (s + 1) as f64).ln(),
    )
}

/// Log acceptance ratio for adding coordinate `j` (not in the support) with
/// value `t`.
pub fn log_add_ratio(
    state: &McmcState,
    data: &Dataset,
    cfg: &PriorConfig,
    moves: &MoveConfig,
    j: usize,
    t: f64,
) -> Result<f64> {
    let (a, b) = coordinate_stats(state, data, j, None);
    let q = proposal_for(a, b, moves.add_proposal);
    Ok(log_insert_term(a, b, t, &q, cfg.lambda)
        + log_add_size_term(state.theta.len(), data.p(), cfg, moves)?)
}

/// Log acceptance ratio for deleting the support entry at position `pos`.
pub fn log_delete_ratio(
    state: &McmcState,
    data: &Dataset,
    cfg: &PriorConfig,
    moves: &MoveConfig,
    pos: usize,
) -> Result<f64> {
    let j = state.theta.support()[pos];
    let t = state.theta.values()[pos];
    let (a, b) = coordinate_stats(state, data, j, Some((j, t)));
    let q = proposal_for(a, b, moves.add_proposal);
    Ok(-log_insert_term(a, b, t, &q, cfg.lambda)
        - log_add_size_term(state.theta.len() - 1, data.p(), cfg, moves)?)
}

fn insert_coordinate<R: Rng + ?Sized>(
    state: &mut McmcState,
    data: &Dataset,
    j: usize,
    t: f64,
    lambda: f64,
    rng: &mut R,
) {
    let pos = state.theta.set(j, t);
    state.tau.insert(pos, draw_tau(t, lambda, rng));
    let col = data.x().column(j);
    for (r, x) in state.resid.iter_mut().zip(col.iter()) {
        *r -= t * x;
    }
}

fn remove_coordinate(state: &mut McmcState, data: &Dataset, pos: usize) {
    let (j, t) = state.theta.remove_at(pos);
    state.tau.remove(pos);
    let col = data.x().column(j);
    for (r, x) in state.resid.iter_mut().zip(col.iter()) {
        *r += t * x;
    }
}

/// Uniformly chosen index outside the (sorted) support.
fn random_outside<R: Rng + ?Sized>(support: &[usize], p: usize, rng: &mut R) -> usize {
    let mut r = rng.random_range(0..p - support.len());
    for &s in support {
        if s <= r {
            r += 1;
        } else {
            break;
        }
    }
    r
}

/// Applies one add / delete / swap Metropolis-Hastings move. Returns the move
/// attempted and whether it was accepted; impossible moves are rejected
/// without touching the state.
pub fn update_support<R: Rng + ?Sized>(
    state: &mut McmcState,
    data: &Dataset,
    cfg: &PriorConfig,
    moves: &MoveConfig,
    rng: &mut R,
) -> Result<(SupportMove, bool)> {
    let p = data.p();
    let s = state.theta.len();
    let u = rng.random::<f64>() * (moves.add + moves.delete + moves.swap);
    let kind = if u < moves.add {
        SupportMove::Add
    } else if u < moves.add + moves.delete {
        SupportMove::Delete
    } else {
        SupportMove::Swap
    };
    let accepted = match kind {
        SupportMove::Add => {
            state.counters.add_attempts += 1;
            if s == p {
                return Ok((kind, false));
            }
            let j = random_outside(state.theta.support(), p, rng);
            let (a, b) = coordinate_stats(state, data, j, None);
            let q = proposal_for(a, b, moves.add_proposal);
            let t = q.draw(cfg.lambda, rng);
            let log_ratio =
                log_insert_term(a, b, t, &q, cfg.lambda) + log_add_size_term(s, p, cfg, moves)?;
            let ok = rng.random::<f64>().ln() < log_ratio;
            if ok {
                insert_coordinate(state, data, j, t, cfg.lambda, rng);
                state.counters.add_accepts += 1;
            }
            ok
        }
        SupportMove::Delete => {
            state.counters.delete_attempts += 1;
            if s == 0 {
                return Ok((kind, false));
            }
            let pos = rng.random_range(0..s);
            let log_ratio = log_delete_ratio(state, data, cfg, moves, pos)?;
            let ok = rng.random::<f64>().ln() < log_ratio;
            if ok {
                remove_coordinate(state, data, pos);
                state.counters.delete_accepts += 1;
            }
            ok
        }
        SupportMove::Swap => {
            state.counters.swap_attempts += 1;
            if s == 0 || s == p {
                return Ok((kind, false));
            }
            let pos = rng.random_range(0..s);
            let j = state.theta.support()[pos];
            let tj = state.theta.values()[pos];
            let k = random_outside(state.theta.support(), p, rng);
            let (ak, bk) = coordinate_stats(state, data, k, Some((j, tj)));
            let (aj, bj) = coordinate_stats(state, data, j, Some((j, tj)));
            let qk = proposal_for(ak, bk, moves.add_proposal);
            let qj = proposal_for(aj, bj, moves.add_proposal);
            let tk = qk.draw(cfg.lambda, rng);
            let log_ratio = log_insert_term(ak, bk, tk, &qk, cfg.lambda)
                - log_insert_term(aj, bj, tj, &qj, cfg.lambda);
            let ok = rng.random::<f64>().ln() < log_ratio;
            if ok {
                remove_coordinate(state, data, pos);
                insert_coordinate(state, data, k, tk, cfg.lambda, rng);
                state.counters.swap_accepts += 1;
            }
            ok
        }
    };
    Ok((kind, accepted))
}

/// Gaussian full conditional of the active coefficients given allocations and
/// slab variances.
pub fn update_coefficients<R: Rng + ?Sized>(
    state: &mut McmcState,
    data: &Dataset,
    rng: &mut R,
) -> Result<()> {
    let d = state.theta.len();
    if d == 0 {
        return Ok(());
    }
    let support = state.theta.support().to_vec();
    let n = data.n();
    let mut prec_mat = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let x = data.x();
    let y = data.y();
    let mut row = vec![0.0; d];
    for i in 0..n {
        let c = state.alloc[i];
        let prec = state.precision(c);
        let target = y[i] - state.location(c);
        for (k, &j) in support.iter().enumerate() {
            row[k] = x[(i, j)];
        }
        for a in 0..d {
            let xa = row[a] * prec;
            rhs[a] += xa * target;
            for b in 0..=a {
                prec_mat[(a, b)] += xa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            prec_mat[(b, a)] = prec_mat[(a, b)];
        }
        prec_mat[(a, a)] += 1.0 / state.tau[a];
    }
    let chol = match Cholesky::new(prec_mat.clone()) {
        Some(c) => c,
        None => {
            let jittered = prec_mat + DMatrix::identity(d, d) * CHOL_JITTER;
            Cholesky::new(jittered).ok_or_else(|| Error::Singular(support.clone()))?
        }
    };
    let mean = chol.solve(&rhs);
    let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    // L^T v = z gives v ~ N(0, A^-1)
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Singular(support.clone()))?;
    let old: Vec<f64> = state.theta.values().to_vec();
    for (k, v) in state.theta.values_mut().iter_mut().enumerate() {
        let t = mean[k] + noise[k];
        *v = if t == 0.0 { f64::MIN_POSITIVE } else { t };
    }
    for (k, &j) in support.iter().enumerate() {
        let delta = old[k] - state.theta.values()[k];
        let col = x.column(j);
        for (r, xv) in state.resid.iter_mut().zip(col.iter()) {
            *r += delta * xv;
        }
    }
    Ok(())
}

/// Inverse-Gaussian update of each active slab variance.
pub fn update_tau<R: Rng + ?Sized>(state: &mut McmcState, lambda: f64, rng: &mut R) {
    for k in 0..state.theta.len() {
        state.tau[k] = draw_tau(state.theta.values()[k], lambda, rng);
    }
}
