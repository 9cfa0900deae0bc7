//! The product prior on `(theta, eta)`: a dimension prior, a uniform choice of
//! support given its size, independent Laplace slabs, and a symmetrized
//! Dirichlet-process mixture of normals for the error density.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{SparseVector, SymmetricNormalMixture};

const RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    /// Laplace slab scale.
    pub lambda: f64,
    /// Decay exponent `a` of the default dimension prior `pi_p(s) ~ p^(-a s)`.
    pub dim_prior_a: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(rename = "A3")]
    pub a3: f64,
    #[serde(rename = "A4")]
    pub a4: f64,
    /// Dirichlet-process concentration.
    pub alpha0: f64,
    /// Atom locations live in `[-M, M]`.
    #[serde(rename = "M")]
    pub m: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Stick-breaking truncation.
    #[serde(rename = "K")]
    pub k: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            dim_prior_a: 1.0,
            a1: 1.0,
            a2: 1.0,
            a3: 1.0,
            a4: 1.0,
            alpha0: 1.0,
            m: 3.0,
            sigma1: 0.5,
            sigma2: 2.0,
            k: 30,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        let pos = [
            self.lambda,
            self.dim_prior_a,
            self.a1,
            self.a2,
            self.a3,
            self.a4,
            self.alpha0,
            self.m,
            self.sigma1,
        ];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad(
                "lambda, dim_prior_a, A1..A4, alpha0, M and sigma1 must be positive and finite",
            );
        }
        if !(self.lambda * self.lambda).is_normal() {
            return bad("lambda is too extreme for lambda^2 to be a normal float");
        }
        if !(self.sigma2.is_finite() && self.sigma1 < self.sigma2) {
            return bad("need sigma1 < sigma2");
        }
        if self.k < 2 {
            return bad("stick truncation K must be at least 2");
        }
        Ok(())
    }

    /// Sets `dim_prior_a` and the matching ratio constants `A1 = A2 = 1`,
    /// `A3 = A4 = a`.
    pub fn with_dim_prior_a(mut self, a: f64) -> Self {
        self.dim_prior_a = a;
        self.a1 = 1.0;
        self.a2 = 1.0;
        self.a3 = a;
        self.a4 = a;
        self
    }
}

/// A prior on the model size `s in {0, ..., p}`.
pub trait DimensionPrior {
    fn log_mass(&self, s: usize, p: usize) -> Result<f64>;
}

/// `pi_p(s) proportional to p^(-a s)`, normalized over `0..=p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDecay {
    pub a: f64,
}

impl DimensionPrior for PowerDecay {
    fn log_mass(&self, s: usize, p: usize) -> Result<f64> {
        if s > p {
            return Err(Error::SizeOutOfRange { s, p });
        }
        let step = self.a * (p as f64).ln();
        // log of sum_{s=0}^p r^s with r = p^-a
        let log_norm = if step == 0.0 {
            ((p + 1) as f64).ln()
        } else {
            let log_r = -step;
            (-((p + 1) as f64 * log_r).exp_m1()).ln() - (-log_r.exp_m1()).ln()
        };
        Ok(-(s as f64) * step - log_norm)
    }
}

/// A dimension prior given by explicit (unnormalized) log weights for
/// `s = 0..=p`; construction requires the ratio condition.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDimensionPrior {
    log_mass: Vec<f64>,
}

impl TabulatedDimensionPrior {
    pub fn new(log_weights: Vec<f64>, cfg: &PriorConfig) -> Result<Self> {
        if log_weights.len() < 2 || log_weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "need finite log weights for s = 0..=p".into(),
            ));
        }
        let max = log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let norm = max
            + log_weights
                .iter()
                .map(|v| (v - max).exp())
                .sum::<f64>()
                .ln();
        let prior = Self {
            log_mass: log_weights.iter().map(|v| v - norm).collect(),
        };
        check_ratio_condition(&prior, log_weights.len() - 1, cfg)?;
        Ok(prior)
    }
}

impl DimensionPrior for TabulatedDimensionPrior {
    fn log_mass(&self, s: usize, p: usize) -> Result<f64> {
        if p + 1 != self.log_mass.len() {
            return Err(Error::DimensionMismatch {
                expected: self.log_mass.len() - 1,
                got: p,
            });
        }
        self.log_mass
            .get(s)
            .copied()
            .ok_or(Error::SizeOutOfRange { s, p })
    }
}

/// Checks `A1 p^-A3 pi(s-1) <= pi(s) <= A2 p^-A4 pi(s-1)` for `s = 1..=p`.
pub fn check_ratio_condition(
    prior: &dyn DimensionPrior,
    p: usize,
    cfg: &PriorConfig,
) -> Result<()> {
    let lp = (p as f64).ln();
    let lower = cfg.a1.ln() - cfg.a3 * lp;
    let upper = cfg.a2.ln() - cfg.a4 * lp;
    for s in 1..=p {
        let r = prior.log_mass(s, p)? - prior.log_mass(s - 1, p)?;
        if r < lower - RATIO_TOL || r > upper + RATIO_TOL {
            return Err(Error::InvalidConfig(format!(
                "dimension prior violates the ratio condition at s = {s}: log ratio {r} not in [{lower}, {upper}]"
            )));
        }
    }
    Ok(())
}

/// `log pi_p(s)` under the default power-decay family.
pub fn log_pi_p(s: usize, p: usize, cfg: &PriorConfig) -> Result<f64> {
    PowerDecay { a: cfg.dim_prior_a }.log_mass(s, p)
}

/// Whether `sqrt(n)/p <= lambda <= sqrt(n log p)`. Boundaries are inclusive.
pub fn validate_lambda(lambda: f64, n: usize, p: usize) -> bool {
    let n = n as f64;
    let p = p as f64;
    n.sqrt() / p <= lambda && lambda <= (n * p.ln()).sqrt()
}

/// Log density of independent Laplace(lambda) slabs.
pub fn log_slab(theta_s: &[f64], lambda: f64) -> f64 {
    let c = (0.5 * lambda).ln();
    theta_s.iter().map(|t| c - lambda * t.abs()).sum()
}

/// `log C(p, s)`; exact summation for small `min(s, p - s)`, log-gamma otherwise.
pub fn ln_binomial(p: usize, s: usize) -> f64 {
    debug_assert!(s <= p);
    let k = s.min(p - s);
    if k <= 64 {
        (1..=k).map(|i| ((p - k + i) as f64 / i as f64).ln()).sum()
    } else {
        ln_gamma((p + 1) as f64) - ln_gamma((s + 1) as f64) - ln_gamma((p - s + 1) as f64)
    }
}

/// `log pi_p(s) - log C(p, s) + log g_S(theta_S)`.
pub fn log_prior_theta(theta: &SparseVector, p: usize, cfg: &PriorConfig) -> Result<f64> {
    if theta.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: theta.dim(),
        });
    }
    let s = theta.len();
    Ok(log_pi_p(s, p, cfg)? - ln_binomial(p, s) + log_slab(theta.values(), cfg.lambda))
}

/// Truncated stick-breaking weights; the last stick is treated as 1.
pub fn stick_weights(sticks: &[f64]) -> Vec<f64> {
    let mut remaining = 1.0;
    let last = sticks.len().saturating_sub(1);
    sticks
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let v = if k == last { 1.0 } else { v };
            let w = remaining * v;
            remaining *= 1.0 - v;
            w
        })
        .collect()
}

/// Mirrored mixture from stick variables and atom `(z, sigma)` pairs.
pub fn mixture_from_sticks(sticks: &[f64], atoms: &[(f64, f64)]) -> Result<SymmetricNormalMixture> {
    SymmetricNormalMixture::from_pairs(&stick_weights(sticks), atoms)
}

/// Draws `(z, sigma)` from the uniform base measure on the atom box.
pub fn sample_base<R: Rng + ?Sized>(cfg: &PriorConfig, rng: &mut R) -> (f64, f64) {
    let z = rng.random_range(-cfg.m..=cfg.m);
    let sigma = rng.random_range(cfg.sigma1..=cfg.sigma2);
    (z, sigma)
}

/// Stick variables `V_k ~ Beta(1, alpha0)` for `k < K`, with `V_K = 1`.
pub fn sample_sticks<R: Rng + ?Sized>(cfg: &PriorConfig, rng: &mut R) -> Vec<f64> {
    let beta = Beta::new(1.0, cfg.alpha0).expect("alpha0 validated positive");
    let mut sticks: Vec<f64> = (0..cfg.k).map(|_| beta.sample(rng)).collect();
    *sticks.last_mut().expect("K >= 2") = 1.0;
    sticks
}

/// One draw of the symmetrized truncated Dirichlet-process mixture.
pub fn sample_symmetrized_dp<R: Rng + ?Sized>(
    cfg: &PriorConfig,
    rng: &mut R,
) -> Result<SymmetricNormalMixture> {
    cfg.validate()?;
    let sticks = sample_sticks(cfg, rng);
    let atoms: Vec<_> = (0..cfg.k).map(|_| sample_base(cfg, rng)).collect();
    mixture_from_sticks(&sticks, &atoms)
}

/// Draws `theta` from the spike-and-slab prior.
pub fn sample_theta<R: Rng + ?Sized>(
    p: usize,
    cfg: &PriorConfig,
    rng: &mut R,
) -> Result<SparseVector> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut s = p;
    for k in 0..=p {
        acc += log_pi_p(k, p, cfg)?.exp();
        if u < acc {
            s = k;
            break;
        }
    }
    let mut support = rand::seq::index::sample(rng, p, s).into_vec();
    support.sort_unstable();
    let values = support
        .iter()
        .map(|_| {
            let e: f64 = rng.sample(rand_distr::Exp1);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * e / cfg.lambda
        })
        .collect();
    SparseVector::new(p, support, values)
}
