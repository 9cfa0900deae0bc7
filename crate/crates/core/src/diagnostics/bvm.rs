//! Normal-mixture approximation of the marginal posterior and a
//! moment-matching surrogate for its total-variation distance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::evidence::{efficient_score, info_matrix};
use super::GramSummary;
use crate::error::{Error, Result};
use crate::model::{v_eta, Dataset, QuadratureGrid, SymmetricNormalMixture, Truth};
use crate::sampler::{draw_weights, Draw, ModelWeightTable};

/// Models with fewer within-model draws count as full discrepancy.
pub const MIN_MODEL_DRAWS: usize = 30;

/// `N(center, precision^{-1})` for `h_S = sqrt(n) (theta_S - theta0_S)`,
/// with mixture weight `weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct BvmComponent {
    pub support: Vec<usize>,
    pub center: DVector<f64>,
    pub precision: DMatrix<f64>,
    pub weight: f64,
}

/// One component per model in `weights`: center `V^{-1} G`, precision `V`.
pub fn bvm_approximant(
    data: &Dataset,
    weights: &ModelWeightTable,
    eta0: &SymmetricNormalMixture,
    grid: &QuadratureGrid,
) -> Result<Vec<BvmComponent>> {
    let g = GramSummary::from_design(data.x());
    let v = v_eta(eta0, eta0, grid)?;
    weights
        .entries()
        .iter()
        .map(|(sup, &w)| {
            let precision = info_matrix(&g, v, sup);
            let score = efficient_score(data, eta0, sup, grid)?;
            let center = if sup.is_empty() {
                score
            } else {
                precision
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::Singular(sup.clone()))?
                    .solve(&score)
            };
            Ok(BvmComponent {
                support: sup.clone(),
                center,
                precision,
                weight: w,
            })
        })
        .collect()
}

fn scaled_draws(draws: &[Draw], support: &[usize], truth: &Truth, n: usize) -> Vec<DVector<f64>> {
    let root_n = (n as f64).sqrt();
    let t0: Vec<f64> = support.iter().map(|&j| truth.theta0.get(j)).collect();
    draws
        .iter()
        .filter(|d| d.theta.support() == support)
        .map(|d| {
            DVector::from_iterator(
                t0.len(),
                d.theta
                    .values()
                    .iter()
                    .zip(&t0)
                    .map(|(t, z)| root_n * (t - z)),
            )
        })
        .collect()
}

fn moments(h: &[DVector<f64>], k: usize) -> (DVector<f64>, DMatrix<f64>) {
    let m = h.len() as f64;
    let mean = h.iter().fold(DVector::zeros(k), |acc, x| acc + x) / m;
    let mut cov = DMatrix::zeros(k, k);
    for x in h {
        let d = x - &mean;
        cov += &d * d.transpose();
    }
    (mean, cov / (m - 1.0))
}

/// Component built from the chain's own within-model moments; `None` when
/// the model has fewer than two draws or a singular spread.
pub fn empirical_component(
    draws: &[Draw],
    support: &[usize],
    truth: &Truth,
    n: usize,
    weight: f64,
) -> Option<BvmComponent> {
    let h = scaled_draws(draws, support, truth, n);
    if h.len() < 2 {
        return None;
    }
    let (mean, cov) = moments(&h, support.len());
    let precision = if support.is_empty() {
        cov
    } else {
        cov.try_inverse()?
    };
    Some(BvmComponent {
        support: support.to_vec(),
        center: mean,
        precision,
        weight,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTv {
    #[serde(rename = "S")]
    pub support: Vec<usize>,
    pub tv_s: f64,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub surrogate_tv: f64,
    pub weight_tv: f64,
    pub per_model: Vec<ModelTv>,
}

/// `KL(N(m, C) || N(mu, P^{-1}))`; `None` when `C` is singular.
fn gaussian_kl(
    m: &DVector<f64>,
    c: &DMatrix<f64>,
    mu: &DVector<f64>,
    p: &DMatrix<f64>,
) -> Option<f64> {
    let k = m.len();
    let cc = c.clone().cholesky()?;
    let pc = p.clone().cholesky()?;
    let log_det_c = 2.0 * cc.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_det_p = 2.0 * pc.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let d = mu - m;
    let kl = 0.5 * ((p * c).trace() + d.dot(&(p * &d)) - k as f64 - log_det_p - log_det_c);
    Some(kl.max(0.0))
}

/// `2 d_V(w, w~) + sum_S w_S TV_S`, where `TV_S = min(1, sqrt(KL/2))`
/// compares a normal fitted to the within-model draws of `h_S` with the
/// approximating component. A surrogate, not an exact total variation.
pub fn tv_surrogate(
    draws: &[Draw],
    approx: &[BvmComponent],
    truth: &Truth,
    n: usize,
) -> Result<TvReport> {
    let mcmc = draw_weights(draws)?;
    let approx_by: BTreeMap<&[usize], &BvmComponent> =
        approx.iter().map(|c| (c.support.as_slice(), c)).collect();
    let mut weight_tv = 0.0;
    for (sup, w) in mcmc.entries() {
        weight_tv += (w - approx_by.get(sup.as_slice()).map_or(0.0, |c| c.weight)).abs();
    }
    for c in approx {
        if mcmc.get(&c.support) == 0.0 {
            weight_tv += c.weight;
        }
    }
    weight_tv *= 0.5;
    let mut within = 0.0;
    let mut per_model = Vec::new();
    for (sup, w) in mcmc.entries() {
        let h = scaled_draws(draws, sup, truth, n);
        let tv_s = match approx_by.get(sup.as_slice()) {
            _ if h.len() < MIN_MODEL_DRAWS => 1.0,
            None => 1.0,
            Some(_) if sup.is_empty() => 0.0,
            Some(comp) => {
                let (m, c) = moments(&h, sup.len());
                gaussian_kl(&m, &c, &comp.center, &comp.precision)
                    .map_or(1.0, |kl| (kl / 2.0).sqrt().min(1.0))
            }
        };
        within += w * tv_s;
        per_model.push(ModelTv {
            support: sup.clone(),
            tv_s,
            draws: h.len(),
        });
    }
    Ok(TvReport {
        surrogate_tv: 2.0 * weight_tv + within,
        weight_tv,
        per_model,
    })
}
