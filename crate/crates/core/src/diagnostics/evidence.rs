//! Efficient score, information, approximate model weights and the LAN
//! remainder, all at the simulation truth.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::GramSummary;
use crate::error::{Error, Result};
use crate::model::{
    score_centering, v_eta, Dataset, QuadratureGrid, SparseVector, SymmetricNormalMixture,
};
use crate::priors::{ln_binomial, log_pi_p, PriorConfig};
use crate::sampler::{ModelWeightTable, WeightSource};

/// Largest tolerated `|P_eta0 ell_dot_eta|`.
pub const CENTERING_TOL: f64 = 1e-8;

fn check_centering(
    eta: &SymmetricNormalMixture,
    eta0: &SymmetricNormalMixture,
    grid: &QuadratureGrid,
) -> Result<()> {
    let c = score_centering(eta, eta0, grid)?;
    if c.abs() >= CENTERING_TOL {
        return Err(Error::InvalidMixture(format!(
            "score centering {c:e} is not zero"
        )));
    }
    Ok(())
}

/// `ell_dot_eta(eps_i)` at the true errors `eps = y - X theta0`.
fn true_scores(data: &Dataset, eta: &SymmetricNormalMixture) -> Result<Vec<f64>> {
    let truth = data.require_truth()?;
    Ok(data
        .residuals(&truth.theta0)?
        .into_iter()
        .map(|e| eta.ell_dot(e))
        .collect())
}

/// `G_{n,S} = n^{-1/2} sum_i ell_dot_eta(eps_i) x_{i,S}`.
pub fn efficient_score(
    data: &Dataset,
    eta: &SymmetricNormalMixture,
    support: &[usize],
    grid: &QuadratureGrid,
) -> Result<DVector<f64>> {
    let eta0 = &data.require_truth()?.eta0;
    check_centering(eta, eta0, grid)?;
    let scores = DVector::from_vec(true_scores(data, eta)?);
    let scale = (data.n() as f64).sqrt();
    support.iter().try_for_each(|&j| {
        if j < data.p() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: data.p(),
                got: j + 1,
            })
        }
    })?;
    Ok(DVector::from_iterator(
        support.len(),
        support
            .iter()
            .map(|&j| data.x().column(j).dot(&scores) / scale),
    ))
}

/// `V_{n,S} = v * Sigma_S`.
pub fn info_matrix(g: &GramSummary, v: f64, support: &[usize]) -> DMatrix<f64> {
    g.sub(support) * v
}

/// Closed-form approximate posterior model weights over `collection`,
/// normalized over that collection. The approximation expands around the
/// truth, so it only tracks the posterior on supersets of the true support.
pub fn hat_w(
    data: &Dataset,
    cfg: &PriorConfig,
    eta0: &SymmetricNormalMixture,
    collection: &[Vec<usize>],
    grid: &QuadratureGrid,
) -> Result<ModelWeightTable> {
    let v = v_eta(eta0, eta0, grid)?;
    let scores = DVector::from_vec(true_scores(data, eta0)?);
    let p = data.p();
    let mut logw = BTreeMap::new();
    for sup in collection {
        let k = sup.len();
        let mut lw = log_pi_p(k, p, cfg)? - ln_binomial(p, k)
            + k as f64 * ((cfg.lambda / 2.0).ln() + 0.5 * (2.0 * std::f64::consts::PI / v).ln());
        if k > 0 {
            if let Some(&j) = sup.iter().find(|&&j| j >= p) {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: j + 1,
                });
            }
            if data.n() < k {
                return Err(Error::Singular(sup.clone()));
            }
            let xs = data.x().select_columns(sup.iter());
            let scale = xs.norm().max(f64::MIN_POSITIVE);
            let qr = xs.qr();
            let r = qr.r();
            if (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
                return Err(Error::Singular(sup.clone()));
            }
            let log_det = 2.0 * (0..k).map(|i| r[(i, i)].abs().ln()).sum::<f64>();
            let proj = qr.q().tr_mul(&scores);
            lw += -0.5 * log_det + proj.norm_squared() / (2.0 * v);
        }
        logw.insert(sup.clone(), lw);
    }
    ModelWeightTable::from_log_weights(logw, WeightSource::WhatHat)
}

/// Remainder of the quadratic expansion of `L_n(theta, eta) - L_n(theta0, eta)`
/// around the truth.
pub fn lan_remainder(
    theta: &SparseVector,
    eta: &SymmetricNormalMixture,
    data: &Dataset,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let truth = data.require_truth()?;
    data.check_dim(theta)?;
    check_centering(eta, &truth.eta0, grid)?;
    let v = v_eta(eta, &truth.eta0, grid)?;
    let eps = data.residuals(&truth.theta0)?;
    let mut r = 0.0;
    for (i, e) in eps.iter().enumerate() {
        let delta = data.row_dot(i, theta) - data.row_dot(i, &truth.theta0);
        if delta == 0.0 {
            continue;
        }
        r += eta.log_pdf(e - delta) - eta.log_pdf(*e) - delta * eta.ell_dot(*e)
            + 0.5 * v * delta * delta;
    }
    Ok(r)
}
