//! Oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use semibayes::model::SymmetricNormalMixture;
use semibayes::priors::{log_pi_p, PriorConfig};

/// A symmetric mixture with 1 to 4 random pairs inside the default box.
pub fn random_mixture<R: Rng>(rng: &mut R) -> SymmetricNormalMixture {
    let k = rng.random_range(1..=4);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let pairs: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random_range(0.0..3.0), rng.random_range(0.5..2.0)))
        .collect();
    let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    SymmetricNormalMixture::from_pairs(&w, &pairs).unwrap()
}

/// First and second derivative of `f` at `y` by central differences with
/// three levels of Richardson extrapolation.
pub fn derivatives(f: impl Fn(f64) -> f64, y: f64) -> (f64, f64) {
    let d1 = |h: f64| (f(y + h) - f(y - h)) / (2.0 * h);
    let d2 = |h: f64| (f(y + h) - 2.0 * f(y) + f(y - h)) / (h * h);
    let extrapolate = |d: &dyn Fn(f64) -> f64| {
        let h = 4e-3;
        let mut t: Vec<f64> = (0..4).map(|k| d(h / 2f64.powi(k))).collect();
        for level in 1..4 {
            let c = 4f64.powi(level);
            t = t
                .windows(2)
                .map(|w| (c * w[1] - w[0]) / (c - 1.0))
                .collect();
        }
        t[0]
    };
    (extrapolate(&d1), extrapolate(&d2))
}

/// Gaussian log-likelihood (up to a constant) summed directly.
fn gauss_loglik(x: &DMatrix<f64>, y: &[f64], t: [f64; 2], sigma: f64) -> f64 {
    (0..y.len())
        .map(|i| {
            let r = y[i] - x[(i, 0)] * t[0] - x[(i, 1)] * t[1];
            -0.5 * r * r / (sigma * sigma)
        })
        .sum()
}

/// Composite Simpson weights on `[-r, r]` with `m` (even) intervals.
fn simpson(r: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * r / m as f64;
    let nodes = (0..=m).map(|i| -r + i as f64 * h).collect();
    let w = (0..=m)
        .map(|i| {
            h / 3.0
                * if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                }
        })
        .collect();
    (nodes, w)
}

/// Posterior support probabilities for p = 2 with the error density fixed
/// at `N(0, sigma^2)`, by brute-force quadrature of likelihood x prior over
/// `[-radius, radius]^2`.
pub fn two_dim_oracle(
    x: &DMatrix<f64>,
    y: &[f64],
    sigma: f64,
    prior: &PriorConfig,
    radius: f64,
) -> BTreeMap<Vec<usize>, f64> {
    let lam = prior.lambda;
    let slab = |t: f64| 0.5 * lam * (-lam * t.abs()).exp();
    let (nodes, w) = simpson(radius, 4000);
    let base = gauss_loglik(x, y, [0.0, 0.0], sigma);
    let mut shift = base;
    for &a in nodes.iter().step_by(40) {
        for &b in nodes.iter().step_by(40) {
            shift = shift.max(gauss_loglik(x, y, [a, b], sigma));
        }
    }
    let mut z = BTreeMap::new();
    z.insert(vec![], (base - shift).exp());
    for j in 0..2 {
        let mut acc = 0.0;
        for (t, wt) in nodes.iter().zip(&w) {
            let mut th = [0.0; 2];
            th[j] = *t;
            acc += wt * (gauss_loglik(x, y, th, sigma) - shift).exp() * slab(*t);
        }
        z.insert(vec![j], acc);
    }
    // x^T x and x^T y make the double integral cheap without changing the sum
    let (mut s00, mut s01, mut s11, mut b0, mut b1, mut yy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        s00 += x[(i, 0)] * x[(i, 0)];
        s01 += x[(i, 0)] * x[(i, 1)];
        s11 += x[(i, 1)] * x[(i, 1)];
        b0 += x[(i, 0)] * y[i];
        b1 += x[(i, 1)] * y[i];
        yy += y[i] * y[i];
    }
    let v2 = sigma * sigma;
    let mut acc = 0.0;
    for (a, wa) in nodes.iter().zip(&w) {
        for (b, wb) in nodes.iter().zip(&w) {
            let rss = yy - 2.0 * (a * b0 + b * b1) + a * a * s00 + 2.0 * a * b * s01 + b * b * s11;
            acc += wa * wb * (-0.5 * rss / v2 - shift).exp() * slab(*a) * slab(*b);
        }
    }
    z.insert(vec![0, 1], acc);
    let p = 2;
    let mut post: BTreeMap<Vec<usize>, f64> = z
        .into_iter()
        .map(|(s, v)| {
            let k = s.len();
            let binom = if k == 1 { 2.0 } else { 1.0 };
            let w = log_pi_p(k, p, prior).unwrap().exp() / binom * v;
            (s, w)
        })
        .collect();
    let total: f64 = post.values().sum();
    post.values_mut().for_each(|v| *v /= total);
    post
}
