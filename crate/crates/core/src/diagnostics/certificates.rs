//! Compatibility number and restricted eigenvalue by exhaustive support
//! enumeration, with randomized upper bounds beyond the exact budget.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GramSummary;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

/// Limits of the exhaustive search and settings of the randomized bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub s_max: usize,
    /// Largest number of supports the exact search may visit.
    pub max_subsets: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            s_max: 12,
            max_subsets: 2e7,
            restarts: 32,
            seed: 0,
        }
    }
}

/// A certificate value; `exact == false` marks a randomized upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub value: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub s: usize,
    pub phi: f64,
    pub psi: f64,
    pub exact: bool,
}

fn binomial_f64(p: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (p - i) as f64 / (i + 1) as f64)
}

fn check_budget(g: &GramSummary, s: usize, all_sizes: bool, cfg: &SearchConfig) -> Result<()> {
    let p = g.p();
    if s == 0 || s > p {
        return Err(Error::SizeOutOfRange { s, p });
    }
    if s > cfg.s_max {
        return Err(Error::BudgetExceeded {
            s,
            s_max: cfg.s_max,
        });
    }
    let count: f64 = if all_sizes {
        (1..=s).map(|k| binomial_f64(p, k)).sum()
    } else {
        binomial_f64(p, s)
    };
    if count > cfg.max_subsets {
        return Err(Error::SubsetBudget {
            count,
            limit: cfg.max_subsets,
        });
    }
    Ok(())
}

/// Minimum of `f` over all `k`-subsets of `0..p`, in parallel over the
/// smallest element. `min` is order independent, so the result does not
/// depend on the thread count.
fn min_over_subsets<F>(p: usize, k: usize, f: F) -> f64
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    (0..=p - k)
        .into_par_iter()
        .map(|first| {
            let mut idx: Vec<usize> = (first..first + k).collect();
            let mut best = f64::INFINITY;
            loop {
                best = best.min(f(&idx));
                // advance positions 1..k lexicographically, keeping idx[0] fixed
                let mut i = k;
                loop {
                    if i <= 1 {
                        return best;
                    }
                    i -= 1;
                    if idx[i] < p - k + i {
                        idx[i] += 1;
                        for j in i + 1..k {
                            idx[j] = idx[j - 1] + 1;
                        }
                        break;
                    }
                }
            }
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// `|S| * min { u^T D Sigma_S D u : u in the open simplex }` minimized over
/// sign patterns `D`; `+inf` when no pattern has an interior minimizer (the
/// support is then dominated by one of its faces).
fn compat_support(sig: &DMatrix<f64>) -> f64 {
    let k = sig.nrows();
    if k == 1 {
        return sig[(0, 0)];
    }
    let kf = k as f64;
    let max_diag = (0..k).map(|i| sig[(i, i)]).fold(0.0, f64::max);
    let chol = sig.clone().cholesky().filter(|c| {
        let l = c.l_dirty();
        (0..k).all(|i| l[(i, i)] > 1e-7 * max_diag.sqrt())
    });
    let mut best = f64::INFINITY;
    let mut d = DVector::from_element(k, 1.0);
    if let Some(ch) = chol {
        for mask in 0..1usize << (k - 1) {
            set_signs(&mut d, mask);
            let w = ch.solve(&d);
            if (0..k).all(|i| d[i] * w[i] > 0.0) {
                best = best.min(kf / d.dot(&w));
            }
        }
        return best;
    }
    let eig = sig.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max().max(1.0);
    let null: Vec<usize> = (0..k)
        .filter(|&j| eig.eigenvalues[j] <= 1e-10 * lmax)
        .collect();
    for mask in 0..1usize << (k - 1) {
        set_signs(&mut d, mask);
        let t: Vec<f64> = (0..k).map(|j| eig.eigenvectors.column(j).dot(&d)).collect();
        let hit: Vec<usize> = null
            .iter()
            .copied()
            .filter(|&j| t[j].abs() > 1e-9)
            .collect();
        if null.len() == 1 && hit.len() == 1 {
            let j = hit[0];
            let v = eig.eigenvectors.column(j);
            if (0..k).all(|i| d[i] * v[i] / t[j] > 0.0) {
                best = best.min(kf * (eig.eigenvalues[j].max(0.0) / (t[j] * t[j])));
            }
        }
        // a multi-dimensional minimizing set reaches the boundary, so the
        // support is dominated by one of its faces
    }
    best
}

fn set_signs(d: &mut DVector<f64>, mask: usize) {
    d[0] = 1.0;
    for i in 1..d.len() {
        d[i] = if mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
    }
}

/// Uniform compatibility number
/// `phi(s) = sqrt(inf { s_theta theta^T Sigma theta / ||theta||_1^2 : 1 <= s_theta <= s })`,
/// exact by enumeration of supports and sign orthants.
pub fn compatibility_number(g: &GramSummary, s: usize, cfg: &SearchConfig) -> Result<f64> {
    check_budget(g, s, true, cfg)?;
    let p = g.p();
    let best = (1..=s)
        .map(|k| min_over_subsets(p, k, |sup| compat_support(&g.sub(sup))))
        .fold(f64::INFINITY, f64::min);
    Ok(best.max(0.0).sqrt())
}

fn smallest_eigenvalue(sig: &DMatrix<f64>) -> f64 {
    if sig.nrows() == 1 {
        return sig[(0, 0)];
    }
    sig.clone().symmetric_eigenvalues().min()
}

/// Restricted eigenvalue `psi(s) = sqrt(min_{|S| = s} lambda_min(Sigma_S))`.
pub fn restricted_eigenvalue(g: &GramSummary, s: usize, cfg: &SearchConfig) -> Result<f64> {
    check_budget(g, s, false, cfg)?;
    let best = min_over_subsets(g.p(), s, |sup| smallest_eigenvalue(&g.sub(sup)));
    Ok(best.max(0.0).sqrt())
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            shift = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - shift).max(0.0);
    }
}

/// Projected gradient for `min u^T Q u` over the simplex; returns the
/// objective times the size of the final support.
fn simplex_descent(q: &DMatrix<f64>, iters: usize) -> f64 {
    let k = q.nrows();
    let lip = (0..k)
        .map(|i| q.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let mut u = vec![1.0 / k as f64; k];
    for _ in 0..iters {
        let uv = DVector::from_column_slice(&u);
        let grad = q * &uv;
        for i in 0..k {
            u[i] -= grad[i] / lip;
        }
        project_simplex(&mut u);
    }
    let uv = DVector::from_column_slice(&u);
    let size = u.iter().filter(|x| **x > 0.0).count();
    size as f64 * uv.dot(&(q * &uv))
}

fn signed(sig: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(sig.nrows(), sig.ncols(), |a, b| d[a] * d[b] * sig[(a, b)])
}

/// Support of size `s` on the largest entries of the bottom eigenvector of
/// the full Gram matrix, with that eigenvector's signs.
fn spectral_start(g: &GramSummary, s: usize) -> (Vec<usize>, Vec<f64>) {
    let eig = g.sigma().clone().symmetric_eigen();
    let j = eig.eigenvalues.imin();
    let v = eig.eigenvectors.column(j);
    let mut order: Vec<usize> = (0..g.p()).collect();
    order.sort_by(|a, b| v[*b].abs().total_cmp(&v[*a].abs()).then(a.cmp(b)));
    let mut sup: Vec<usize> = order[..s].to_vec();
    sup.sort_unstable();
    let signs = sup
        .iter()
        .map(|&i| if v[i] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    (sup, signs)
}

/// Randomized upper bound on `phi(s)`: projected-gradient descent from
/// random and spectral starts.
pub fn compatibility_upper_bound(
    g: &GramSummary,
    s: usize,
    cfg: &SearchConfig,
) -> Result<Certificate> {
    let p = g.p();
    if s == 0 || s > p {
        return Err(Error::SizeOutOfRange { s, p });
    }
    let singles = (0..p)
        .map(|j| g.sigma()[(j, j)])
        .fold(f64::INFINITY, f64::min);
    let (sup, signs) = spectral_start(g, s);
    let spectral = simplex_descent(&signed(&g.sub(&sup), &signs), 500);
    let random = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded(derive_seed(cfg.seed, &[1, r as u64]));
            let k = rng.random_range(1..=s);
            let mut sup = sample(&mut rng, p, k).into_vec();
            sup.sort_unstable();
            let signs: Vec<f64> = (0..k)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            simplex_descent(&signed(&g.sub(&sup), &signs), 500)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let best = singles.min(spectral).min(random);
    Ok(Certificate {
        value: best.max(0.0).sqrt(),
        exact: false,
    })
}

/// Randomized upper bound on `psi(s)`: local swap search from random and
/// spectral starts.
pub fn restricted_eigenvalue_upper_bound(
    g: &GramSummary,
    s: usize,
    cfg: &SearchConfig,
) -> Result<Certificate> {
    let p = g.p();
    if s == 0 || s > p {
        return Err(Error::SizeOutOfRange { s, p });
    }
    let swaps = 4 * s.min(p - s).max(1);
    let search = |mut sup: Vec<usize>, seed: u64| {
        let mut rng = seeded(seed);
        let mut val = smallest_eigenvalue(&g.sub(&sup));
        if s == p {
            return val;
        }
        for _ in 0..swaps {
            let out = rng.random_range(0..s);
            let mut cand = rng.random_range(0..p);
            while sup.contains(&cand) {
                cand = rng.random_range(0..p);
            }
            let old = sup[out];
            sup[out] = cand;
            let v = smallest_eigenvalue(&g.sub(&sup));
            if v < val {
                val = v;
            } else {
                sup[out] = old;
            }
        }
        val
    };
    let (start, _) = spectral_start(g, s);
    let spectral = search(start, derive_seed(cfg.seed, &[2, u64::MAX]));
    let random = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, &[2, r as u64]);
            let sup = sample(&mut seeded(seed ^ 1), p, s).into_vec();
            search(sup, seed)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(Certificate {
        value: spectral.min(random).max(0.0).sqrt(),
        exact: false,
    })
}

fn within_budget(g: &GramSummary, s: usize, cfg: &SearchConfig) -> bool {
    check_budget(g, s, true, cfg).is_ok()
}

/// `phi` and `psi` for `s = 1..=s_hi`: exact within budget, randomized upper
/// bounds beyond it.
pub fn design_table(g: &GramSummary, s_hi: usize, cfg: &SearchConfig) -> Result<Vec<DesignRow>> {
    (1..=s_hi.min(g.p()))
        .map(|s| {
            if within_budget(g, s, cfg) {
                Ok(DesignRow {
                    s,
                    phi: compatibility_number(g, s, cfg)?,
                    psi: restricted_eigenvalue(g, s, cfg)?,
                    exact: true,
                })
            } else {
                Ok(DesignRow {
                    s,
                    phi: compatibility_upper_bound(g, s, cfg)?.value,
                    psi: restricted_eigenvalue_upper_bound(g, s, cfg)?.value,
                    exact: false,
                })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equi(p: usize, rho: f64) -> GramSummary {
        GramSummary::new(
            DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho }),
            1,
        )
        .unwrap()
    }

    #[test]
    fn identity_gives_exact_ones() {
        let g = GramSummary::new(DMatrix::identity(6, 6), 1).unwrap();
        let cfg = SearchConfig::default();
        for s in 1..=6 {
            assert_eq!(compatibility_number(&g, s, &cfg).unwrap(), 1.0);
            assert_eq!(restricted_eigenvalue(&g, s, &cfg).unwrap(), 1.0);
        }
    }

    #[test]
    fn subset_enumeration_visits_every_subset_once() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let count = AtomicUsize::new(0);
        min_over_subsets(7, 3, |s| {
            assert!(s.windows(2).all(|w| w[0] < w[1]) && s[2] < 7);
            count.fetch_add(1, Ordering::Relaxed);
            0.0
        });
        assert_eq!(count.load(Ordering::Relaxed), 35);
    }

    #[test]
    fn two_by_two_equicorrelation() {
        let g = equi(2, 0.5);
        let cfg = SearchConfig::default();
        assert!((compatibility_number(&g, 2, &cfg).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((restricted_eigenvalue(&g, 2, &cfg).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_has_zero_compatibility() {
        let g = equi(3, 1.0);
        let cfg = SearchConfig::default();
        assert!(compatibility_number(&g, 2, &cfg).unwrap() < 1e-6);
        assert_eq!(compatibility_number(&g, 1, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn budget_errors() {
        let g = equi(4, 0.1);
        let cfg = SearchConfig {
            s_max: 2,
            ..Default::default()
        };
        assert!(matches!(
            compatibility_number(&g, 3, &cfg),
            Err(Error::BudgetExceeded { s: 3, s_max: 2 })
        ));
        assert!(matches!(
            restricted_eigenvalue(&g, 0, &cfg),
            Err(Error::SizeOutOfRange { .. })
        ));
        let tiny = SearchConfig {
            max_subsets: 3.0,
            ..Default::default()
        };
        assert!(matches!(
            restricted_eigenvalue(&g, 2, &tiny),
            Err(Error::SubsetBudget { .. })
        ));
    }

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 2.0, -1.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![0.0, 1.0, 0.0]);
        let mut v = vec![0.2, 0.2, 0.2];
        project_simplex(&mut v);
        for x in v {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn upper_bounds_dominate_exact_values() {
        let g = equi(6, 0.4);
        let cfg = SearchConfig::default();
        for s in 1..=4 {
            let phi = compatibility_number(&g, s, &cfg).unwrap();
            let psi = restricted_eigenvalue(&g, s, &cfg).unwrap();
            let phi_ub = compatibility_upper_bound(&g, s, &cfg).unwrap();
            let psi_ub = restricted_eigenvalue_upper_bound(&g, s, &cfg).unwrap();
            assert!(!phi_ub.exact);
            assert!(
                phi_ub.value >= phi - 1e-9 && phi_ub.value <= phi + 1e-3,
                "{s}: {phi} vs {phi_ub:?}"
            );
            assert!(psi_ub.value >= psi - 1e-9 && psi_ub.value <= psi + 1e-9);
        }
    }
}
