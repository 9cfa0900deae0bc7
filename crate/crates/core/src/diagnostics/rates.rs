use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SparseVector;

/// Free calibration constants of the rate statements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConstants {
    pub k_dim: f64,
    pub k_hel: f64,
    pub k_theta: f64,
    pub k_eta: f64,
    pub k_sel: f64,
}

impl Default for RateConstants {
    fn default() -> Self {
        Self {
            k_dim: 1.0,
            k_hel: 1.0,
            k_theta: 1.0,
            k_eta: 1.0,
            k_sel: 1.0,
        }
    }
}

impl RateConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [self.k_dim, self.k_hel, self.k_theta, self.k_eta, self.k_sel];
        if all.iter().all(|k| k.is_finite() && *k > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "rate constants must be positive".into(),
            ))
        }
    }

    /// `s_n = 2 K_dim max(s0, (log n)^2)`.
    pub fn s_n(&self, s0: usize, n: usize) -> f64 {
        2.0 * self.k_dim * (s0 as f64).max((n as f64).ln().powi(2))
    }
}

/// `(K_theta / psi) sqrt(s_n log p / n)`.
pub fn beta_min_threshold(psi_s: f64, rc: &RateConstants, n: usize, p: f64, s_n: f64) -> f64 {
    rc.k_theta / psi_s * (s_n * p.ln() / n as f64).sqrt()
}

/// Whether every nonzero `|theta0_i|` exceeds the beta-min threshold; true
/// for the zero vector.
pub fn beta_min_check(
    theta0: &SparseVector,
    psi_s: f64,
    rc: &RateConstants,
    n: usize,
    p: f64,
    s_n: f64,
) -> bool {
    theta0
        .min_abs()
        .is_none_or(|m| m > beta_min_threshold(psi_s, rc, n, p, s_n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_arithmetic() {
        let rc = RateConstants::default();
        let p = 4f64.exp();
        let t = beta_min_threshold(1.0, &rc, 1600, p, 4.0);
        assert!((t - 0.1).abs() < 1e-15);
        let theta = SparseVector::new(60, vec![3], vec![-0.2]).unwrap();
        assert!(beta_min_check(&theta, 1.0, &rc, 1600, p, 4.0));
        assert!(!beta_min_check(
            &SparseVector::new(60, vec![3], vec![0.05]).unwrap(),
            1.0,
            &rc,
            1600,
            p,
            4.0
        ));
        assert!(beta_min_check(
            &SparseVector::zeros(60),
            1.0,
            &rc,
            1600,
            p,
            4.0
        ));
        let t4 = beta_min_threshold(1.0, &rc, 6400, p, 4.0);
        assert!((t4 - t / 2.0).abs() < 1e-15);
    }

    #[test]
    fn s_n_rule() {
        let rc = RateConstants {
            k_dim: 1.5,
            ..Default::default()
        };
        assert!((rc.s_n(3, 400) - 3.0 * 400f64.ln().powi(2)).abs() < 1e-12);
        assert_eq!(rc.s_n(100, 3), 300.0);
        assert!(RateConstants {
            k_sel: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
