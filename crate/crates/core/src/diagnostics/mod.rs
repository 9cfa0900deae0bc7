//! Design certificates and asymptotic-theory quantities evaluated at a
//! known truth.

mod bvm;
mod certificates;
mod evidence;
mod rates;

pub use bvm::{
    bvm_approximant, empirical_component, tv_surrogate, BvmComponent, ModelTv, TvReport,
    MIN_MODEL_DRAWS,
};
pub use certificates::{
    compatibility_number, compatibility_upper_bound, design_table, restricted_eigenvalue,
    restricted_eigenvalue_upper_bound, Certificate, DesignRow, SearchConfig,
};
pub use evidence::{efficient_score, hat_w, info_matrix, lan_remainder, CENTERING_TOL};
pub use rates::{beta_min_check, beta_min_threshold, RateConstants};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `Sigma = X^T X / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSummary {
    sigma: DMatrix<f64>,
    n: usize,
}

impl GramSummary {
    pub fn from_design(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        let mut sigma = x.tr_mul(x) / n as f64;
        // exact symmetry regardless of summation order
        for i in 0..sigma.nrows() {
            for j in 0..i {
                sigma[(i, j)] = sigma[(j, i)];
            }
        }
        Self { sigma, n }
    }

    /// Wraps a given matrix, checking symmetry and positive semidefiniteness.
    pub fn new(sigma: DMatrix<f64>, n: usize) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() == 0 {
            return Err(Error::InvalidConfig(
                "Gram matrix must be square and non-empty".into(),
            ));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "Gram matrix has non-finite entries".into(),
            ));
        }
        let p = sigma.nrows();
        for i in 0..p {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "Gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = sigma.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 {
            return Err(Error::InvalidConfig(format!(
                "Gram matrix not PSD: eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { sigma, n })
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.sigma.nrows()
    }

    /// Principal submatrix `Sigma_S`.
    pub fn sub(&self, support: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(support.len(), support.len(), |a, b| {
            self.sigma[(support[a], support[b])]
        })
    }
}
