//! Synthetic regression problems with known truth.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    beta_min_threshold, restricted_eigenvalue, restricted_eigenvalue_upper_bound, Certificate,
    GramSummary, RateConstants, SearchConfig,
};
use crate::error::{Error, Result};
use crate::model::{Atom, Dataset, SparseVector, SymmetricNormalMixture, Truth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignFamily {
    /// iid +-1 entries.
    Rademacher,
    /// iid uniform on `[-L, L]`.
    Uniform,
    /// Standard normal rows with pairwise correlation `rho`, clipped to `[-L, L]`.
    Equicorrelated { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eta0Spec {
    /// `N(0, 1)`.
    Gaussian,
    /// `0.5 N(-2, 0.8^2) + 0.5 N(2, 0.8^2)`.
    Bimodal,
    Mixture {
        atoms: Vec<Atom>,
    },
}

impl Eta0Spec {
    pub fn build(&self) -> Result<SymmetricNormalMixture> {
        match self {
            Eta0Spec::Gaussian => SymmetricNormalMixture::gaussian(1.0),
            Eta0Spec::Bimodal => SymmetricNormalMixture::bimodal(2.0, 0.8),
            Eta0Spec::Mixture { atoms } => SymmetricNormalMixture::new(atoms.clone()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Eta0Spec::Gaussian => "gaussian",
            Eta0Spec::Bimodal => "bimodal",
            Eta0Spec::Mixture { .. } => "mixture",
        }
    }
}

/// Magnitude of the nonzero coefficients; signs are random.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeRule {
    /// All nonzeros equal `c` in absolute value; `c = 0` gives the zero vector.
    Constant(f64),
    /// A multiple of the beta-min threshold of the generated design.
    BetaMinMultiple(f64),
}

/// One simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub p: usize,
    pub s0: usize,
    #[serde(default = "default_design")]
    pub design: DesignFamily,
    #[serde(default = "default_eta0")]
    pub eta0: Eta0Spec,
    #[serde(default = "default_magnitude")]
    pub magnitude: MagnitudeRule,
    /// Bound on `|x_ij|`.
    #[serde(default = "default_l")]
    pub l: f64,
}

fn default_design() -> DesignFamily {
    DesignFamily::Rademacher
}

fn default_eta0() -> Eta0Spec {
    Eta0Spec::Bimodal
}

fn default_magnitude() -> MagnitudeRule {
    MagnitudeRule::Constant(2.0)
}

fn default_l() -> f64 {
    1.0
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be positive".into());
        }
        if self.s0 > self.p {
            return bad(format!("s0 = {} exceeds p = {}", self.s0, self.p));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return bad("L must be positive".into());
        }
        if self.design == DesignFamily::Rademacher && self.l < 1.0 {
            return bad("Rademacher design needs L >= 1".into());
        }
        if let DesignFamily::Equicorrelated { rho } = self.design {
            if !(0.0..1.0).contains(&rho) {
                return bad("rho must lie in [0, 1)".into());
            }
        }
        match self.magnitude {
            MagnitudeRule::Constant(c) | MagnitudeRule::BetaMinMultiple(c)
                if !(c >= 0.0 && c.is_finite()) =>
            {
                bad("magnitude must be finite and non-negative".into())
            }
            _ => Ok(()),
        }
    }
}

/// A generated problem and its side information.
#[derive(Debug, Clone)]
pub struct Generated {
    pub data: Dataset,
    /// Fraction of design entries changed by clipping.
    pub clip_rate: f64,
    /// Beta-min threshold and the `psi(s_n)` certificate behind it, when the
    /// magnitude rule needed them.
    pub threshold: Option<(f64, Certificate)>,
}

fn design<R: Rng + ?Sized>(sc: &Scenario, rng: &mut R) -> (DMatrix<f64>, f64) {
    let (n, p, l) = (sc.n, sc.p, sc.l);
    match sc.design {
        DesignFamily::Rademacher => (
            DMatrix::from_fn(n, p, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 }),
            0.0,
        ),
        DesignFamily::Uniform => (DMatrix::from_fn(n, p, |_, _| rng.random_range(-l..=l)), 0.0),
        DesignFamily::Equicorrelated { rho } => {
            let mut clipped = 0usize;
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                let common: f64 = rng.sample(StandardNormal);
                for j in 0..p {
                    let own: f64 = rng.sample(StandardNormal);
                    let v = rho.sqrt() * common + (1.0 - rho).sqrt() * own;
                    if v.abs() > l {
                        clipped += 1;
                    }
                    x[(i, j)] = v.clamp(-l, l);
                }
            }
            (x, clipped as f64 / (n * p) as f64)
        }
    }
}

/// `psi(s)` of `x`, exact within the search budget, otherwise an upper bound.
pub fn psi_certificate(x: &DMatrix<f64>, s: usize, search: &SearchConfig) -> Result<Certificate> {
    let g = GramSummary::from_design(x);
    match restricted_eigenvalue(&g, s, search) {
        Ok(value) => Ok(Certificate { value, exact: true }),
        Err(Error::BudgetExceeded { .. } | Error::SubsetBudget { .. }) => {
            restricted_eigenvalue_upper_bound(&g, s, search)
        }
        Err(e) => Err(e),
    }
}

/// Draws design, truth and responses. Deterministic given the rng state.
pub fn generate_scenario<R: Rng + ?Sized>(
    sc: &Scenario,
    rates: &RateConstants,
    search: &SearchConfig,
    rng: &mut R,
) -> Result<Generated> {
    sc.validate()?;
    let eta0 = sc.eta0.build()?;
    let (x, clip_rate) = design(sc, rng);
    let (magnitude, threshold) = match sc.magnitude {
        MagnitudeRule::Constant(c) => (c, None),
        MagnitudeRule::BetaMinMultiple(f) => {
            let s_n = rates.s_n(sc.s0, sc.n);
            let s_int = (s_n.ceil() as usize).clamp(1, sc.p);
            let psi = psi_certificate(&x, s_int, search)?;
            if !(psi.value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "psi({s_int}) is zero; beta-min threshold undefined"
                )));
            }
            let t = beta_min_threshold(psi.value, rates, sc.n, sc.p as f64, s_n);
            (f * t, Some((t, psi)))
        }
    };
    let mut support = sample(rng, sc.p, sc.s0).into_vec();
    support.sort_unstable();
    let values: Vec<f64> = support
        .iter()
        .map(|_| {
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    let theta0 = if magnitude == 0.0 {
        SparseVector::zeros(sc.p)
    } else {
        SparseVector::new(sc.p, support, values)?
    };
    let y = (0..sc.n)
        .map(|i| theta0.iter().map(|(j, t)| x[(i, j)] * t).sum::<f64>() + eta0.sample(rng))
        .collect();
    let data = Dataset::new(x, y)?.with_truth(Truth { theta0, eta0 })?;
    data.check_bound(sc.l)?;
    Ok(Generated {
        data,
        clip_rate,
        threshold,
    })
}
