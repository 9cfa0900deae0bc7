use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln(sqrt(2 pi))`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const WEIGHT_TOL: f64 = 1e-12;

/// One normal component `w * N(z, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub z: f64,
    pub sigma: f64,
    pub w: f64,
}

/// A finite location-scale mixture of normals closed under `z -> -z`.
///
/// Every atom with `z != 0` has a mirror atom `(-z, sigma, w)`, so the density
/// is even and strictly positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct SymmetricNormalMixture {
    atoms: Vec<Atom>,
    // ln w - ln sigma - ln sqrt(2 pi)
    log_norm: Vec<f64>,
    inv_var: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MixtureRepr {
    atoms: Vec<Atom>,
}

impl TryFrom<MixtureRepr> for SymmetricNormalMixture {
    type Error = Error;

    fn try_from(r: MixtureRepr) -> Result<Self> {
        SymmetricNormalMixture::new(r.atoms)
    }
}

impl From<SymmetricNormalMixture> for MixtureRepr {
    fn from(m: SymmetricNormalMixture) -> Self {
        MixtureRepr { atoms: m.atoms }
    }
}

impl PartialEq for SymmetricNormalMixture {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
    }
}

impl SymmetricNormalMixture {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMixture("no atoms".into()));
        }
        for a in &atoms {
            if !(a.z.is_finite() && a.sigma.is_finite() && a.sigma > 0.0) {
                return Err(Error::InvalidMixture(format!(
                    "bad atom location/scale {a:?}"
                )));
            }
            if !(a.w.is_finite() && a.w > 0.0) {
                return Err(Error::InvalidMixture(format!("non-positive weight {a:?}")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.w).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMixture(format!("weights sum to {total}")));
        }
        check_mirror_closure(&atoms)?;
        let log_norm = atoms
            .iter()
            .map(|a| a.w.ln() - a.sigma.ln() - LN_SQRT_2PI)
            .collect();
        let inv_var = atoms.iter().map(|a| 1.0 / (a.sigma * a.sigma)).collect();
        Ok(Self {
            atoms,
            log_norm,
            inv_var,
        })
    }

    /// The centered normal `N(0, sigma^2)` as a single-atom mixture.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(vec![Atom {
            z: 0.0,
            sigma,
            w: 1.0,
        }])
    }

    /// `0.5 N(-z, sigma^2) + 0.5 N(z, sigma^2)`.
    pub fn bimodal(z: f64, sigma: f64) -> Result<Self> {
        Self::from_pairs(&[1.0], &[(z, sigma)])
    }

    /// Builds the symmetrized mixture `sum_k w_k/2 [N(z_k, s_k^2) + N(-z_k, s_k^2)]`
    /// from pair weights. Pairs with zero weight are dropped and the rest
    /// renormalized.
    pub fn from_pairs(weights: &[f64], pairs: &[(f64, f64)]) -> Result<Self> {
        if weights.len() != pairs.len() {
            return Err(Error::InvalidMixture(
                "weights and pairs differ in length".into(),
            ));
        }
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMixture(
                "pair weights have no positive mass".into(),
            ));
        }
        let mut atoms = Vec::with_capacity(2 * pairs.len());
        for (&w, &(z, sigma)) in weights.iter().zip(pairs) {
            let half = 0.5 * (w / total);
            if half > 0.0 {
                atoms.push(Atom { z, sigma, w: half });
                atoms.push(Atom {
                    z: -z,
                    sigma,
                    w: half,
                });
            }
        }
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Rejects atoms outside the box `[-m, m] x [sigma1, sigma2]`.
    pub fn check_box(&self, m: f64, sigma1: f64, sigma2: f64) -> Result<()> {
        match self
            .atoms
            .iter()
            .find(|a| a.z.abs() > m || a.sigma < sigma1 || a.sigma > sigma2)
        {
            Some(a) => Err(Error::InvalidMixture(format!(
                "atom {a:?} outside box [-{m}, {m}] x [{sigma1}, {sigma2}]"
            ))),
            None => Ok(()),
        }
    }

    #[inline]
    fn log_terms(&self, x: f64, buf: &mut [f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (k, a) in self.atoms.iter().enumerate() {
            let d = x - a.z;
            let t = self.log_norm[k] - 0.5 * d * d * self.inv_var[k];
            buf[k] = t;
            if t > max {
                max = t;
            }
        }
        max
    }

    /// Evaluated at `|x|`, so evenness holds exactly in floating point.
    pub fn pdf(&self, x: f64) -> f64 {
        let x = x.abs();
        self.atoms
            .iter()
            .zip(&self.log_norm)
            .zip(&self.inv_var)
            .map(|((a, ln), iv)| {
                let d = x - a.z;
                (ln - 0.5 * d * d * iv).exp()
            })
            .sum()
    }

    /// `ell(y) = log eta(y)`, evaluated with log-sum-exp.
    pub fn log_pdf(&self, y: f64) -> f64 {
        let y = y.abs();
        let mut buf = vec![0.0; self.atoms.len()];
        let max = self.log_terms(y, &mut buf);
        max + buf.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    /// `ell_dot(y) = -(d/dy) log eta(y)`.
    pub fn ell_dot(&self, y: f64) -> f64 {
        self.derivatives(y).1
    }

    /// `ell_ddot(y) = (d^2/dy^2) log eta(y)`.
    pub fn ell_ddot(&self, y: f64) -> f64 {
        self.derivatives(y).2
    }

    /// `(log eta(y), ell_dot(y), ell_ddot(y))` from one pass over the atoms.
    ///
    /// With softmax responsibilities `r_k` and `u_k = (y - z_k) / sigma_k^2`,
    /// `ell_dot = E[u]` and `ell_ddot = E[u^2 - 1/sigma^2] - E[u]^2`.
    /// Evaluated at `|y|` so the score is exactly odd.
    pub fn derivatives(&self, y: f64) -> (f64, f64, f64) {
        let sign = if y < 0.0 { -1.0 } else { 1.0 };
        let y = y.abs();
        let mut buf = vec![0.0; self.atoms.len()];
        let max = self.log_terms(y, &mut buf);
        let mut total = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (k, a) in self.atoms.iter().enumerate() {
            let r = (buf[k] - max).exp();
            let u = (y - a.z) * self.inv_var[k];
            total += r;
            m1 += r * u;
            m2 += r * (u * u - self.inv_var[k]);
        }
        let m1 = m1 / total;
        let m2 = m2 / total;
        (max + total.ln(), sign * m1, m2 - m1 * m1)
    }

    /// `sum_k w_k (z_k^2 + sigma_k^2)`.
    pub fn variance(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.w * (a.z * a.z + a.sigma * a.sigma))
            .sum()
    }

    /// Largest `|z_k| + width * sigma_k`.
    pub fn extent(&self, width: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.z.abs() + width * a.sigma)
            .fold(0.0, f64::max)
    }

    /// Probability mass outside `[lo, hi]`.
    pub fn tail_mass_outside(&self, lo: f64, hi: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let left = 0.5
                    * statrs::function::erf::erfc(
                        -(lo - a.z) / (a.sigma * std::f64::consts::SQRT_2),
                    );
                let right = 0.5
                    * statrs::function::erf::erfc(
                        (hi - a.z) / (a.sigma * std::f64::consts::SQRT_2),
                    );
                a.w * (left + right)
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.atoms.len() - 1;
        for (k, a) in self.atoms.iter().enumerate() {
            acc += a.w;
            if u < acc {
                chosen = k;
                break;
            }
        }
        let a = self.atoms[chosen];
        let e: f64 = StandardNormal.sample(rng);
        a.z + a.sigma * e
    }
}

fn check_mirror_closure(atoms: &[Atom]) -> Result<()> {
    let key = |a: &Atom| (a.z.abs(), a.sigma, a.w);
    let cmp = |x: &(f64, f64, f64), y: &(f64, f64, f64)| {
        x.0.total_cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.total_cmp(&y.2))
    };
    let mut pos: Vec<_> = atoms.iter().filter(|a| a.z > 0.0).map(key).collect();
    let mut neg: Vec<_> = atoms.iter().filter(|a| a.z < 0.0).map(key).collect();
    pos.sort_by(cmp);
    neg.sort_by(cmp);
    if pos != neg {
        return Err(Error::InvalidMixture(
            "atoms are not closed under location negation".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bimodal() -> SymmetricNormalMixture {
        SymmetricNormalMixture::from_pairs(&[1.0], &[(1.0, 1.0)]).unwrap()
    }

    #[test]
    fn standard_normal_values() {
        let g = SymmetricNormalMixture::gaussian(1.0).unwrap();
        assert!((g.pdf(0.0) - 0.398_942_280_4).abs() < 1e-10);
        assert!((g.log_pdf(0.0) + 0.918_938_533_2).abs() < 1e-10);
        assert!((g.ell_dot(2.0) - 2.0).abs() < 1e-14);
        for y in [-7.0, -1.0, 0.0, 0.3, 4.0, 30.0] {
            assert!((g.ell_ddot(y) + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_atom_pdf_at_zero() {
        // equals the standard normal density at 1
        assert!((bimodal().pdf(0.0) - 0.241_970_724_5).abs() < 1e-10);
    }

    #[test]
    fn rejects_asymmetric_and_unnormalized() {
        let a = |z, sigma, w| Atom { z, sigma, w };
        assert!(SymmetricNormalMixture::new(vec![a(1.0, 1.0, 1.0)]).is_err());
        assert!(SymmetricNormalMixture::new(vec![a(1.0, 1.0, 0.5), a(-1.0, 2.0, 0.5)]).is_err());
        assert!(SymmetricNormalMixture::new(vec![a(0.0, 1.0, 0.9)]).is_err());
        assert!(SymmetricNormalMixture::new(vec![a(0.0, 0.0, 1.0)]).is_err());
        assert!(SymmetricNormalMixture::new(vec![]).is_err());
        assert!(SymmetricNormalMixture::new(vec![a(1.0, 1.0, 0.5), a(-1.0, 1.0, 0.5)]).is_ok());
    }

    #[test]
    fn far_tail_is_stable() {
        let m = SymmetricNormalMixture::from_pairs(&[0.3, 0.7], &[(2.0, 0.5), (0.5, 1.5)]).unwrap();
        let (l, d, dd) = m.derivatives(200.0);
        assert!(l.is_finite() && d.is_finite() && dd.is_finite());
        // dominated by the widest atom far out
        assert!((dd + 1.0 / 2.25).abs() < 1e-6);
    }

    #[test]
    fn box_check() {
        let m = bimodal();
        assert!(m.check_box(1.0, 0.5, 2.0).is_ok());
        assert!(m.check_box(0.9, 0.5, 2.0).is_err());
    }

    #[test]
    fn json_shape() {
        let m = SymmetricNormalMixture::gaussian(1.0).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"atoms":[{"z":0.0,"sigma":1.0,"w":1.0}]}"#);
        let back: SymmetricNormalMixture = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
