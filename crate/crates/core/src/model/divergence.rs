//! Quadrature-based information quantities and divergences between mixtures.

use super::dataset::Dataset;
use super::mixture::SymmetricNormalMixture;
use super::quadrature::QuadratureGrid;
use super::sparse::SparseVector;
use crate::error::{Error, Result};

const DENSITY_FLOOR: f64 = 1e-300;

/// `v_eta = P_eta0(ell_dot_eta * ell_dot_eta0)`. Positive for `eta` near
/// `eta0`; it can be zero or negative for distant pairs.
pub fn v_eta(
    eta: &SymmetricNormalMixture,
    eta0: &SymmetricNormalMixture,
    grid: &QuadratureGrid,
) -> Result<f64> {
    grid.check_covers(eta0, 0.0)?;
    Ok(grid.integrate(|y| eta.ell_dot(y) * eta0.ell_dot(y) * eta0.pdf(y)))
}

/// `-P_eta0(ell_ddot_eta)`, the curvature form of [`v_eta`].
pub fn v_eta_curvature(
    eta: &SymmetricNormalMixture,
    eta0: &SymmetricNormalMixture,
    grid: &QuadratureGrid,
) -> Result<f64> {
    grid.check_covers(eta0, 0.0)?;
    Ok(-grid.integrate(|y| eta.ell_ddot(y) * eta0.pdf(y)))
}

/// `P_eta0(ell_dot_eta)`; zero whenever both densities are even.
pub fn score_centering(
    eta: &SymmetricNormalMixture,
    eta0: &SymmetricNormalMixture,
    grid: &QuadratureGrid,
) -> Result<f64> {
    grid.check_covers(eta0, 0.0)?;
    Ok(grid.integrate(|y| eta.ell_dot(y) * eta0.pdf(y)))
}

fn hellinger_sq_shifted(
    eta1: &SymmetricNormalMixture,
    eta2: &SymmetricNormalMixture,
    shift: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    grid.check_covers(eta1, 0.0)?;
    grid.check_covers(eta2, shift)?;
    let h2 = grid.integrate(|y| {
        let a = eta1.pdf(y).max(DENSITY_FLOOR).sqrt();
        let b = eta2.pdf(y - shift).max(DENSITY_FLOOR).sqrt();
        (a - b) * (a - b)
    });
    Ok(h2.clamp(0.0, 2.0))
}

/// Squared Hellinger distance `int (sqrt(eta1) - sqrt(eta2))^2`, in `[0, 2]`.
pub fn hellinger_sq(
    eta1: &SymmetricNormalMixture,
    eta2: &SymmetricNormalMixture,
    grid: &QuadratureGrid,
) -> Result<f64> {
    hellinger_sq_shifted(eta1, eta2, 0.0, grid)
}

pub fn hellinger(
    eta1: &SymmetricNormalMixture,
    eta2: &SymmetricNormalMixture,
    grid: &QuadratureGrid,
) -> Result<f64> {
    Ok(hellinger_sq(eta1, eta2, grid)?.sqrt())
}

/// `KL(eta1 || eta2) = int eta1 log(eta1 / eta2)`, clamped at zero.
pub fn kl(
    eta1: &SymmetricNormalMixture,
    eta2: &SymmetricNormalMixture,
    grid: &QuadratureGrid,
) -> Result<f64> {
    grid.check_covers(eta1, 0.0)?;
    let v = grid.integrate(|y| {
        let l1 = eta1.log_pdf(y);
        l1.exp() * (l1 - eta2.log_pdf(y))
    });
    Ok(v.max(0.0))
}

/// Mean Hellinger distance `d_n` between `(theta1, eta1)` and `(theta2, eta2)`.
///
/// Each observation compares `eta1(. - x_i theta1)` with `eta2(. - x_i theta2)`;
/// translating by `x_i theta1` leaves a relative shift, and `grid` is widened
/// on the side of that shift.
pub fn mean_hellinger(
    theta1: &SparseVector,
    eta1: &SymmetricNormalMixture,
    theta2: &SparseVector,
    eta2: &SymmetricNormalMixture,
    data: &Dataset,
    grid: &QuadratureGrid,
) -> Result<f64> {
    data.check_dim(theta1)?;
    data.check_dim(theta2)?;
    let mut total = 0.0;
    for i in 0..data.n() {
        let shift = data.row_dot(i, theta2) - data.row_dot(i, theta1);
        let h2 = if shift == 0.0 {
            hellinger_sq_shifted(eta1, eta2, 0.0, grid)?
        } else {
            let wide = grid.widened(shift.min(0.0), shift.max(0.0));
            hellinger_sq_shifted(eta1, eta2, shift, &wide)?
        };
        total += h2;
    }
    let mean = total / data.n() as f64;
    if !mean.is_finite() {
        return Err(Error::InvalidConfig(
            "non-finite mean Hellinger distance".into(),
        ));
    }
    Ok(mean.sqrt())
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;

    fn normal(sigma: f64) -> SymmetricNormalMixture {
        SymmetricNormalMixture::gaussian(sigma).unwrap()
    }

    #[test]
    fn unit_normal_information() {
        let g = normal(1.0);
        let grid = QuadratureGrid::covering(&[&g], 0.0);
        assert!((v_eta(&g, &g, &grid).unwrap() - 1.0).abs() < 1e-6);
        assert!((v_eta_curvature(&g, &g, &grid).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wider_working_density() {
        // ell_dot = y / 4 so v = E[y^2] / 4
        let eta = normal(2.0);
        let eta0 = normal(1.0);
        let grid = QuadratureGrid::covering(&[&eta, &eta0], 0.0);
        assert!((v_eta(&eta, &eta0, &grid).unwrap() - 0.25).abs() < 1e-6);
        assert!((v_eta_curvature(&eta, &eta0, &grid).unwrap() - 0.25).abs() < 1e-6);
    }

    #[test]
    fn gaussian_hellinger_closed_form() {
        let a = normal(1.0);
        let b = SymmetricNormalMixture::bimodal(0.0, 1.0).unwrap();
        let grid = QuadratureGrid::covering(&[&a], 1.0);
        // shift a unit normal by one via the mean-Hellinger route
        let d = Dataset::new(DMatrix::from_element(1, 1, 1.0), vec![0.0]).unwrap();
        let t0 = SparseVector::zeros(1);
        let t1 = SparseVector::new(1, vec![0], vec![1.0]).unwrap();
        let dn = mean_hellinger(&t0, &a, &t1, &a, &d, &grid).unwrap();
        let closed = (2.0 * (1.0 - (-0.125f64).exp())).sqrt();
        assert!((dn - 0.484_774_3).abs() < 1e-5);
        assert!((dn - closed).abs() < 1e-7);
        // identical densities written with different atom lists
        assert!(hellinger(&a, &b, &grid).unwrap() < 1e-12);
    }

    #[test]
    fn kl_dominates_squared_hellinger() {
        let a = normal(1.0);
        let b = SymmetricNormalMixture::bimodal(1.5, 0.8).unwrap();
        let grid = QuadratureGrid::covering(&[&a, &b], 0.0);
        let h2 = hellinger_sq(&a, &b, &grid).unwrap();
        let k = kl(&a, &b, &grid).unwrap();
        assert!(h2 > 0.0 && h2 <= k);
        assert_eq!(kl(&a, &a, &grid).unwrap(), 0.0);
        assert_eq!(
            hellinger(&a, &b, &grid).unwrap(),
            hellinger(&b, &a, &grid).unwrap()
        );
    }

    #[test]
    fn zero_design_reduces_to_plain_hellinger() {
        let a = normal(1.0);
        let b = SymmetricNormalMixture::bimodal(1.0, 0.7).unwrap();
        let d = Dataset::new(DMatrix::zeros(4, 2), vec![0.1, -0.3, 2.0, 0.0]).unwrap();
        let t1 = SparseVector::new(2, vec![0], vec![1.0]).unwrap();
        let t2 = SparseVector::new(2, vec![1], vec![-3.0]).unwrap();
        let grid = QuadratureGrid::covering(&[&a, &b], 0.0);
        let dn = mean_hellinger(&t1, &a, &t2, &b, &d, &grid).unwrap();
        assert!((dn - hellinger(&a, &b, &grid).unwrap()).abs() < 1e-12);
        assert_eq!(mean_hellinger(&t1, &a, &t1, &a, &d, &grid).unwrap(), 0.0);
    }

    #[test]
    fn narrow_grid_errors() {
        let a = normal(1.0);
        let grid = QuadratureGrid::composite(-2.0, 2.0, 64).unwrap();
        assert!(matches!(
            v_eta(&a, &a, &grid),
            Err(Error::GridTooNarrow { .. })
        ));
        assert!(matches!(
            hellinger(&a, &a, &grid),
            Err(Error::GridTooNarrow { .. })
        ));
    }
}
