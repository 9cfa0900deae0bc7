use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mixture::SymmetricNormalMixture;
use super::sparse::SparseVector;
use crate::error::{Error, Result};

/// Known truth `(theta0, eta0)` attached to simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub theta0: SparseVector,
    pub eta0: SymmetricNormalMixture,
}

/// Fixed design `X` (n x p) and responses `y`.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    truth: Option<Truth>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidDataset(format!(
                "need n >= 1 and p >= 1, got {n} x {p}"
            )));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite entry".into()));
        }
        Ok(Self { x, y, truth: None })
    }

    pub fn with_truth(mut self, truth: Truth) -> Result<Self> {
        if truth.theta0.dim() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: truth.theta0.dim(),
            });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    /// Checks `max |x_ij| <= bound`.
    pub fn check_bound(&self, bound: f64) -> Result<()> {
        let m = self.max_abs_x();
        if m > bound {
            return Err(Error::InvalidDataset(format!(
                "max |x_ij| = {m} exceeds bound {bound}"
            )));
        }
        Ok(())
    }

    pub fn max_abs_x(&self) -> f64 {
        self.x.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn truth(&self) -> Option<&Truth> {
        self.truth.as_ref()
    }

    pub fn require_truth(&self) -> Result<&Truth> {
        self.truth.as_ref().ok_or(Error::MissingTruth)
    }

    /// `x_i^T theta` summed over the support in increasing index order.
    pub fn row_dot(&self, i: usize, theta: &SparseVector) -> f64 {
        theta.iter().map(|(j, v)| self.x[(i, j)] * v).sum()
    }

    /// `y - X theta`.
    pub fn residuals(&self, theta: &SparseVector) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        Ok((0..self.n())
            .map(|i| self.y[i] - self.row_dot(i, theta))
            .collect())
    }

    pub fn check_dim(&self, theta: &SparseVector) -> Result<()> {
        if theta.dim() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: theta.dim(),
            });
        }
        Ok(())
    }

    /// Reads a CSV with header `y,x1,...,xp`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("y") {
            return Err(Error::InvalidDataset(format!(
                "missing column `y` (first header is {:?})",
                headers.get(0).unwrap_or("")
            )));
        }
        let p = headers.len() - 1;
        for (j, h) in headers.iter().skip(1).enumerate() {
            if h != format!("x{}", j + 1) {
                return Err(Error::InvalidDataset(format!(
                    "expected column `x{}`, found `{h}`",
                    j + 1
                )));
            }
        }
        let mut y = Vec::new();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != p + 1 {
                return Err(Error::InvalidDataset(format!(
                    "row {} has {} fields, expected {}",
                    line + 1,
                    rec.len(),
                    p + 1
                )));
            }
            let parse = |k: usize| -> Result<f64> {
                rec[k].parse::<f64>().map_err(|_| {
                    Error::InvalidDataset(format!(
                        "row {}: column `{}` is not a number: {:?}",
                        line + 1,
                        &headers[k],
                        &rec[k]
                    ))
                })
            };
            y.push(parse(0)?);
            for k in 1..=p {
                rows.push(parse(k)?);
            }
        }
        let n = y.len();
        Self::new(DMatrix::from_row_slice(n, p, &rows), y)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string()];
        header.extend((1..=self.p()).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.y[i].to_string()];
            rec.extend((0..self.p()).map(|j| self.x[(i, j)].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `L_n(theta, eta) = sum_i log eta(y_i - x_i^T theta)`, summed over ascending `i`.
pub fn log_likelihood(
    theta: &SparseVector,
    eta: &SymmetricNormalMixture,
    data: &Dataset,
) -> Result<f64> {
    data.check_dim(theta)?;
    Ok((0..data.n())
        .map(|i| eta.log_pdf(data.y[i] - data.row_dot(i, theta)))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss() -> SymmetricNormalMixture {
        SymmetricNormalMixture::gaussian(1.0).unwrap()
    }

    #[test]
    fn single_zero_observation() {
        let d = Dataset::new(DMatrix::zeros(1, 1), vec![0.0]).unwrap();
        let ll = log_likelihood(&SparseVector::zeros(1), &gauss(), &d).unwrap();
        assert!((ll + 0.918_938_533_2).abs() < 1e-10);
    }

    #[test]
    fn zero_row_extends_sum() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let theta = SparseVector::new(2, vec![1], vec![0.7]).unwrap();
        let eta = SymmetricNormalMixture::bimodal(1.0, 0.8).unwrap();
        let d = Dataset::new(x.clone(), vec![0.3, -0.2]).unwrap();
        let base = log_likelihood(&theta, &eta, &d).unwrap();
        let x3 = x.insert_row(2, 0.0);
        let d3 = Dataset::new(x3, vec![0.3, -0.2, 1.7]).unwrap();
        let ext = log_likelihood(&theta, &eta, &d3).unwrap();
        assert!((ext - base - eta.log_pdf(1.7)).abs() < 1e-12);
    }

    #[test]
    fn dense_oracle_agrees() {
        let x = DMatrix::from_row_slice(
            3,
            4,
            &[
                0.5, -1.0, 2.0, 0.1, 1.5, 0.0, -0.3, 0.9, -2.0, 1.1, 0.4, -0.6,
            ],
        );
        let y = vec![0.4, -1.3, 2.2];
        let theta = SparseVector::new(4, vec![0, 2, 3], vec![1.2, -0.4, 0.8]).unwrap();
        let eta =
            SymmetricNormalMixture::from_pairs(&[0.4, 0.6], &[(1.5, 0.7), (0.2, 1.3)]).unwrap();
        let d = Dataset::new(x.clone(), y.clone()).unwrap();
        let dense = theta.to_dense();
        let mut oracle = 0.0;
        for i in 0..3 {
            let mut fit = 0.0;
            for j in 0..4 {
                fit += x[(i, j)] * dense[j];
            }
            oracle += eta.pdf(y[i] - fit).ln();
        }
        let ll = log_likelihood(&theta, &eta, &d).unwrap();
        assert!((ll - oracle).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let d = Dataset::new(DMatrix::zeros(2, 3), vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            log_likelihood(&SparseVector::zeros(2), &gauss(), &d),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let text = "y,x1,x2\n1.5,0.5,-1\n-0.25,2,3\n";
        let d = Dataset::from_csv(text.as_bytes()).unwrap();
        assert_eq!((d.n(), d.p()), (2, 2));
        assert_eq!(d.x()[(1, 0)], 2.0);
        let mut buf = Vec::new();
        d.to_csv(&mut buf).unwrap();
        let back = Dataset::from_csv(buf.as_slice()).unwrap();
        assert_eq!(back.x(), d.x());
        assert_eq!(back.y(), d.y());

        let err = Dataset::from_csv("x1,x2\n1,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("`y`"));
        assert!(Dataset::from_csv("y,x1\n1,abc\n".as_bytes()).is_err());
        assert!(Dataset::from_csv("y,x1\n1,inf\n".as_bytes()).is_err());
    }

    #[test]
    fn bound_check() {
        let d = Dataset::new(DMatrix::from_row_slice(1, 2, &[0.5, -1.5]), vec![0.0]).unwrap();
        assert!(d.check_bound(1.5).is_ok());
        assert!(d.check_bound(1.0).is_err());
    }
}
