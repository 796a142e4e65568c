use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weighted point cloud; one point per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    points: DMatrix<f64>,
    weights: DVector<f64>,
}

const WEIGHT_TOL: f64 = 1e-12;

impl DiscreteMeasure {
    pub fn new(points: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::Empty("discrete measure needs at least one point".into()));
        }
        if points.nrows() != weights.len() {
            return Err(Error::DimensionMismatch { expected: points.nrows(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidWeights("weights must be nonnegative".into()));
        }
        let total = weights.sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { points, weights })
    }

    /// Equal weights `1/n` on the rows of `points`.
    pub fn uniform(points: DMatrix<f64>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return Err(Error::Empty("discrete measure needs at least one point".into()));
        }
        Ok(Self { weights: DVector::from_element(n, 1.0 / n as f64), points })
    }

    pub fn from_rows(rows: &[DVector<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Empty("no points".into()))?;
        let q = first.len();
        let mut m = DMatrix::zeros(rows.len(), q);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != q {
                return Err(Error::DimensionMismatch { expected: q, got: r.len() });
            }
            m.set_row(i, &r.transpose());
        }
        Self::uniform(m)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn has_uniform_weights(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&x| x == w)
    }

    pub fn mean(&self) -> DVector<f64> {
        self.points.transpose() * &self.weights
    }

    /// Weighted second moment `E ||x||^2`.
    pub fn second_moment(&self) -> f64 {
        self.points.row_iter().zip(self.weights.iter()).map(|(r, w)| w * r.norm_squared()).sum()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let q = self.dim();
        let mut cov = DMatrix::zeros(q, q);
        for (r, &w) in self.points.row_iter().zip(self.weights.iter()) {
            let d = r.transpose() - &mean;
            cov += w * &d * d.transpose();
        }
        cov
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let pts = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(DiscreteMeasure::new(pts.clone(), DVector::from_vec(vec![0.5, 0.6])).is_err());
        assert!(DiscreteMeasure::new(pts.clone(), DVector::from_vec(vec![1.5, -0.5])).is_err());
        assert!(DiscreteMeasure::new(pts.clone(), DVector::from_vec(vec![1.0])).is_err());
        assert!(DiscreteMeasure::uniform(DMatrix::zeros(0, 2)).is_err());
        let d = DiscreteMeasure::uniform(pts).unwrap();
        assert!(d.has_uniform_weights());
        assert_eq!(d.mean()[0], 0.5);
        assert_eq!(d.second_moment(), 0.5);
    }
}
