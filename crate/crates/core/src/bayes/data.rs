use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::Model;

/// `n` observations in `R^q`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: DMatrix<f64>,
}

impl Dataset {
    pub fn new(observations: DMatrix<f64>) -> Result<Self> {
        if observations.ncols() == 0 {
            return Err(Error::InvalidArgument("observations need at least one column".into()));
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite observation".into()));
        }
        Ok(Self { observations })
    }

    pub fn empty(q: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(0, q))
    }

    /// `n` i.i.d. draws from `model`.
    pub fn sample<R: Rng + ?Sized>(model: &Model, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Self::empty(model.dim());
        }
        Self::new(model.sample(n, rng)?.points().clone())
    }

    pub fn len(&self) -> usize {
        self.observations.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.observations.ncols()
    }

    pub fn observations(&self) -> &DMatrix<f64> {
        &self.observations
    }

    /// The first `n` observations.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::InvalidArgument(format!("prefix {n} exceeds {} observations", self.len())));
        }
        Ok(Self { observations: self.observations.rows(0, n).into_owned() })
    }

    pub fn mean(&self) -> Option<DVector<f64>> {
        if self.is_empty() {
            return None;
        }
        Some(self.observations.row_mean().transpose())
    }

    /// Per-coordinate sample variance; `None` for fewer than two rows.
    pub fn variances(&self) -> Option<DVector<f64>> {
        if self.len() < 2 {
            return None;
        }
        Some(self.observations.row_variance().transpose() * (self.len() as f64 / (self.len() - 1) as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::UnivariateModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prefixes_and_moments() {
        let d = Dataset::new(DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 9.0])).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.mean().unwrap(), DVector::from_vec(vec![3.0, 5.0]));
        assert_eq!(d.variances().unwrap(), DVector::from_vec(vec![4.0, 13.0]));
        let p = d.prefix(1).unwrap();
        assert_eq!(p.observations()[(0, 1)], 2.0);
        assert!(d.prefix(4).is_err());
        assert!(d.prefix(0).unwrap().is_empty());
        assert!(Dataset::new(DMatrix::from_element(1, 1, f64::NAN)).is_err());
    }

    #[test]
    fn sampled_dataset() {
        let m: Model = UnivariateModel::normal(1.0, 1.0).unwrap().into();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Dataset::sample(&m, 500, &mut rng).unwrap();
        assert_eq!((d.len(), d.dim()), (500, 1));
        assert!((d.mean().unwrap()[0] - 1.0).abs() < 0.2);
        assert!(Dataset::sample(&m, 0, &mut rng).unwrap().is_empty());
    }
}
