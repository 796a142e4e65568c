use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::univariate::UnivariateModel;
use crate::error::{Error, Result};

/// A product distribution on `R^q` with independent coordinates. Location
/// scatter and spherical families are built on top of a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    coordinates: Vec<UnivariateModel>,
}

impl Generator {
    pub fn new(coordinates: Vec<UnivariateModel>) -> Result<Self> {
        if coordinates.is_empty() {
            return Err(Error::InvalidArgument("generator needs at least one coordinate".into()));
        }
        for c in &coordinates {
            c.validate()?;
        }
        Ok(Self { coordinates })
    }

    /// Standard normal generator on `R^q`.
    pub fn gaussian(q: usize) -> Result<Self> {
        Self::new(vec![UnivariateModel::Normal { mean: 0.0, sd: 1.0 }; q])
    }

    /// Normal, Laplace and Student-t(3) coordinates in three consecutive
    /// blocks, all with unit scale. For `q = 15` this is coordinates 1-5
    /// normal, 6-10 Laplace, 11-15 Student-t.
    ///
    /// The unit-scale convention means Laplace coordinates have variance 2
    /// and Student-t(3) coordinates variance 3.
    pub fn mixed(q: usize) -> Result<Self> {
        let coords = (0..q)
            .map(|i| match 3 * i / q.max(1) {
                0 => UnivariateModel::Normal { mean: 0.0, sd: 1.0 },
                1 => UnivariateModel::Laplace { loc: 0.0, scale: 1.0 },
                _ => UnivariateModel::StudentT { dof: 3.0, loc: 0.0, scale: 1.0 },
            })
            .collect();
        Self::new(coords)
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn coordinates(&self) -> &[UnivariateModel] {
        &self.coordinates
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.coordinates.iter().zip(x).map(|(c, &xi)| c.ln_pdf(xi)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.coordinates.iter().map(|c| c.sample(rng)))
    }

    /// Per-coordinate variances; `None` if any coordinate lacks one.
    pub fn variances(&self) -> Option<Vec<f64>> {
        self.coordinates.iter().map(|c| c.variance()).collect()
    }

    /// True when every coordinate has zero mean and unit variance.
    pub fn is_standardized(&self) -> bool {
        self.coordinates.iter().all(|c| {
            matches!((c.mean(), c.variance()), (Some(m), Some(v)) if m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mixed_layout_for_fifteen() {
        let g = Generator::mixed(15).unwrap();
        let c = g.coordinates();
        assert!(matches!(c[0], UnivariateModel::Normal { .. }));
        assert!(matches!(c[4], UnivariateModel::Normal { .. }));
        assert!(matches!(c[5], UnivariateModel::Laplace { .. }));
        assert!(matches!(c[9], UnivariateModel::Laplace { .. }));
        assert!(matches!(c[10], UnivariateModel::StudentT { .. }));
        assert!(matches!(c[14], UnivariateModel::StudentT { .. }));
        assert!(!g.is_standardized());
        assert!(Generator::gaussian(3).unwrap().is_standardized());
    }

    #[test]
    fn coordinate_moments() {
        let g = Generator::mixed(15).unwrap();
        let vars = g.variances().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut sum = vec![0.0; 15];
        let mut sq = vec![0.0; 15];
        for _ in 0..n {
            let x = g.sample(&mut rng);
            for i in 0..15 {
                sum[i] += x[i];
                sq[i] += x[i] * x[i];
            }
        }
        for i in 0..15 {
            let mean = sum[i] / n as f64;
            assert!(mean.abs() < 0.05, "coord {i} mean {mean}");
            // Student-t(3) has no fourth moment; its sample variance converges too slowly
            if i < 10 {
                let var = sq[i] / n as f64 - mean * mean;
                assert!((var / vars[i] - 1.0).abs() < 0.05, "coord {i} var {var}");
            }
        }
    }

    #[test]
    fn empty_rejected() {
        assert!(Generator::new(vec![]).is_err());
    }
}
