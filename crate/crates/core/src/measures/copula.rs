use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::discrete::DiscreteMeasure;
use super::univariate::UnivariateModel;
use crate::error::{Error, Result};
use crate::linalg;

/// Dependence structure shared by a family of multivariate models. Equality
/// of copulas is what makes two [`CopulaModel`]s transport-compatible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "copula", rename_all = "snake_case")]
pub enum Copula {
    Independence,
    /// Gaussian copula with the given correlation matrix (unit diagonal).
    Gaussian { correlation: DMatrix<f64> },
}

impl Copula {
    pub fn gaussian(correlation: DMatrix<f64>) -> Result<Self> {
        linalg::check_spd(&correlation)?;
        if correlation.diagonal().iter().any(|d| (d - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidArgument("correlation matrix must have unit diagonal".into()));
        }
        Ok(Self::Gaussian { correlation })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Independence => None,
            Self::Gaussian { correlation } => Some(correlation.nrows()),
        }
    }

    /// One draw of copula uniforms.
    pub fn sample_uniforms<R: Rng + ?Sized>(&self, q: usize, factor: Option<&DMatrix<f64>>, rng: &mut R) -> Vec<f64> {
        match self {
            Self::Independence => (0..q).map(|_| rng.random_range(f64::EPSILON..1.0)).collect(),
            Self::Gaussian { .. } => {
                let z = DVector::from_iterator(q, (0..q).map(|_| StandardNormal.sample(rng)));
                let x = factor.expect("gaussian copula needs its factor") * z;
                let n = UnivariateModel::Normal { mean: 0.0, sd: 1.0 };
                x.iter().map(|&v| n.cdf(v).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)).collect()
            }
        }
    }
}

/// Multivariate model given by a copula and its univariate marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    copula: Copula,
    marginals: Vec<UnivariateModel>,
}

impl CopulaModel {
    pub fn new(copula: Copula, marginals: Vec<UnivariateModel>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidArgument("copula model needs at least one marginal".into()));
        }
        if let Some(d) = copula.dim() {
            if d != marginals.len() {
                return Err(Error::DimensionMismatch { expected: d, got: marginals.len() });
            }
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { copula, marginals })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn copula(&self) -> &Copula {
        &self.copula
    }

    pub fn marginals(&self) -> &[UnivariateModel] {
        &self.marginals
    }

    pub fn compatible_with(&self, other: &Self) -> bool {
        self.copula == other.copula && self.dim() == other.dim()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
        let q = self.dim();
        let factor = match &self.copula {
            Copula::Gaussian { correlation } => Some(linalg::sampling_factor(correlation)),
            Copula::Independence => None,
        };
        let mut pts = DMatrix::zeros(n, q);
        for i in 0..n {
            let u = self.copula.sample_uniforms(q, factor.as_ref(), rng);
            for (j, m) in self.marginals.iter().enumerate() {
                pts[(i, j)] = m.quantile_unchecked(u[j]);
            }
        }
        DiscreteMeasure::uniform(pts)
    }
}
