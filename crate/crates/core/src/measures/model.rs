use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::copula::CopulaModel;
use super::discrete::DiscreteMeasure;
use super::location_scatter::LocationScatterModel;
use super::spherical::SphericalModel;
use super::univariate::UnivariateModel;
use crate::error::{Error, Result};

/// A probability model from one of the closed-form transport families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", content = "parameters", rename_all = "snake_case")]
pub enum Model {
    Univariate(UnivariateModel),
    LocationScatter(LocationScatterModel),
    Spherical(SphericalModel),
    Copula(CopulaModel),
}

impl From<UnivariateModel> for Model {
    fn from(m: UnivariateModel) -> Self {
        Model::Univariate(m)
    }
}

impl From<LocationScatterModel> for Model {
    fn from(m: LocationScatterModel) -> Self {
        Model::LocationScatter(m)
    }
}

impl From<SphericalModel> for Model {
    fn from(m: SphericalModel) -> Self {
        Model::Spherical(m)
    }
}

impl From<CopulaModel> for Model {
    fn from(m: CopulaModel) -> Self {
        Model::Copula(m)
    }
}

impl Model {
    pub fn family(&self) -> &'static str {
        match self {
            Model::Univariate(_) => "univariate",
            Model::LocationScatter(_) => "location_scatter",
            Model::Spherical(_) => "spherical",
            Model::Copula(_) => "copula",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Univariate(_) => 1,
            Model::LocationScatter(m) => m.dim(),
            Model::Spherical(m) => m.dim(),
            Model::Copula(m) => m.dim(),
        }
    }

    /// Checks that optimal maps between `self` and `other` are available in
    /// closed form.
    pub fn check_compatible(&self, other: &Model) -> Result<()> {
        let ok = match (self, other) {
            (Model::Univariate(_), Model::Univariate(_)) => true,
            (Model::LocationScatter(a), Model::LocationScatter(b)) => a.compatible_with(b),
            (Model::Spherical(a), Model::Spherical(b)) => a.compatible_with(b),
            (Model::Copula(a), Model::Copula(b)) => a.compatible_with(b),
            _ => {
                return Err(Error::Incompatible(format!(
                    "cannot transport {} onto {}",
                    self.family(),
                    other.family()
                )))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Incompatible(format!(
                "{} models built on different generators or copulas",
                self.family()
            )))
        }
    }

    /// `n` i.i.d. draws with uniform weights.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        match self {
            Model::Univariate(m) => {
                DiscreteMeasure::uniform(DMatrix::from_fn(n, 1, |_, _| m.sample(rng)))
            }
            Model::LocationScatter(m) => m.sample(n, rng),
            Model::Spherical(m) => m.sample(n, rng),
            Model::Copula(m) => m.sample(n, rng),
        }
    }

    /// Log-density at `x`; `None` for families without a closed-form density.
    pub fn ln_pdf(&self, x: &DVector<f64>) -> Option<f64> {
        match self {
            Model::Univariate(m) => Some(m.ln_pdf(x[0])),
            Model::LocationScatter(m) => Some(m.ln_pdf(x)),
            _ => None,
        }
    }

    pub fn mean(&self) -> Option<DVector<f64>> {
        match self {
            Model::Univariate(m) => m.mean().map(|v| DVector::from_element(1, v)),
            Model::LocationScatter(m) => Some(m.mean().clone()),
            _ => None,
        }
    }

    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        match self {
            Model::Univariate(m) => m.variance().map(|v| DMatrix::from_element(1, 1, v)),
            Model::LocationScatter(m) => m.covariance(),
            _ => None,
        }
    }

    /// `E‖X‖²`.
    pub fn second_moment(&self) -> Option<f64> {
        Some(self.mean()?.norm_squared() + self.covariance()?.trace())
    }

    pub fn as_univariate(&self) -> Option<&UnivariateModel> {
        match self {
            Model::Univariate(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_location_scatter(&self) -> Option<&LocationScatterModel> {
        match self {
            Model::LocationScatter(m) => Some(m),
            _ => None,
        }
    }
}
