use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::measures::Model;

/// Source of i.i.d. model draws.
pub trait ModelSampler: Send + Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> Result<Model>;
}

impl<F> ModelSampler for F
where
    F: Fn(&mut dyn RngCore) -> Result<Model> + Send + Sync,
{
    fn draw(&self, rng: &mut dyn RngCore) -> Result<Model> {
        self(rng)
    }
}

/// Finitely supported distribution over mutually compatible models.
#[derive(Debug, Clone)]
pub struct FiniteModels {
    support: Vec<Model>,
    weights: Vec<f64>,
}

impl FiniteModels {
    pub fn new(support: Vec<Model>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Empty("model distribution without support".into()));
        }
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidWeights("model weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("model weights sum to {total}")));
        }
        for m in &support[1..] {
            support[0].check_compatible(m)?;
        }
        Ok(Self { support, weights })
    }

    pub fn uniform(support: Vec<Model>) -> Result<Self> {
        let k = support.len();
        Self::new(support, vec![1.0 / k.max(1) as f64; k])
    }

    pub fn support(&self) -> &[Model] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Support members paired with their weights.
    pub fn members(&self) -> Vec<(f64, &Model)> {
        self.weights.iter().copied().zip(self.support.iter()).collect()
    }
}

/// A distribution over models: finite (`Π_n^{(k)}`) or available only
/// through a sampler (`Π_n`).
#[derive(Clone)]
pub enum ModelDistribution {
    Finite(FiniteModels),
    Sampler(Arc<dyn ModelSampler>),
}

impl fmt::Debug for ModelDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(m) => f.debug_tuple("Finite").field(m).finish(),
            Self::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

impl From<FiniteModels> for ModelDistribution {
    fn from(m: FiniteModels) -> Self {
        Self::Finite(m)
    }
}

impl ModelDistribution {
    pub fn finite(support: Vec<Model>, weights: Vec<f64>) -> Result<Self> {
        Ok(Self::Finite(FiniteModels::new(support, weights)?))
    }

    pub fn uniform(support: Vec<Model>) -> Result<Self> {
        Ok(Self::Finite(FiniteModels::uniform(support)?))
    }

    pub fn sampler(s: impl ModelSampler + 'static) -> Self {
        Self::Sampler(Arc::new(s))
    }

    /// The point mass `δ_m`.
    pub fn point_mass(m: Model) -> Self {
        Self::Finite(FiniteModels { support: vec![m], weights: vec![1.0] })
    }

    pub fn as_finite(&self) -> Option<&FiniteModels> {
        match self {
            Self::Finite(m) => Some(m),
            Self::Sampler(_) => None,
        }
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> Result<Model> {
        match self {
            Self::Finite(f) => {
                if f.len() == 1 {
                    return Ok(f.support[0].clone());
                }
                let idx = WeightedIndex::new(&f.weights)
                    .map_err(|e| Error::InvalidWeights(e.to_string()))?
                    .sample(rng);
                Ok(f.support[idx].clone())
            }
            Self::Sampler(s) => s.draw(rng),
        }
    }

    pub fn draw_many(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Model>> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}
