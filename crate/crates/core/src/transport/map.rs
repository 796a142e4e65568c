use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{RadialProfile, UnivariateModel};

/// Executable optimal transport map between two models of one family.
#[derive(Debug, Clone)]
pub enum TransportMap {
    Identity,
    /// `x ↦ Q_target(F_source(x))`.
    MonotoneRearrangement { source: UnivariateModel, target: UnivariateModel },
    /// Independent one-dimensional maps, one per coordinate.
    Coordinatewise(Vec<TransportMap>),
    /// `x ↦ profile(‖x‖) x / ‖x‖`.
    Radial { profile: RadialProfile },
    /// `x ↦ matrix (x - source_location) + target_location`, `matrix` PSD.
    AffinePsd { matrix: DMatrix<f64>, source_location: DVector<f64>, target_location: DVector<f64> },
    /// `x ↦ Σ w_i T_i(x)` with nonnegative weights summing to one.
    ConvexCombination { weights: Vec<f64>, maps: Vec<TransportMap> },
}

fn rearrange(source: &UnivariateModel, target: &UnivariateModel, x: f64) -> f64 {
    if source == target {
        return x;
    }
    if let (Some((s1, l1, c1)), Some((s2, l2, c2))) = (source.location_scale(), target.location_scale()) {
        if s1 == s2 {
            return l2 + c2 / c1 * (x - l1);
        }
    }
    let u = source.cdf(x).clamp(1e-300, 1.0 - f64::EPSILON / 2.0);
    target.quantile_unchecked(u)
}

impl TransportMap {
    pub fn convex_combination(weights: Vec<f64>, maps: Vec<TransportMap>) -> Result<Self> {
        if weights.len() != maps.len() || maps.is_empty() {
            return Err(Error::InvalidWeights("need one weight per map".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidWeights("convex weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("convex weights sum to {total}")));
        }
        Ok(Self::ConvexCombination { weights, maps })
    }

    pub fn affine_psd(matrix: DMatrix<f64>, source_location: DVector<f64>, target_location: DVector<f64>) -> Result<Self> {
        let scale = matrix.amax().max(1.0);
        if linalg::max_asymmetry(&matrix) > linalg::SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(linalg::max_asymmetry(&matrix)));
        }
        let min = linalg::min_eigenvalue(&matrix);
        if min < -linalg::SYMMETRY_TOL * scale {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(Self::AffinePsd { matrix, source_location, target_location })
    }

    /// Evaluates a one-dimensional map.
    pub fn apply_scalar(&self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::MonotoneRearrangement { source, target } => rearrange(source, target, x),
            Self::Radial { profile } => {
                if x == 0.0 {
                    0.0
                } else {
                    profile.eval(x.abs()) * x.signum()
                }
            }
            Self::AffinePsd { matrix, source_location, target_location } => {
                matrix[(0, 0)] * (x - source_location[0]) + target_location[0]
            }
            Self::Coordinatewise(maps) => maps[0].apply_scalar(x),
            Self::ConvexCombination { weights, maps } => {
                weights.iter().zip(maps).map(|(w, m)| w * m.apply_scalar(x)).sum()
            }
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Identity => x.clone(),
            Self::MonotoneRearrangement { .. } => DVector::from_element(1, self.apply_scalar(x[0])),
            Self::Coordinatewise(maps) => {
                DVector::from_iterator(x.len(), maps.iter().zip(x.iter()).map(|(m, &xi)| m.apply_scalar(xi)))
            }
            Self::Radial { profile } => {
                let r = x.norm();
                if r == 0.0 {
                    x.clone()
                } else {
                    x * (profile.eval(r) / r)
                }
            }
            Self::AffinePsd { matrix, source_location, target_location } => {
                matrix * (x - source_location) + target_location
            }
            Self::ConvexCombination { weights, maps } => {
                let mut out = DVector::zeros(x.len());
                for (w, m) in weights.iter().zip(maps) {
                    out += *w * m.apply(x);
                }
                out
            }
        }
    }

    /// Checks that the map is monotone along `0 < t` on a few probe points;
    /// used for profile and rearrangement sanity checks in tests.
    pub fn is_nondecreasing_on(&self, xs: &[f64]) -> bool {
        let ys: Vec<f64> = xs.iter().map(|&x| self.apply_scalar(x)).collect();
        ys.windows(2).all(|w| w[0] <= w[1] + 1e-12)
    }
}
