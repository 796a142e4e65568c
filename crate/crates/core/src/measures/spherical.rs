use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::discrete::DiscreteMeasure;
use super::generator::Generator;
use crate::error::{Error, Result};

/// Tolerance below which consecutive profile values count as flat.
pub const FLAT_TOL: f64 = 1e-12;

/// Nondecreasing, nonnegative piecewise-linear function on `[0, ∞)`.
/// Constant below the first knot, linearly extrapolated past the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = Self { radii, values };
        p.validate()?;
        Ok(p)
    }

    pub fn from_fn(radii: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(radii, values)
    }

    /// The identity profile `α(r) = r` on `[0, r_max]`.
    pub fn identity(r_max: f64) -> Self {
        Self { radii: vec![0.0, r_max], values: vec![0.0, r_max] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.len() < 2 || self.radii.len() != self.values.len() {
            return Err(Error::InvalidArgument("radial profile needs matching radii/values, at least 2".into()));
        }
        if self.radii[0] < 0.0 || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("radii must be nonnegative and strictly increasing".into()));
        }
        if self.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("radial profile must be nonnegative".into()));
        }
        if self.values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("radial profile must be nondecreasing".into()));
        }
        Ok(())
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, r: f64) -> f64 {
        let n = self.radii.len();
        if r <= self.radii[0] {
            return self.values[0];
        }
        if r >= self.radii[n - 1] {
            let slope = (self.values[n - 1] - self.values[n - 2]) / (self.radii[n - 1] - self.radii[n - 2]);
            return self.values[n - 1] + slope * (r - self.radii[n - 1]);
        }
        let i = self.radii.partition_point(|&k| k <= r) - 1;
        let t = (r - self.radii[i]) / (self.radii[i + 1] - self.radii[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// Monotone piecewise-linear inverse. Flat stretches (steps below
    /// [`FLAT_TOL`]) are merged into their right end.
    pub fn inverse(&self) -> Result<RadialProfile> {
        let mut xs: Vec<f64> = Vec::with_capacity(self.values.len());
        let mut ys: Vec<f64> = Vec::with_capacity(self.values.len());
        for (&r, &v) in self.radii.iter().zip(&self.values) {
            match xs.last() {
                Some(&last) if v - last <= FLAT_TOL => {
                    *ys.last_mut().unwrap() = r;
                }
                _ => {
                    xs.push(v);
                    ys.push(r);
                }
            }
        }
        if xs.len() < 2 {
            return Err(Error::Incompatible("radial profile is not invertible on its support".into()));
        }
        RadialProfile::new(xs, ys)
    }

    /// `outer ∘ inner` tabulated on the union of both knot sets (mapped
    /// through `inner`).
    pub fn compose(outer: &RadialProfile, inner: &RadialProfile) -> Result<RadialProfile> {
        let inner_inv = inner.inverse()?;
        // breakpoints of outer ∘ inner⁻¹ sit at the images of both knot sets
        let mut knots: Vec<f64> = inner.values.clone();
        knots.extend(outer.radii.iter().map(|&r| inner.eval(r)));
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() <= FLAT_TOL);
        RadialProfile::from_fn(knots, |s| outer.eval(inner_inv.eval(s)))
    }

    /// Pointwise convex combination on the union of knots.
    pub fn combine(parts: &[(f64, &RadialProfile)]) -> Result<RadialProfile> {
        if parts.is_empty() {
            return Err(Error::Empty("no profiles to combine".into()));
        }
        let first = &parts[0].1.radii;
        let same = parts.iter().all(|(_, p)| &p.radii == first);
        let knots: Vec<f64> = if same {
            first.clone()
        } else {
            let mut k: Vec<f64> = parts.iter().flat_map(|(_, p)| p.radii.iter().copied()).collect();
            k.sort_by(f64::total_cmp);
            k.dedup_by(|a, b| (*a - *b).abs() <= FLAT_TOL);
            k
        };
        let mut values = vec![0.0; knots.len()];
        for (w, p) in parts {
            for (v, &r) in values.iter_mut().zip(&knots) {
                *v += w * p.eval(r);
            }
        }
        for i in 1..values.len() {
            if values[i] < values[i - 1] {
                values[i] = values[i - 1];
            }
        }
        for v in &mut values {
            *v = v.max(0.0);
        }
        RadialProfile::new(knots, values)
    }
}

/// `L(α(‖x̃‖) x̃ / ‖x̃‖)` for a generator `x̃` and radial profile `α`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSpherical", into = "RawSpherical")]
pub struct SphericalModel {
    generator: Arc<Generator>,
    alpha: RadialProfile,
}

#[derive(Serialize, Deserialize)]
struct RawSpherical {
    generator: Generator,
    alpha: RadialProfile,
}

impl TryFrom<RawSpherical> for SphericalModel {
    type Error = Error;
    fn try_from(raw: RawSpherical) -> Result<Self> {
        SphericalModel::new(Arc::new(raw.generator), raw.alpha)
    }
}

impl From<SphericalModel> for RawSpherical {
    fn from(m: SphericalModel) -> Self {
        Self { generator: (*m.generator).clone(), alpha: m.alpha }
    }
}

/// Seed of the fixed radius sample used for L² evaluations.
const RADIUS_SEED: u64 = 0x5eed_0f_5e4e;

impl SphericalModel {
    pub fn new(generator: Arc<Generator>, alpha: RadialProfile) -> Result<Self> {
        alpha.validate()?;
        Ok(Self { generator, alpha })
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn generator(&self) -> &Arc<Generator> {
        &self.generator
    }

    pub fn alpha(&self) -> &RadialProfile {
        &self.alpha
    }

    pub fn compatible_with(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.generator, &other.generator) || *self.generator == *other.generator
    }

    fn reprofile(&self, x: DVector<f64>) -> DVector<f64> {
        let r = x.norm();
        if r == 0.0 {
            return x;
        }
        x * (self.alpha.eval(r) / r)
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        self.reprofile(self.generator.sample(rng))
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
        let mut pts = DMatrix::zeros(n, self.dim());
        for i in 0..n {
            pts.set_row(i, &self.sample_one(rng).transpose());
        }
        DiscreteMeasure::uniform(pts)
    }

    /// A fixed, sorted sample of generator radii `‖x̃‖` used as quadrature
    /// nodes for integrals against the radius law.
    pub fn radius_nodes(&self, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(RADIUS_SEED);
        let mut r: Vec<f64> = (0..n).map(|_| self.generator.sample(&mut rng).norm()).collect();
        r.sort_by(f64::total_cmp);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_rejects_decreasing_or_negative() {
        assert!(RadialProfile::new(vec![0.0, 1.0], vec![1.0, 0.5]).is_err());
        assert!(RadialProfile::new(vec![0.0, 1.0], vec![-1.0, 0.5]).is_err());
        assert!(RadialProfile::new(vec![1.0, 0.0], vec![0.0, 0.5]).is_err());
    }

    #[test]
    fn inverse_merges_flat_segments() {
        let p = RadialProfile::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        let inv = p.inverse().unwrap();
        assert_eq!(inv.radii(), &[0.0, 1.0, 2.0]);
        assert_eq!(inv.values(), &[0.0, 2.0, 3.0]);
        let flat = RadialProfile::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(flat.inverse().is_err());
    }

    #[test]
    fn eval_extrapolates() {
        let p = RadialProfile::identity(2.0);
        assert_eq!(p.eval(5.0), 5.0);
        assert_eq!(p.eval(0.5), 0.5);
    }

    #[test]
    fn samples_have_profiled_norms() {
        let g = Arc::new(Generator::gaussian(3).unwrap());
        let alpha = RadialProfile::new(vec![0.0, 10.0], vec![0.0, 20.0]).unwrap();
        let m = SphericalModel::new(g.clone(), alpha).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let x = m.sample_one(&mut a);
        let raw = g.sample(&mut b);
        assert!((x - raw * 2.0).amax() < 1e-12);
    }
}
