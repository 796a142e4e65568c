//! Univariate models: closed-form parametric families, monotone
//! piecewise-linear quantile grids, and exact weighted quantile averages.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::{beta, erf, gamma};

use crate::error::{Error, Result};
use crate::quadrature::{self, HEAVY_TAIL_CLIP};

/// Default number of quantile levels for grid representations.
pub const DEFAULT_GRID_LEVELS: usize = 2048;

/// Largest number of parts kept in a [`QuantileAverage`] before it is
/// tabulated on a grid.
pub const MAX_AVERAGE_PARTS: usize = 64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Chebyshev-spaced probability levels in `[lo, hi]`, clustered towards both
/// ends. The levels are symmetric about 1/2 when `lo + hi == 1`.
pub fn chebyshev_levels(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let theta = PI * (i as f64 + 0.5) / n as f64;
            lo + (hi - lo) * 0.5 * (1.0 - theta.cos())
        })
        .collect()
}

/// Default levels: 2048 Chebyshev points on `[1e-5, 1 - 1e-5]`.
pub fn default_levels() -> Vec<f64> {
    chebyshev_levels(DEFAULT_GRID_LEVELS, HEAVY_TAIL_CLIP, 1.0 - HEAVY_TAIL_CLIP)
}

/// A right-continuous quantile function stored on a grid of probability
/// levels and interpolated linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridQuantile {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Extrapolate linearly beyond the outer knots (otherwise clamp).
    extrapolate: bool,
}

impl GridQuantile {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, extrapolate: bool) -> Result<Self> {
        let g = Self { knots, values, extrapolate };
        g.validate()?;
        Ok(g)
    }

    /// Tabulates `q` on the given levels.
    pub fn from_fn(knots: Vec<f64>, q: impl Fn(f64) -> f64) -> Result<Self> {
        let values = knots.iter().map(|&u| q(u)).collect();
        Self::new(knots, values, true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.len() < 2 {
            return Err(Error::InvalidArgument("quantile grid needs at least 2 knots".into()));
        }
        if self.knots.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.knots.len(),
                got: self.values.len(),
            });
        }
        if self.knots.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
            return Err(Error::Domain("quantile knots must lie strictly inside (0,1)".into()));
        }
        if self.knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("quantile knots must be strictly increasing".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("quantile values must be finite".into()));
        }
        if self.values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("quantile values must be nondecreasing".into()));
        }
        Ok(())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extrapolates(&self) -> bool {
        self.extrapolate
    }

    fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.knots[i + 1] - self.knots[i])
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.knots.len();
        if u <= self.knots[0] {
            return if self.extrapolate {
                self.values[0] - self.slope(0) * (self.knots[0] - u)
            } else {
                self.values[0]
            };
        }
        if u >= self.knots[n - 1] {
            return if self.extrapolate {
                self.values[n - 1] + self.slope(n - 2) * (u - self.knots[n - 1])
            } else {
                self.values[n - 1]
            };
        }
        let i = self.knots.partition_point(|&k| k <= u) - 1;
        let t = (u - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// Left and right end of the support implied by the tail rule.
    pub fn support(&self) -> (f64, f64) {
        (self.quantile(0.0), self.quantile(1.0))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x < self.values[0] {
            if !self.extrapolate {
                return 0.0;
            }
            let s = self.slope(0);
            if s <= 0.0 {
                return 0.0;
            }
            return (self.knots[0] - (self.values[0] - x) / s).max(0.0);
        }
        let idx = self.values.partition_point(|&v| v <= x);
        if idx == n {
            if !self.extrapolate {
                return 1.0;
            }
            let s = self.slope(n - 2);
            if s <= 0.0 {
                return 1.0;
            }
            return (self.knots[n - 1] + (x - self.values[n - 1]) / s).min(1.0);
        }
        let (lo, hi) = (idx - 1, idx);
        let t = (x - self.values[lo]) / (self.values[hi] - self.values[lo]);
        self.knots[lo] + t * (self.knots[hi] - self.knots[lo])
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let n = self.knots.len();
        let seg = if x < self.values[0] {
            if !self.extrapolate || x < self.quantile(0.0) {
                return 0.0;
            }
            0
        } else {
            let idx = self.values.partition_point(|&v| v <= x);
            if idx == n {
                if !self.extrapolate || x > self.quantile(1.0) {
                    return 0.0;
                }
                n - 2
            } else {
                idx - 1
            }
        };
        let s = self.slope(seg);
        if s > 0.0 {
            1.0 / s
        } else {
            0.0
        }
    }

    /// Pointwise convex combination of quantile grids. All grids are
    /// evaluated on the knots of the first one.
    pub fn combine(parts: &[(f64, &GridQuantile)]) -> Result<GridQuantile> {
        let first = parts.first().ok_or_else(|| Error::Empty("no grids to combine".into()))?.1;
        let knots = first.knots.clone();
        let mut values = vec![0.0; knots.len()];
        for (w, g) in parts {
            if g.knots == knots {
                for (v, gv) in values.iter_mut().zip(&g.values) {
                    *v += w * gv;
                }
            } else {
                for (v, &u) in values.iter_mut().zip(&knots) {
                    *v += w * g.quantile(u);
                }
            }
        }
        // rounding can break monotonicity by an ulp on flat stretches
        for i in 1..values.len() {
            if values[i] < values[i - 1] {
                values[i] = values[i - 1];
            }
        }
        let extrapolate = parts.iter().all(|(_, g)| g.extrapolate);
        GridQuantile::new(knots, values, extrapolate)
    }
}

/// Closed-form location-scale shape, used to keep barycenters of a single
/// parametric family in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Normal,
    Laplace,
    StudentT(f64),
    Exponential,
    Logistic,
    Gumbel,
}

/// A univariate probability model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UnivariateModel {
    Normal { mean: f64, sd: f64 },
    Laplace { loc: f64, scale: f64 },
    StudentT { dof: f64, loc: f64, scale: f64 },
    Exponential { rate: f64 },
    Logistic { loc: f64, scale: f64 },
    Gumbel { loc: f64, scale: f64 },
    Grid(GridQuantile),
    QuantileAverage(QuantileAverage),
}

/// The model with quantile `Q(u) = Σ w_i Q_i(u)`. Parts are never averages
/// themselves, carry positive weights summing to one, and are distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileAverage {
    parts: Vec<(f64, UnivariateModel)>,
}

impl QuantileAverage {
    pub fn parts(&self) -> &[(f64, UnivariateModel)] {
        &self.parts
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::Empty("quantile average without parts".into()));
        }
        let mut total = 0.0;
        for (w, m) in &self.parts {
            if !(*w > 0.0) {
                return Err(Error::InvalidWeights(format!("quantile average weight {w} is not positive")));
            }
            if matches!(m, UnivariateModel::QuantileAverage(_)) {
                return Err(Error::InvalidArgument("nested quantile average".into()));
            }
            m.validate()?;
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("quantile average weights sum to {total}")));
        }
        Ok(())
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.parts.iter().map(|(w, m)| w * m.quantile_unchecked(u)).sum()
    }

    /// `Q'(u) = Σ w_i / f_i(Q_i(u))`.
    pub fn quantile_derivative(&self, u: f64) -> f64 {
        self.parts.iter().map(|(w, m)| w * m.quantile_derivative(u)).sum()
    }

    /// Inverts the quantile by bisection on the log-odds of `u`.
    pub fn cdf(&self, x: f64) -> f64 {
        let level = |t: f64| 1.0 / (1.0 + (-t).exp());
        let (mut lo, mut hi) = (-700.0_f64, 36.0_f64);
        if self.quantile(level(lo)) > x {
            return 0.0;
        }
        if self.quantile(level(hi)) <= x {
            return 1.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.quantile(level(mid)) <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        level(0.5 * (lo + hi))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {v}")))
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn std_normal_quantile(u: f64) -> f64 {
    let mut z = -SQRT_2 * erf::erfc_inv(2.0 * u);
    // one Halley step
    let e = std_normal_cdf(z) - u;
    let d = std_normal_pdf(z);
    if d > 0.0 {
        let r = e / d;
        z -= r / (1.0 + 0.5 * z * r);
    }
    z
}

fn student_cdf(dof: f64, t: f64) -> f64 {
    let x = dof / (dof + t * t);
    let tail = 0.5 * beta::beta_reg(0.5 * dof, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn student_ln_pdf(dof: f64, t: f64) -> f64 {
    gamma::ln_gamma(0.5 * (dof + 1.0))
        - gamma::ln_gamma(0.5 * dof)
        - 0.5 * (dof * PI).ln()
        - 0.5 * (dof + 1.0) * (1.0 + t * t / dof).ln()
}

fn student_quantile(dof: f64, u: f64) -> f64 {
    if u == 0.5 {
        return 0.0;
    }
    let lower = u.min(1.0 - u);
    let x = beta::inv_beta_reg(0.5 * dof, 0.5, 2.0 * lower);
    let mut t = -(dof * (1.0 - x) / x).sqrt();
    if u > 0.5 {
        t = -t;
    }
    for _ in 0..3 {
        let d = student_ln_pdf(dof, t).exp();
        if !(d > 0.0) {
            break;
        }
        let step = (student_cdf(dof, t) - u) / d;
        t -= step;
        if step.abs() < 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    t
}

impl UnivariateModel {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        finite("mean", mean)?;
        positive("sd", sd)?;
        Ok(Self::Normal { mean, sd })
    }

    pub fn laplace(loc: f64, scale: f64) -> Result<Self> {
        finite("loc", loc)?;
        positive("scale", scale)?;
        Ok(Self::Laplace { loc, scale })
    }

    pub fn student_t(dof: f64, loc: f64, scale: f64) -> Result<Self> {
        positive("dof", dof)?;
        finite("loc", loc)?;
        positive("scale", scale)?;
        Ok(Self::StudentT { dof, loc, scale })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        positive("rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    pub fn logistic(loc: f64, scale: f64) -> Result<Self> {
        finite("loc", loc)?;
        positive("scale", scale)?;
        Ok(Self::Logistic { loc, scale })
    }

    pub fn gumbel(loc: f64, scale: f64) -> Result<Self> {
        finite("loc", loc)?;
        positive("scale", scale)?;
        Ok(Self::Gumbel { loc, scale })
    }

    pub fn grid(g: GridQuantile) -> Result<Self> {
        g.validate()?;
        Ok(Self::Grid(g))
    }

    /// Model with quantile `Σ w_i Q_i`. Nested averages are flattened, equal
    /// parts merged and zero weights dropped; a single remaining part is
    /// returned as is, and more than [`MAX_AVERAGE_PARTS`] parts are
    /// tabulated on the default levels.
    pub fn quantile_average(parts: &[(f64, &UnivariateModel)]) -> Result<Self> {
        let mut flat: Vec<(f64, UnivariateModel)> = Vec::new();
        let mut push = |w: f64, m: &UnivariateModel| {
            if w == 0.0 {
                return;
            }
            match flat.iter_mut().find(|(_, existing)| existing == m) {
                Some(entry) => entry.0 += w,
                None => flat.push((w, m.clone())),
            }
        };
        let mut total = 0.0;
        for &(w, m) in parts {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidWeights(format!("quantile average weight {w}")));
            }
            total += w;
            match m {
                Self::QuantileAverage(a) => a.parts.iter().for_each(|(v, inner)| push(w * v, inner)),
                _ => push(w, m),
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("quantile average weights sum to {total}")));
        }
        let sum: f64 = flat.iter().map(|p| p.0).sum();
        flat.iter_mut().for_each(|p| p.0 /= sum);
        match flat.len() {
            0 => Err(Error::Empty("quantile average without parts".into())),
            1 => Ok(flat.pop().expect("one part").1),
            n if n > MAX_AVERAGE_PARTS => {
                let avg = QuantileAverage { parts: flat };
                Ok(Self::Grid(GridQuantile::from_fn(default_levels(), |u| avg.quantile(u))?))
            }
            _ => Ok(Self::QuantileAverage(QuantileAverage { parts: flat })),
        }
    }

    /// Re-checks parameters, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Normal { mean, sd } => Self::normal(mean, sd).map(drop),
            Self::Laplace { loc, scale } => Self::laplace(loc, scale).map(drop),
            Self::StudentT { dof, loc, scale } => Self::student_t(dof, loc, scale).map(drop),
            Self::Exponential { rate } => Self::exponential(rate).map(drop),
            Self::Logistic { loc, scale } => Self::logistic(loc, scale).map(drop),
            Self::Gumbel { loc, scale } => Self::gumbel(loc, scale).map(drop),
            Self::Grid(ref g) => g.validate(),
            Self::QuantileAverage(ref a) => a.validate(),
        }
    }

    /// Quantile `Q(u)` for `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("probability level {u} outside (0,1)")));
        }
        Ok(self.quantile_unchecked(u))
    }

    /// Quantile without the domain check; callers guarantee `0 < u < 1`.
    pub fn quantile_unchecked(&self, u: f64) -> f64 {
        match *self {
            Self::Normal { mean, sd } => mean + sd * std_normal_quantile(u),
            Self::Laplace { loc, scale } => {
                if u < 0.5 {
                    loc + scale * (2.0 * u).ln()
                } else {
                    loc - scale * (2.0 * (1.0 - u)).ln()
                }
            }
            Self::StudentT { dof, loc, scale } => loc + scale * student_quantile(dof, u),
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Logistic { loc, scale } => loc + scale * (u / (1.0 - u)).ln(),
            Self::Gumbel { loc, scale } => loc - scale * (-u.ln()).ln(),
            Self::Grid(ref g) => g.quantile(u),
            Self::QuantileAverage(ref a) => a.quantile(u),
        }
    }

    /// `dQ/du = 1 / f(Q(u))`.
    pub fn quantile_derivative(&self, u: f64) -> f64 {
        match self {
            Self::QuantileAverage(a) => a.quantile_derivative(u),
            Self::Grid(g) => {
                let x = g.quantile(u);
                let f = g.pdf(x);
                if f > 0.0 {
                    1.0 / f
                } else {
                    f64::INFINITY
                }
            }
            _ => (-self.ln_pdf(self.quantile_unchecked(u))).exp(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            Self::Laplace { loc, scale } => {
                let z = (x - loc) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Self::StudentT { dof, loc, scale } => student_cdf(dof, (x - loc) / scale),
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::Logistic { loc, scale } => 1.0 / (1.0 + (-(x - loc) / scale).exp()),
            Self::Gumbel { loc, scale } => (-(-(x - loc) / scale).exp()).exp(),
            Self::Grid(ref g) => g.cdf(x),
            Self::QuantileAverage(ref a) => a.cdf(x),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
            }
            Self::Laplace { loc, scale } => -(x - loc).abs() / scale - (2.0 * scale).ln(),
            Self::StudentT { dof, loc, scale } => student_ln_pdf(dof, (x - loc) / scale) - scale.ln(),
            Self::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            Self::Logistic { loc, scale } => {
                let z = -(x - loc).abs() / scale;
                z - scale.ln() - 2.0 * z.exp().ln_1p()
            }
            Self::Gumbel { loc, scale } => {
                let z = (x - loc) / scale;
                -z - (-z).exp() - scale.ln()
            }
            Self::Grid(ref g) => g.pdf(x).ln(),
            Self::QuantileAverage(ref a) => {
                let u = a.cdf(x);
                if u <= 0.0 || u >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    -a.quantile_derivative(u).ln()
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Grid(g) => g.pdf(x),
            _ => self.ln_pdf(x).exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Self::StudentT { dof, loc, scale } => {
                let t = rand_distr::StudentT::new(dof).expect("validated dof").sample(rng);
                loc + scale * t
            }
            _ => {
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                self.quantile_unchecked(u)
            }
        }
    }

    /// Mean, when finite.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            Self::Normal { mean, .. } => Some(mean),
            Self::Laplace { loc, .. } | Self::Logistic { loc, .. } => Some(loc),
            Self::StudentT { dof, loc, .. } => (dof > 1.0).then_some(loc),
            Self::Exponential { rate } => Some(1.0 / rate),
            Self::Gumbel { loc, scale } => Some(loc + scale * EULER_GAMMA),
            Self::Grid(ref g) => Some(quadrature::unit_rule().integrate(|u| g.quantile(u))),
            Self::QuantileAverage(ref a) => {
                a.parts.iter().map(|(w, m)| m.mean().map(|v| w * v)).sum()
            }
        }
    }

    /// Variance, when finite.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            Self::Normal { sd, .. } => Some(sd * sd),
            Self::Laplace { scale, .. } => Some(2.0 * scale * scale),
            Self::StudentT { dof, scale, .. } => (dof > 2.0).then(|| scale * scale * dof / (dof - 2.0)),
            Self::Exponential { rate } => Some(1.0 / (rate * rate)),
            Self::Logistic { scale, .. } => Some(scale * scale * PI * PI / 3.0),
            Self::Gumbel { scale, .. } => Some(scale * scale * PI * PI / 6.0),
            Self::Grid(ref g) => {
                let rule = quadrature::unit_rule();
                let m = rule.integrate(|u| g.quantile(u));
                Some(rule.integrate(|u| (g.quantile(u) - m).powi(2)))
            }
            Self::QuantileAverage(ref a) => {
                if a.parts.iter().any(|(_, m)| m.variance().is_none()) {
                    return None;
                }
                let rule = if self.heavy_tailed() { quadrature::clipped_unit_rule() } else { quadrature::unit_rule() };
                let m = self.mean()?;
                Some(rule.integrate(|u| (a.quantile(u) - m).powi(2)))
            }
        }
    }

    /// Whether quantile integrals should be clipped to `[1e-5, 1 - 1e-5]`.
    pub fn heavy_tailed(&self) -> bool {
        match self {
            Self::StudentT { .. } => true,
            Self::QuantileAverage(a) => a.parts.iter().any(|(_, m)| m.heavy_tailed()),
            _ => false,
        }
    }

    /// Location-scale decomposition `Q(u) = loc + scale * Q_shape(u)`.
    pub fn location_scale(&self) -> Option<(Shape, f64, f64)> {
        match *self {
            Self::Normal { mean, sd } => Some((Shape::Normal, mean, sd)),
            Self::Laplace { loc, scale } => Some((Shape::Laplace, loc, scale)),
            Self::StudentT { dof, loc, scale } => Some((Shape::StudentT(dof), loc, scale)),
            Self::Exponential { rate } => Some((Shape::Exponential, 0.0, 1.0 / rate)),
            Self::Logistic { loc, scale } => Some((Shape::Logistic, loc, scale)),
            Self::Gumbel { loc, scale } => Some((Shape::Gumbel, loc, scale)),
            Self::Grid(_) | Self::QuantileAverage(_) => None,
        }
    }

    /// Inverse of [`location_scale`](Self::location_scale). Exponential
    /// models only accept a zero location.
    pub fn from_location_scale(shape: Shape, loc: f64, scale: f64) -> Option<Self> {
        if !(scale > 0.0) {
            return None;
        }
        Some(match shape {
            Shape::Normal => Self::Normal { mean: loc, sd: scale },
            Shape::Laplace => Self::Laplace { loc, scale },
            Shape::StudentT(dof) => Self::StudentT { dof, loc, scale },
            Shape::Exponential => {
                if loc.abs() > 1e-12 * scale {
                    return None;
                }
                Self::Exponential { rate: 1.0 / scale }
            }
            Shape::Logistic => Self::Logistic { loc, scale },
            Shape::Gumbel => Self::Gumbel { loc, scale },
        })
    }

    /// Tabulated quantile on the given levels.
    pub fn to_grid(&self, levels: &[f64]) -> GridQuantile {
        match self {
            Self::Grid(g) if g.knots() == levels => g.clone(),
            _ => GridQuantile::from_fn(levels.to_vec(), |u| self.quantile_unchecked(u))
                .expect("quantiles of a valid model are nondecreasing"),
        }
    }

    /// Knots to tabulate on when this model has to leave closed form.
    pub fn preferred_levels(&self) -> Vec<f64> {
        match self {
            Self::Grid(g) => g.knots().to_vec(),
            _ => default_levels(),
        }
    }
}
