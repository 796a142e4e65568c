use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{experiment_covariance, make_ls_model, Generator, LocationScatterModel};

/// Rates of the independent exponential priors on the kernel parameters.
pub const DEFAULT_EPS_RATE: f64 = 20.0;
pub const DEFAULT_SIGMA_RATE: f64 = 1.0;
pub const DEFAULT_INV_OMEGA_RATE: f64 = 15.0;

/// Scatter part of a parameter point.
#[derive(Debug, Clone, PartialEq)]
pub enum ScatterParams {
    /// `Σ_{ε,σ,ω}` from [`experiment_covariance`].
    Kernel { eps: f64, sigma: f64, omega: f64 },
    Fixed(Arc<DMatrix<f64>>),
}

/// A parameter point `θ = (b, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub location: DVector<f64>,
    pub scatter: ScatterParams,
}

impl Params {
    pub fn dim(&self) -> usize {
        self.location.len()
    }

    pub fn sigma(&self) -> Result<DMatrix<f64>> {
        match &self.scatter {
            ScatterParams::Kernel { eps, sigma, omega } => experiment_covariance(self.dim(), *eps, *sigma, *omega),
            ScatterParams::Fixed(s) => Ok((**s).clone()),
        }
    }

    pub fn model(&self, generator: &Arc<Generator>) -> Result<LocationScatterModel> {
        make_ls_model(generator.clone(), self.location.clone(), self.sigma()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationPrior {
    /// Prior mean of `b`; zero when absent.
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
    /// Common standard deviation; `0` fixes `b` at its mean.
    pub sd: f64,
}

impl Default for LocationPrior {
    fn default() -> Self {
        Self { mean: None, sd: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScatterPrior {
    /// `ε ~ Exp(eps_rate)`, `σ ~ Exp(sigma_rate)`, `ω⁻¹ ~ Exp(inv_omega_rate)`.
    Kernel { eps_rate: f64, sigma_rate: f64, inv_omega_rate: f64 },
    /// Known `Σ`, row-major.
    Fixed { sigma: Vec<Vec<f64>> },
}

impl Default for ScatterPrior {
    fn default() -> Self {
        ScatterPrior::Kernel {
            eps_rate: DEFAULT_EPS_RATE,
            sigma_rate: DEFAULT_SIGMA_RATE,
            inv_omega_rate: DEFAULT_INV_OMEGA_RATE,
        }
    }
}

/// Independent priors on the location and scatter parameters of a
/// location-scatter model.
///
/// Positive kernel parameters are handled in log coordinates
/// `(log ε, log σ, log ω⁻¹)`; the unconstrained vector is the free
/// coordinates of `b` followed by those three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior")]
pub struct ParamPrior {
    pub dim: usize,
    #[serde(default)]
    pub location: LocationPrior,
    #[serde(default)]
    pub scatter: ScatterPrior,
    #[serde(skip)]
    fixed_sigma: Option<Arc<DMatrix<f64>>>,
}

#[derive(Deserialize)]
struct RawPrior {
    dim: usize,
    #[serde(default)]
    location: LocationPrior,
    #[serde(default)]
    scatter: ScatterPrior,
}

impl TryFrom<RawPrior> for ParamPrior {
    type Error = Error;

    fn try_from(raw: RawPrior) -> Result<Self> {
        Self::new(raw.dim, raw.location, raw.scatter)
    }
}

fn exp_ln_pdf(rate: f64, x: f64) -> f64 {
    if x < 0.0 {
        f64::NEG_INFINITY
    } else {
        rate.ln() - rate * x
    }
}

impl ParamPrior {
    pub fn new(dim: usize, location: LocationPrior, scatter: ScatterPrior) -> Result<Self> {
        let mut p = Self { dim, location, scatter, fixed_sigma: None };
        p.prepare()?;
        Ok(p)
    }

    /// `N(b | 0, I) Exp(ε | 20) Exp(σ | 1) Exp(ω⁻¹ | 15)`.
    pub fn experiment(dim: usize) -> Self {
        Self::new(dim, LocationPrior::default(), ScatterPrior::default()).expect("valid default prior")
    }

    /// `b ~ N(mean, sd² I)` with known `Σ`.
    pub fn known_scatter(mean: Vec<f64>, sd: f64, sigma: DMatrix<f64>) -> Result<Self> {
        let q = mean.len();
        let rows = (0..sigma.nrows()).map(|i| sigma.row(i).iter().copied().collect()).collect();
        Self::new(q, LocationPrior { mean: Some(mean), sd }, ScatterPrior::Fixed { sigma: rows })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn prepare(&mut self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("prior dimension must be positive".into()));
        }
        if let Some(m) = &self.location.mean {
            if m.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: m.len() });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite prior mean".into()));
            }
        }
        if !(self.location.sd >= 0.0 && self.location.sd.is_finite()) {
            return Err(Error::InvalidArgument(format!("location prior sd {} must be ≥ 0", self.location.sd)));
        }
        match &self.scatter {
            ScatterPrior::Kernel { eps_rate, sigma_rate, inv_omega_rate } => {
                for (name, r) in [("ε", eps_rate), ("σ", sigma_rate), ("ω⁻¹", inv_omega_rate)] {
                    if !(*r > 0.0 && r.is_finite()) {
                        return Err(Error::InvalidArgument(format!("rate for {name} must be positive, got {r}")));
                    }
                }
                self.fixed_sigma = None;
            }
            ScatterPrior::Fixed { sigma } => {
                let q = self.dim;
                if sigma.len() != q || sigma.iter().any(|r| r.len() != q) {
                    return Err(Error::DimensionMismatch { expected: q, got: sigma.len() });
                }
                let m = DMatrix::from_fn(q, q, |i, j| sigma[i][j]);
                linalg::check_spd(&m)?;
                self.fixed_sigma = Some(Arc::new(m));
            }
        }
        Ok(())
    }

    pub fn location_mean(&self) -> DVector<f64> {
        match &self.location.mean {
            Some(m) => DVector::from_column_slice(m),
            None => DVector::zeros(self.dim),
        }
    }

    fn free_location(&self) -> bool {
        self.location.sd > 0.0
    }

    fn rates(&self) -> Option<[f64; 3]> {
        match self.scatter {
            ScatterPrior::Kernel { eps_rate, sigma_rate, inv_omega_rate } => Some([eps_rate, sigma_rate, inv_omega_rate]),
            ScatterPrior::Fixed { .. } => None,
        }
    }

    /// Length of the unconstrained parameter vector.
    pub fn free_dim(&self) -> usize {
        (if self.free_location() { self.dim } else { 0 }) + if self.rates().is_some() { 3 } else { 0 }
    }

    fn fixed(&self) -> Result<Arc<DMatrix<f64>>> {
        self.fixed_sigma
            .clone()
            .ok_or_else(|| Error::InvalidArgument("prior was not validated; use ParamPrior::new or from_json".into()))
    }

    pub fn from_unconstrained(&self, z: &[f64]) -> Result<Params> {
        if z.len() != self.free_dim() {
            return Err(Error::DimensionMismatch { expected: self.free_dim(), got: z.len() });
        }
        let (location, rest) = if self.free_location() {
            (DVector::from_column_slice(&z[..self.dim]), &z[self.dim..])
        } else {
            (self.location_mean(), z)
        };
        let scatter = match self.rates() {
            Some(_) => ScatterParams::Kernel { eps: rest[0].exp(), sigma: rest[1].exp(), omega: (-rest[2]).exp() },
            None => ScatterParams::Fixed(self.fixed()?),
        };
        Ok(Params { location, scatter })
    }

    pub fn to_unconstrained(&self, p: &Params) -> Result<Vec<f64>> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: p.dim() });
        }
        let mut z = Vec::with_capacity(self.free_dim());
        if self.free_location() {
            z.extend(p.location.iter());
        }
        if self.rates().is_some() {
            match p.scatter {
                ScatterParams::Kernel { eps, sigma, omega } => z.extend([eps.ln(), sigma.ln(), -omega.ln()]),
                ScatterParams::Fixed(_) => {
                    return Err(Error::InvalidArgument("kernel prior needs kernel parameters".into()))
                }
            }
        }
        Ok(z)
    }

    fn location_ln_pdf(&self, b: &DVector<f64>) -> f64 {
        let sd = self.location.sd;
        let mean = self.location_mean();
        if sd == 0.0 {
            return if b == &mean { 0.0 } else { f64::NEG_INFINITY };
        }
        let c = -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln();
        b.iter().zip(mean.iter()).map(|(x, m)| c - 0.5 * ((x - m) / sd).powi(2)).sum()
    }

    /// Log prior density in the coordinates `(b, ε, σ, ω⁻¹)`.
    pub fn log_density(&self, p: &Params) -> f64 {
        let mut lp = self.location_ln_pdf(&p.location);
        if let (Some([re, rs, ru]), ScatterParams::Kernel { eps, sigma, omega }) = (self.rates(), &p.scatter) {
            if !(*eps > 0.0 && *sigma > 0.0 && *omega > 0.0) {
                return f64::NEG_INFINITY;
            }
            lp += exp_ln_pdf(re, *eps) + exp_ln_pdf(rs, *sigma) + exp_ln_pdf(ru, 1.0 / omega);
        }
        lp
    }

    /// Log prior density of the unconstrained vector, including the
    /// Jacobian of the log transform.
    pub fn log_density_unconstrained(&self, z: &[f64]) -> f64 {
        let Ok(p) = self.from_unconstrained(z) else {
            return f64::NEG_INFINITY;
        };
        let jac = if self.rates().is_some() { z[z.len() - 3..].iter().sum() } else { 0.0 };
        self.log_density(&p) + jac
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Params> {
        let mean = self.location_mean();
        let location = DVector::from_fn(self.dim, |i, _| {
            let z: f64 = StandardNormal.sample(rng);
            mean[i] + self.location.sd * z
        });
        let scatter = match self.rates() {
            Some([re, rs, ru]) => {
                let draw = |rate: f64, rng: &mut R| Exp::new(rate).expect("positive rate").sample(rng);
                let eps = draw(re, rng);
                let sigma = draw(rs, rng);
                let u = draw(ru, rng);
                ScatterParams::Kernel { eps, sigma, omega: 1.0 / u }
            }
            None => ScatterParams::Fixed(self.fixed()?),
        };
        Ok(Params { location, scatter })
    }

    /// Prior quantiles of `(ε, σ, ω⁻¹)` at level `u`.
    pub(crate) fn kernel_quantiles(&self, u: [f64; 3]) -> Option<[f64; 3]> {
        let r = self.rates()?;
        Some([0, 1, 2].map(|i| -(1.0 - u[i]).ln() / r[i]))
    }
}
