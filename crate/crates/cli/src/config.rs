use std::path::Path;
use std::sync::Arc;

use bwb_core::bayes::{McmcConfig, ParamPrior};
use bwb_core::barycenter::StepSchedule;
use bwb_core::measures::{experiment_covariance, make_ls_model, Generator, LocationScatterModel};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Reduced grids for a single machine.
    Desk,
    /// Full sample-size and draw grids.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Normal, Laplace and Student-t(3) blocks.
    Mixed,
    Gaussian,
}

/// Parameters of the data-generating model. The location defaults to
/// `b_i = i - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrueModel {
    pub location: Option<Vec<f64>>,
    pub eps: f64,
    pub sigma: f64,
    pub omega: f64,
}

impl Default for TrueModel {
    fn default() -> Self {
        Self { location: None, eps: 0.01, sigma: 1.0, omega: 5.652 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentConfig {
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self { gamma: 1.0, tol: 1e-4, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub schedule: StepSchedule,
    pub iterations: usize,
    /// Trajectory summaries use `t ≥ summary_from`.
    pub summary_from: usize,
    /// Posterior draws the batches are sampled from.
    pub pool: usize,
    /// Replications for the gradient-variance estimate.
    pub variance_reps: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { schedule: StepSchedule::default(), iterations: 200, summary_from: 100, pool: 1000, variance_reps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BmaConfig {
    /// Sample size `n` of the comparison; the largest `n` of the grid when
    /// absent.
    pub n: Option<usize>,
    /// Points drawn from each model.
    pub samples: usize,
    /// Clouds are subsampled to this size before exact transport.
    pub ot_cap: usize,
}

impl Default for BmaConfig {
    fn default() -> Self {
        Self { n: None, samples: 1000, ot_cap: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub q: usize,
    pub generator: GeneratorKind,
    pub truth: TrueModel,
    /// Prior over model parameters; the experiment prior when absent.
    pub prior: Option<ParamPrior>,
    pub n_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub s_grid: Vec<usize>,
    pub replications: usize,
    /// Draw a new dataset for every replication. By default replications
    /// share one dataset and differ only in their posterior chains.
    pub fresh_data: bool,
    pub seed: u64,
    pub mcmc: McmcConfig,
    pub descent: DescentConfig,
    pub sgd: SgdConfig,
    pub bma: BmaConfig,
    /// Monte Carlo size for the residual under SGD.
    pub residual_mc: usize,
    /// When false, `wall_ms` is written as 0 so reports are byte-identical
    /// across runs.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    pub fn desk() -> Self {
        Self {
            q: 15,
            generator: GeneratorKind::Mixed,
            truth: TrueModel::default(),
            prior: None,
            n_grid: vec![10, 50, 200, 1000],
            k_grid: vec![10, 100, 500],
            s_grid: vec![1, 2, 5, 10, 15, 20],
            replications: 10,
            fresh_data: false,
            seed: 0,
            mcmc: McmcConfig::default(),
            descent: DescentConfig::default(),
            sgd: SgdConfig::default(),
            bma: BmaConfig::default(),
            residual_mc: 1000,
            record_timing: true,
        }
    }

    pub fn full() -> Self {
        Self {
            n_grid: vec![10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000],
            k_grid: vec![1, 5, 10, 20, 50, 100, 200, 500, 1000],
            s_grid: vec![1, 15],
            bma: BmaConfig { n: Some(1000), ..Default::default() },
            ..Self::desk()
        }
    }

    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::desk(),
            Scale::Full => Self::full(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.q == 0 {
            return bad("q must be positive".into());
        }
        for (name, grid) in [("n_grid", &self.n_grid), ("k_grid", &self.k_grid), ("s_grid", &self.s_grid)] {
            if grid.is_empty() || grid.contains(&0) {
                return bad(format!("{name} must be non-empty with positive entries"));
            }
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if let Some(loc) = &self.truth.location {
            if loc.len() != self.q {
                return bad(format!("truth.location has {} entries, expected {}", loc.len(), self.q));
            }
        }
        if let Some(p) = &self.prior {
            if p.dim != self.q {
                return bad(format!("prior dimension {} differs from q = {}", p.dim, self.q));
            }
        }
        if self.sgd.iterations == 0 || self.sgd.summary_from > self.sgd.iterations {
            return bad("sgd.summary_from must not exceed sgd.iterations > 0".into());
        }
        if self.sgd.pool == 0 || self.bma.samples < 2 || self.bma.ot_cap < 2 {
            return bad("sgd.pool, bma.samples and bma.ot_cap must be positive".into());
        }
        self.mcmc.validate()?;
        self.sgd.schedule.validate()?;
        self.true_model()?;
        Ok(())
    }

    pub fn generator(&self) -> Result<Arc<Generator>> {
        Ok(Arc::new(match self.generator {
            GeneratorKind::Mixed => Generator::mixed(self.q)?,
            GeneratorKind::Gaussian => Generator::gaussian(self.q)?,
        }))
    }

    pub fn true_model(&self) -> Result<LocationScatterModel> {
        let b = match &self.truth.location {
            Some(v) => DVector::from_column_slice(v),
            None => DVector::from_fn(self.q, |i, _| i as f64),
        };
        let sigma = experiment_covariance(self.q, self.truth.eps, self.truth.sigma, self.truth.omega)?;
        Ok(make_ls_model(self.generator()?, b, sigma)?)
    }

    pub fn prior(&self) -> ParamPrior {
        self.prior.clone().unwrap_or_else(|| ParamPrior::experiment(self.q))
    }

    pub fn n_max(&self) -> usize {
        self.n_grid.iter().copied().max().unwrap_or(0)
    }

    pub fn k_max(&self) -> usize {
        self.k_grid.iter().copied().max().unwrap_or(0)
    }

    pub fn bma_n(&self) -> usize {
        self.bma.n.unwrap_or_else(|| self.n_max())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::desk();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 16);
        ExperimentConfig::full().validate().unwrap();
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"q": 3, "n_grid": [5], "seed": 9}"#).unwrap();
        assert_eq!(cfg.k_grid, vec![10, 100, 500]);
        assert_eq!(cfg.seed, 9);
        assert_ne!(cfg.hash(), ExperimentConfig::desk().hash());
    }

    #[test]
    fn invalid_configs() {
        assert!(ExperimentConfig::from_json(r#"{"replications": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"k_grid": [0, 10]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"q": 2, "truth": {"location": [1.0], "eps": 0.1, "sigma": 1, "omega": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"truth": {"eps": -1, "sigma": 1, "omega": 1}}"#).is_err());
    }

    #[test]
    fn true_model_location() {
        let m = ExperimentConfig::desk().true_model().unwrap();
        assert_eq!(m.location()[14], 14.0);
        assert!((m.sigma()[(0, 0)] - 1.01).abs() < 1e-15);
    }
}
