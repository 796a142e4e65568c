use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::mcmc::{metropolis_sample, McmcConfig, PosteriorChain};
use super::prior::ParamPrior;
use crate::barycenter::{
    empirical_barycenter, fixed_point_residual, population_barycenter, DescentOptions, DescentTrace, FiniteModels,
    ModelDistribution, SgdOptions, StepSchedule,
};
use crate::error::{Error, Result};
use crate::measures::{Generator, Model};

/// Posterior models with the number of draws dropped for a non positive
/// definite scatter.
#[derive(Debug, Clone)]
pub struct PosteriorModels {
    pub models: FiniteModels,
    pub rejected: usize,
}

/// The empirical measure of the chain's models, with uniform weights.
pub fn posterior_models(chain: &PosteriorChain, generator: &Arc<Generator>) -> Result<PosteriorModels> {
    if chain.is_empty() {
        return Err(Error::Empty("posterior chain has no draws".into()));
    }
    let mut models = Vec::with_capacity(chain.len());
    let mut rejected = 0;
    for p in &chain.draws {
        match p.model(generator) {
            Ok(m) => models.push(Model::from(m)),
            Err(_) => rejected += 1,
        }
    }
    if rejected > 0 {
        log::warn!("{rejected} of {} posterior draws rejected: scatter not positive definite", chain.len());
    }
    if models.is_empty() {
        return Err(Error::Empty("every posterior draw was rejected".into()));
    }
    Ok(PosteriorModels { models: FiniteModels::uniform(models)?, rejected })
}

/// How the barycenter of the posterior draws is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BarycenterMethod {
    /// Deterministic descent on the `k` draws.
    Empirical { gamma: f64, tol: f64, max_iter: usize },
    /// Batch SGD drawing models uniformly from the `k` draws.
    Sgd { schedule: StepSchedule, iterations: usize, batch: usize },
}

impl Default for BarycenterMethod {
    fn default() -> Self {
        let d = DescentOptions::default();
        BarycenterMethod::Empirical { gamma: d.gamma, tol: d.tol, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Posterior draws `k`.
    pub draws: usize,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub method: BarycenterMethod,
    /// Monte Carlo size for the residual under SGD.
    #[serde(default = "default_residual_mc")]
    pub residual_mc: usize,
}

fn default_residual_mc() -> usize {
    1000
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { draws: 500, mcmc: McmcConfig::default(), method: BarycenterMethod::default(), residual_mc: 1000 }
    }
}

/// The Bayesian Wasserstein barycenter estimate with its diagnostics.
#[derive(Debug, Clone)]
pub struct BwbEstimate {
    pub model: Model,
    pub residual: f64,
    pub trace: DescentTrace,
    pub converged: bool,
    pub chain: PosteriorChain,
    pub rejected: usize,
}

/// Barycenter of already computed posterior models.
pub fn barycenter_of(
    models: &FiniteModels,
    method: &BarycenterMethod,
    residual_mc: usize,
    rng: &mut dyn RngCore,
) -> Result<(Model, DescentTrace, f64)> {
    let bary = match method {
        BarycenterMethod::Empirical { gamma, tol, max_iter } => empirical_barycenter(
            models,
            &DescentOptions { gamma: *gamma, tol: *tol, max_iter: *max_iter, ..Default::default() },
        )?,
        BarycenterMethod::Sgd { schedule, iterations, batch } => {
            let opts = SgdOptions {
                schedule: schedule.clone(),
                iterations: *iterations,
                batch: *batch,
                trace_every: 0,
                ..Default::default()
            };
            population_barycenter(&ModelDistribution::Finite(models.clone()), &opts, rng)?
        }
    };
    let pi = ModelDistribution::Finite(models.clone());
    let residual = fixed_point_residual(&bary.model, &pi, residual_mc, rng)?;
    Ok((bary.model, bary.trace, residual))
}

/// Samples the posterior, maps draws to models and computes their
/// barycenter.
pub fn bwb_estimator(
    prior: &ParamPrior,
    data: &Dataset,
    generator: &Arc<Generator>,
    cfg: &EstimatorConfig,
    rng: &mut dyn RngCore,
) -> Result<BwbEstimate> {
    let chain = metropolis_sample(prior, data, generator, cfg.draws, &cfg.mcmc, rng)?;
    let PosteriorModels { models, rejected } = posterior_models(&chain, generator)?;
    let (model, trace, residual) = barycenter_of(&models, &cfg.method, cfg.residual_mc, rng)?;
    let converged = trace.converged;
    if !converged {
        log::warn!("barycenter descent did not converge (residual {residual:.3e})");
    }
    Ok(BwbEstimate { model, residual, trace, converged, chain, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::UnivariateModel;
    use crate::transport::w2sq;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ls1(mean: f64) -> Model {
        let g = Arc::new(Generator::gaussian(1).unwrap());
        crate::measures::make_ls_model(g, DVector::from_element(1, mean), DMatrix::identity(1, 1)).unwrap().into()
    }

    #[test]
    fn point_mass_prior_returns_its_model() {
        let g = Arc::new(Generator::gaussian(1).unwrap());
        let prior = ParamPrior::known_scatter(vec![0.7], 0.0, DMatrix::identity(1, 1)).unwrap();
        let cfg = EstimatorConfig {
            draws: 5,
            mcmc: McmcConfig { proposal_scale: 0.0, ..Default::default() },
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let est = bwb_estimator(&prior, &Dataset::empty(1).unwrap(), &g, &cfg, &mut rng).unwrap();
        assert!(w2sq(&est.model, &ls1(0.7)).unwrap() < 1e-24);
        assert!(est.converged);
        assert!(est.residual < 1e-12);
    }

    #[test]
    fn conjugate_setting_recovers_posterior_mean() {
        let g = Arc::new(Generator::gaussian(1).unwrap());
        let prior = ParamPrior::known_scatter(vec![0.0], 1.0, DMatrix::identity(1, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth: Model = UnivariateModel::normal(1.0, 1.0).unwrap().into();
        let data = Dataset::sample(&truth, 200, &mut rng).unwrap();
        let n = 200.0;
        let post_mean = n * data.mean().unwrap()[0] / (n + 1.0);
        let cfg = EstimatorConfig { draws: 500, ..Default::default() };
        let est = bwb_estimator(&prior, &data, &g, &cfg, &mut rng).unwrap();
        let d = w2sq(&est.model, &ls1(post_mean)).unwrap().sqrt();
        assert!(d < 0.05, "{d}");
        assert!(est.residual < 5e-3);
        assert_eq!(est.chain.len(), 500);
    }

    #[test]
    fn sgd_mode() {
        let g = Arc::new(Generator::gaussian(1).unwrap());
        let prior = ParamPrior::known_scatter(vec![0.0], 1.0, DMatrix::identity(1, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let truth: Model = UnivariateModel::normal(-1.0, 1.0).unwrap().into();
        let data = Dataset::sample(&truth, 100, &mut rng).unwrap();
        let cfg = EstimatorConfig {
            draws: 300,
            method: BarycenterMethod::Sgd { schedule: StepSchedule::default(), iterations: 300, batch: 5 },
            ..Default::default()
        };
        let est = bwb_estimator(&prior, &data, &g, &cfg, &mut rng).unwrap();
        let mean = est.model.mean().unwrap()[0];
        let chain_mean = est.chain.draws.iter().map(|p| p.location[0]).sum::<f64>() / 300.0;
        assert!((mean - chain_mean).abs() < 0.05, "{mean} vs {chain_mean}");
    }

    #[test]
    fn rejected_draws_are_counted() {
        let g = Arc::new(Generator::gaussian(2).unwrap());
        let prior = ParamPrior::experiment(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut chain = metropolis_sample(
            &prior,
            &Dataset::empty(2).unwrap(),
            &g,
            3,
            &McmcConfig { burn_in: 10, ..Default::default() },
            &mut rng,
        )
        .unwrap();
        chain.draws[1].scatter = crate::bayes::ScatterParams::Fixed(Arc::new(-DMatrix::identity(2, 2)));
        let pm = posterior_models(&chain, &g).unwrap();
        assert_eq!((pm.models.len(), pm.rejected), (2, 1));
    }
}
