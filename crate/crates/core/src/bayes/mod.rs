//! Priors over location-scatter parameters, likelihoods, a random-walk
//! Metropolis posterior sampler, model averages, and the barycenter
//! estimator assembled from them.

mod averages;
mod data;
mod estimator;
mod likelihood;
mod mcmc;
mod prior;

pub use averages::{exponential_model_average, model_average, square_model_average, DensityTable, MixtureModel};
pub use data::Dataset;
pub use estimator::{
    barycenter_of, bwb_estimator, posterior_models, BarycenterMethod, BwbEstimate, EstimatorConfig, PosteriorModels,
};
pub use likelihood::{log_likelihood, log_posterior, non_finite_count};
pub use mcmc::{
    acceptance_probability, batch_means_se, metropolis_accept, metropolis_sample, random_walk_metropolis, McmcConfig,
    PosteriorChain, RawChain, ACCEPTANCE_WARN_RANGE,
};
pub use prior::{
    LocationPrior, ParamPrior, Params, ScatterParams, ScatterPrior, DEFAULT_EPS_RATE, DEFAULT_INV_OMEGA_RATE,
    DEFAULT_SIGMA_RATE,
};
