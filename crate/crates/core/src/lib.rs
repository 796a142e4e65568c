//! Bayesian Wasserstein barycenters.
//!
//! Given a posterior distribution over probability models, this crate
//! computes its 2-Wasserstein barycenter: the model minimising the expected
//! squared Wasserstein distance to a posterior draw. The pieces are
//!
//! - [`measures`]: model families whose optimal transport maps are known in
//!   closed form (univariate, common copula, spherically equivalent,
//!   location-scatter);
//! - [`transport`]: those maps, Wasserstein distances, and an exact discrete
//!   solver for sample clouds;
//! - [`barycenter`]: deterministic fixed-point descent for finitely supported
//!   posteriors and (batch) stochastic gradient descent for sampled ones;
//! - [`bayes`]: priors, likelihoods, a Metropolis sampler, vertical model
//!   averages, and the assembled estimator.

pub mod barycenter;
pub mod bayes;
pub mod error;
pub mod linalg;
pub mod measures;
pub mod quadrature;
pub mod transport;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, Generator, LocationScatterModel, Model, UnivariateModel};
