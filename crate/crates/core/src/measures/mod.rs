//! Distribution families with closed-form optimal transport: univariate
//! models, location-scatter and spherical families over a generator, and
//! copula models, plus weighted point clouds.

mod copula;
mod covariance;
mod discrete;
mod generator;
mod location_scatter;
mod model;
mod spherical;
mod univariate;

pub use copula::{Copula, CopulaModel};
pub use covariance::{experiment_covariance, kernel_grid, GRID_EXPONENT};
pub use discrete::DiscreteMeasure;
pub use generator::Generator;
pub use location_scatter::{make_ls_model, LocationScatterModel};
pub use model::Model;
pub use spherical::{RadialProfile, SphericalModel, FLAT_TOL};
pub use univariate::{
    chebyshev_levels, default_levels, GridQuantile, QuantileAverage, Shape, UnivariateModel, DEFAULT_GRID_LEVELS,
    MAX_AVERAGE_PARTS,
};
