//! Optimal transport maps and Wasserstein distances within the closed-form
//! families, and exact discrete transport between sample clouds.

mod closed_form;
pub mod discrete;
mod map;

pub use closed_form::{
    ls_map_matrix, ot_map_copula, ot_map_ls, ot_map_spherical, ot_map_univariate, quantile_rule, w2_ls, w2sq_ls,
    w2sq, w2sq_spherical, wp_univariate, wpp_copula, wpp_univariate, SPHERICAL_W2_NODES,
};
pub use discrete::{discrete_ot, discrete_ot_with, subsample, CouplingPlan, DiscreteOtConfig, OtSolution, Solver};
pub use map::TransportMap;
