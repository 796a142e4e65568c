//! Wasserstein barycenters of distributions over models: the averaged
//! pushforward update, deterministic descent for finite distributions, and
//! batch stochastic gradient descent for sampled ones.

mod descent;
mod distribution;
mod schedule;
mod tangent;
mod trace;
mod update;

pub use descent::{
    empirical_barycenter, multistart_disagreement, population_barycenter, Barycenter, DescentOptions,
    SgdOptions, DEFAULT_TOL, EVAL_POOL,
};
pub use distribution::{FiniteModels, ModelDistribution, ModelSampler};
pub use schedule::{ScheduleConditions, StepSchedule};
pub use tangent::{
    fixed_point_residual, quantiles_on_rule, risk, tangent_vectors, variance_of_gradient_estimator, Risk,
    MIN_VARIANCE_REPS, SPHERICAL_NODES,
};
pub use trace::{DescentTrace, TraceRow};
pub use update::{averaged_pushforward, batch_sgd_step, gk_step, sgd_step};
