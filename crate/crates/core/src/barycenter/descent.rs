use std::time::Instant;

use rand::RngCore;

use super::distribution::{FiniteModels, ModelDistribution};
use super::schedule::StepSchedule;
use super::tangent::risk;
use super::trace::{DescentTrace, TraceRow};
use super::update::{batch_sgd_step, gk_step};
use crate::error::{Error, Result};
use crate::measures::Model;
use crate::transport::w2sq;

/// Relative risk change below which deterministic descent stops.
pub const DEFAULT_TOL: f64 = 1e-4;

/// Evaluation pool size for risk estimates along stochastic descent.
pub const EVAL_POOL: usize = 64;

#[derive(Debug, Clone)]
pub struct DescentOptions {
    /// Fixed step in (0, 1].
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting model; the first support member when `None`.
    pub init: Option<Model>,
    /// Keep every `n`-th iterate in the trace.
    pub keep_iterates: Option<usize>,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { gamma: 1.0, tol: DEFAULT_TOL, max_iter: 100, init: None, keep_iterates: None }
    }
}

/// A computed barycenter with its descent trace.
#[derive(Debug, Clone)]
pub struct Barycenter {
    pub model: Model,
    pub trace: DescentTrace,
}

impl Barycenter {
    pub fn converged(&self) -> bool {
        self.trace.converged
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Deterministic descent `μ_{k+1} = G_{k,γ}(μ_k)` on a finite distribution,
/// stopped when `|F(μ_{k+1}) - F(μ_k)| / F(μ_k) < tol`. If `max_iter` is
/// reached, the iterate with the smallest risk is returned unconverged.
pub fn empirical_barycenter(pi: &FiniteModels, opts: &DescentOptions) -> Result<Barycenter> {
    if !(opts.gamma > 0.0 && opts.gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("step γ={} outside (0, 1]", opts.gamma)));
    }
    let start = Instant::now();
    let mut mu = opts.init.clone().unwrap_or_else(|| pi.support()[0].clone());
    let mut trace = DescentTrace::default();
    let mut previous: Option<f64> = None;
    let mut best: Option<(f64, Model)> = None;
    // risks below this are round-off
    let floor = mu.second_moment().map_or(f64::EPSILON, |m| f64::EPSILON * (1.0 + m));
    for iter in 0..=opts.max_iter {
        let r = risk(&mu, pi)?;
        trace.rows.push(TraceRow {
            iter,
            gamma: if iter == 0 { 0.0 } else { opts.gamma },
            f_est: r.f,
            gradnorm_est: r.grad_sq,
            wall_ms: elapsed_ms(start),
        });
        if let Some(every) = opts.keep_iterates {
            if iter % every.max(1) == 0 {
                trace.iterates.push((iter, mu.clone()));
            }
        }
        if best.as_ref().is_none_or(|(f, _)| r.f < *f) {
            best = Some((r.f, mu.clone()));
        }
        let done = r.f <= floor || previous.is_some_and(|p| (r.f - p).abs() <= opts.tol * p);
        if done {
            trace.converged = true;
            return Ok(Barycenter { model: mu, trace });
        }
        previous = Some(r.f);
        if iter < opts.max_iter {
            mu = gk_step(&mu, pi, opts.gamma)?;
        }
    }
    log::warn!("deterministic descent stopped after {} iterations without converging", opts.max_iter);
    let (_, model) = best.expect("at least one iterate");
    Ok(Barycenter { model, trace })
}

#[derive(Debug, Clone)]
pub struct SgdOptions {
    pub schedule: StepSchedule,
    /// Number of steps `T`.
    pub iterations: usize,
    /// Batch size `S`.
    pub batch: usize,
    /// Starting model; the first sampled model when `None`.
    pub init: Option<Model>,
    /// Record a trace row every `n` steps (0 disables risk estimates).
    pub trace_every: usize,
    pub eval_pool: usize,
    pub keep_iterates: Option<usize>,
}

impl Default for SgdOptions {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::default(),
            iterations: 200,
            batch: 1,
            init: None,
            trace_every: 1,
            eval_pool: EVAL_POOL,
            keep_iterates: None,
        }
    }
}

/// Batch stochastic gradient descent towards the population barycenter:
/// `T` steps of [`batch_sgd_step`] on fresh draws. Risk estimates use a
/// pool of `eval_pool` draws taken once before the first step.
pub fn population_barycenter(pi: &ModelDistribution, opts: &SgdOptions, rng: &mut dyn RngCore) -> Result<Barycenter> {
    opts.schedule.validate()?;
    if !opts.schedule.conditions().both() {
        log::warn!("step schedule does not satisfy Σγ_t = ∞ and Σγ_t² < ∞");
    }
    if opts.batch == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let start = Instant::now();
    let mut mu = match &opts.init {
        Some(m) => m.clone(),
        None => pi.draw(rng)?,
    };
    let pool = if opts.trace_every > 0 && opts.eval_pool > 0 {
        Some(FiniteModels::uniform(pi.draw_many(opts.eval_pool, rng)?)?)
    } else {
        None
    };
    let mut trace = DescentTrace::default();
    let record = |t: usize, gamma: f64, mu: &Model, trace: &mut DescentTrace| -> Result<()> {
        if let Some(pool) = &pool {
            if t % opts.trace_every == 0 || t == opts.iterations {
                let r = risk(mu, pool)?;
                trace.rows.push(TraceRow { iter: t, gamma, f_est: r.f, gradnorm_est: r.grad_sq, wall_ms: elapsed_ms(start) });
            }
        }
        if let Some(every) = opts.keep_iterates {
            if t % every.max(1) == 0 {
                trace.iterates.push((t, mu.clone()));
            }
        }
        Ok(())
    };
    record(0, 0.0, &mu, &mut trace)?;
    for t in 1..=opts.iterations {
        let gamma = opts.schedule.gamma(t);
        let batch = pi.draw_many(opts.batch, rng)?;
        mu = batch_sgd_step(&mu, &batch, gamma)?;
        record(t, gamma, &mu, &mut trace)?;
    }
    trace.converged = true;
    Ok(Barycenter { model: mu, trace })
}

/// Runs stochastic descent from two independent starts and returns the
/// `W₂` distance between the outputs, warning when it exceeds `tol`.
pub fn multistart_disagreement(
    pi: &ModelDistribution,
    opts: &SgdOptions,
    tol: f64,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let quiet = SgdOptions { trace_every: 0, init: None, ..opts.clone() };
    let a = population_barycenter(pi, &quiet, rng)?;
    let b = population_barycenter(pi, &quiet, rng)?;
    let d = w2sq(&a.model, &b.model)?.sqrt();
    if d > tol {
        log::warn!("two descent runs disagree by W2 = {d:.3e}; the barycenter may not be unique");
    }
    Ok(d)
}
