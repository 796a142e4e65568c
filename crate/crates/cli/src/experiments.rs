use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use bwb_core::barycenter::{
    empirical_barycenter, fixed_point_residual, population_barycenter, variance_of_gradient_estimator, DescentOptions,
    FiniteModels, ModelDistribution, SgdOptions,
};
use bwb_core::bayes::{metropolis_sample, model_average, posterior_models, Dataset, ParamPrior};
use bwb_core::measures::{Generator, LocationScatterModel, Model};
use bwb_core::transport::{discrete_ot, subsample, w2sq_ls};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{ExperimentReport, Method, Metric, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Experiment {
    Consistency,
    Barycenter,
    CompareBma,
    Sgd,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Self::Consistency, Self::Barycenter, Self::CompareBma, Self::Sgd];

    pub fn name(self) -> &'static str {
        match self {
            Self::Consistency => "consistency",
            Self::Barycenter => "barycenter",
            Self::CompareBma => "compare-bma",
            Self::Sgd => "sgd",
        }
    }
}

struct ChainModels {
    models: Vec<Model>,
    /// `W₂²(m_i, m₀)` per draw.
    to_truth: Vec<f64>,
}

#[derive(Clone)]
struct BaryCell {
    model: Model,
    converged: bool,
    residual: f64,
    w2sq: f64,
}

/// Data, posterior chains and empirical barycenters shared between
/// experiments run on one configuration.
pub struct Context {
    cfg: ExperimentConfig,
    hash: String,
    generator: Arc<Generator>,
    truth: LocationScatterModel,
    prior: ParamPrior,
    chain_draws: usize,
    datasets: Vec<Dataset>,
    chains: Mutex<BTreeMap<(usize, usize), Option<Arc<ChainModels>>>>,
    barycenters: Mutex<BTreeMap<(usize, usize, usize), Option<BaryCell>>>,
}

fn stream_id(tag: &str, parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

impl Context {
    /// Prepares the data; chains are sampled on demand with enough draws
    /// for `experiments`. Smaller sample sizes use prefixes of one dataset.
    pub fn new(cfg: &ExperimentConfig, experiments: &[Experiment]) -> Result<Self> {
        cfg.validate()?;
        let generator = cfg.generator()?;
        let truth = cfg.true_model()?;
        let mut chain_draws = cfg.k_max();
        if experiments.contains(&Experiment::Sgd) {
            chain_draws = chain_draws.max(cfg.sgd.pool);
        }
        let n_data = if experiments.contains(&Experiment::CompareBma) { cfg.n_max().max(cfg.bma_n()) } else { cfg.n_max() };
        let truth_model = Model::from(truth.clone());
        let n_sets = if cfg.fresh_data { cfg.replications } else { 1 };
        let datasets = (0..n_sets)
            .map(|rep| {
                let mut rng = Self::rng_for(cfg.seed, "data", &[rep as u64]);
                Dataset::sample(&truth_model, n_data, &mut rng)
            })
            .collect::<bwb_core::Result<Vec<_>>>()?;
        Ok(Self {
            hash: cfg.hash(),
            prior: cfg.prior(),
            cfg: cfg.clone(),
            generator,
            truth,
            chain_draws,
            datasets,
            chains: Mutex::new(BTreeMap::new()),
            barycenters: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    fn rng_for(seed: u64, tag: &str, parts: &[u64]) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream_id(tag, parts));
        r
    }

    fn rng(&self, tag: &str, parts: &[u64]) -> ChaCha8Rng {
        Self::rng_for(self.cfg.seed, tag, parts)
    }

    fn record(&self, experiment: Experiment, n: usize, rep: usize, metric: Metric, method: Method, value: f64) -> Record {
        Record {
            experiment: experiment.name().into(),
            n,
            k: None,
            s: None,
            t: None,
            replication: rep,
            metric,
            method,
            value,
            wall_ms: 0.0,
            seed: self.cfg.seed,
            config_hash: self.hash.clone(),
        }
    }

    fn elapsed(&self, start: Instant) -> f64 {
        if self.cfg.record_timing {
            (start.elapsed().as_secs_f64() * 1e3 * 1000.0).round() / 1000.0
        } else {
            0.0
        }
    }

    fn sample_chain(&self, n: usize, rep: usize) -> Result<ChainModels> {
        let data = self.datasets[rep % self.datasets.len()].prefix(n)?;
        let mut rng = self.rng("chain", &[n as u64, rep as u64]);
        let chain = metropolis_sample(&self.prior, &data, &self.generator, self.chain_draws, &self.cfg.mcmc, &mut rng)?;
        let pm = posterior_models(&chain, &self.generator)?;
        let models = pm.models.support().to_vec();
        let to_truth = models
            .iter()
            .map(|m| w2sq_ls(m.as_location_scatter().expect("location-scatter draw"), &self.truth))
            .collect::<bwb_core::Result<Vec<_>>>()?;
        Ok(ChainModels { models, to_truth })
    }

    /// Samples every missing chain for `cells`, in parallel.
    fn ensure_chains(&self, cells: &[(usize, usize)]) {
        let missing: Vec<(usize, usize)> = {
            let cache = self.chains.lock().expect("chain cache");
            let mut m: Vec<_> = cells.iter().copied().filter(|c| !cache.contains_key(c)).collect();
            m.sort_unstable();
            m.dedup();
            m
        };
        let fresh: Vec<((usize, usize), Option<Arc<ChainModels>>)> = missing
            .par_iter()
            .map(|&(n, rep)| {
                let c = match self.sample_chain(n, rep) {
                    Ok(c) => Some(Arc::new(c)),
                    Err(e) => {
                        log::warn!("posterior sampling failed for n={n}, replication {rep}: {e}");
                        None
                    }
                };
                ((n, rep), c)
            })
            .collect();
        self.chains.lock().expect("chain cache").extend(fresh);
    }

    fn chain(&self, n: usize, rep: usize) -> Option<Arc<ChainModels>> {
        self.ensure_chains(&[(n, rep)]);
        self.chains.lock().expect("chain cache").get(&(n, rep)).cloned().flatten()
    }

    fn barycenter(&self, n: usize, k: usize, rep: usize) -> Option<BaryCell> {
        if let Some(c) = self.barycenters.lock().expect("barycenter cache").get(&(n, k, rep)) {
            return c.clone();
        }
        let cell = self.chain(n, rep).and_then(|chain| {
            let run = || -> Result<BaryCell> {
                let k = k.min(chain.models.len());
                let pi = FiniteModels::uniform(chain.models[..k].to_vec())?;
                let d = &self.cfg.descent;
                let opts = DescentOptions { gamma: d.gamma, tol: d.tol, max_iter: d.max_iter, ..Default::default() };
                let bary = empirical_barycenter(&pi, &opts)?;
                let mut rng = self.rng("residual", &[n as u64, k as u64, rep as u64]);
                let residual = fixed_point_residual(&bary.model, &ModelDistribution::Finite(pi), 0, &mut rng)?;
                let w2sq = w2sq_ls(bary.model.as_location_scatter().expect("location-scatter"), &self.truth)?;
                Ok(BaryCell { converged: bary.converged(), model: bary.model, residual, w2sq })
            };
            run().map_err(|e| log::warn!("barycenter failed for n={n}, k={k}, replication {rep}: {e}")).ok()
        });
        self.barycenters.lock().expect("barycenter cache").insert((n, k, rep), cell.clone());
        cell
    }

    fn reps(&self) -> std::ops::Range<usize> {
        0..self.cfg.replications
    }

    /// Posterior consistency: `W₂²(Π_n^{(k)}, δ_{m₀}) = (1/k) Σ_i W₂²(m_i, m₀)`.
    pub fn run_posterior_consistency(&self) -> Result<ExperimentReport> {
        let exp = Experiment::Consistency;
        let cells: Vec<(usize, usize)> =
            self.cfg.n_grid.iter().flat_map(|&n| self.reps().map(move |r| (n, r))).collect();
        self.ensure_chains(&cells);
        let mut report = ExperimentReport::new(exp.name(), 0);
        for &n in &self.cfg.n_grid {
            for &k in &self.cfg.k_grid {
                for rep in self.reps() {
                    let start = Instant::now();
                    let Some(chain) = self.chain(n, rep) else { continue };
                    let k_eff = k.min(chain.to_truth.len());
                    let v = chain.to_truth[..k_eff].iter().sum::<f64>() / k_eff as f64;
                    let mut r = self.record(exp, n, rep, Metric::W2sqPostToTruth, Method::ClosedForm, v);
                    r.k = Some(k);
                    r.wall_ms = self.elapsed(start);
                    report.records.push(r);
                }
            }
        }
        Ok(report)
    }

    fn barycenter_cells(&self, ns: &[usize], ks: &[usize]) -> Vec<((usize, usize, usize), Option<BaryCell>, f64)> {
        let cells: Vec<(usize, usize)> = ns.iter().flat_map(|&n| self.reps().map(move |r| (n, r))).collect();
        self.ensure_chains(&cells);
        let grid: Vec<(usize, usize, usize)> =
            ns.iter().flat_map(|&n| ks.iter().flat_map(move |&k| self.reps().map(move |r| (n, k, r)))).collect();
        grid.par_iter()
            .map(|&(n, k, rep)| {
                let start = Instant::now();
                let c = self.barycenter(n, k, rep);
                ((n, k, rep), c, self.elapsed(start))
            })
            .collect()
    }

    /// Empirical barycenters by deterministic descent: `W₂²(m̂, m₀)` and the
    /// fixed-point residual per cell.
    pub fn run_barycenter_vs_truth(&self) -> Result<ExperimentReport> {
        let exp = Experiment::Barycenter;
        let mut report = ExperimentReport::new(exp.name(), 0);
        for ((n, k, rep), cell, ms) in self.barycenter_cells(&self.cfg.n_grid, &self.cfg.k_grid) {
            let Some(c) = cell else { continue };
            if !c.converged {
                report.flagged += 1;
            }
            for (metric, v) in [(Metric::W2sqBaryToTruth, c.w2sq), (Metric::Residual, c.residual)] {
                let mut r = self.record(exp, n, rep, metric, Method::Descent, v);
                r.k = Some(k);
                r.wall_ms = ms;
                report.records.push(r);
            }
        }
        Ok(report)
    }

    /// Barycenter against model average at one sample size: closed-form
    /// `W₂²(m̂, m₀)`, and exact transport between sample clouds for both
    /// estimators using one shared sample of `m₀`.
    pub fn run_bary_vs_bma(&self) -> Result<ExperimentReport> {
        let exp = Experiment::CompareBma;
        let n = self.cfg.bma_n();
        let b = &self.cfg.bma;
        if b.samples > b.ot_cap {
            log::warn!("sample clouds of {} points are subsampled to {} for exact transport", b.samples, b.ot_cap);
        }
        let truth = Model::from(self.truth.clone());
        let cells = self.barycenter_cells(&[n], &self.cfg.k_grid);
        let rows: Vec<Result<Vec<Record>>> = cells
            .into_par_iter()
            .map(|((n, k, rep), cell, ms)| {
                let Some(c) = cell else { return Ok(vec![]) };
                let start = Instant::now();
                let chain = self.chain(n, rep).expect("chain cached with barycenter");
                let k_eff = k.min(chain.models.len());
                let bma = model_average(&FiniteModels::uniform(chain.models[..k_eff].to_vec())?);
                let mut rng = self.rng("bma", &[n as u64, k as u64, rep as u64]);
                let truth_cloud = subsample(&truth.sample(b.samples, &mut rng)?, b.ot_cap, &mut rng)?;
                let bma_cloud = subsample(&bma.sample(b.samples, &mut rng)?, b.ot_cap, &mut rng)?;
                let bary_cloud = subsample(&c.model.sample(b.samples, &mut rng)?, b.ot_cap, &mut rng)?;
                let bma_w2 = discrete_ot(&bma_cloud, &truth_cloud, 2.0)?.cost;
                let bary_w2 = discrete_ot(&bary_cloud, &truth_cloud, 2.0)?.cost;
                let sampled_ms = self.elapsed(start);
                let mut out = Vec::with_capacity(3);
                for (metric, method, v, t) in [
                    (Metric::W2sqBaryToTruth, Method::Descent, c.w2sq, ms),
                    (Metric::W2sqBaryToTruth, Method::Sampled, bary_w2, sampled_ms),
                    (Metric::W2sqBmaToTruth, Method::Sampled, bma_w2, sampled_ms),
                ] {
                    let mut r = self.record(exp, n, rep, metric, method, v);
                    r.k = Some(k);
                    r.wall_ms = t;
                    out.push(r);
                }
                Ok(out)
            })
            .collect();
        let mut report = ExperimentReport::new(exp.name(), 0);
        for r in rows {
            report.records.extend(r?);
        }
        Ok(report)
    }

    /// Batch SGD with `γ_t` from the schedule on the pooled posterior
    /// draws: `W₂²(μ_t, m₀)` trajectories, final residual, and the
    /// gradient-estimator variance (first replication). Empirical
    /// barycenters with `k ≥ summary_from` are included for comparison.
    pub fn run_sgd_experiment(&self) -> Result<ExperimentReport> {
        let exp = Experiment::Sgd;
        let sgd = &self.cfg.sgd;
        let cells: Vec<(usize, usize)> =
            self.cfg.n_grid.iter().flat_map(|&n| self.reps().map(move |r| (n, r))).collect();
        self.ensure_chains(&cells);
        let grid: Vec<(usize, usize, usize)> = self
            .cfg
            .n_grid
            .iter()
            .flat_map(|&n| self.cfg.s_grid.iter().flat_map(move |&s| self.reps().map(move |r| (n, s, r))))
            .collect();
        let rows: Vec<Result<(Vec<Record>, bool)>> = grid
            .par_iter()
            .map(|&(n, s, rep)| {
                let Some(chain) = self.chain(n, rep) else { return Ok((vec![], true)) };
                let start = Instant::now();
                let pool_size = sgd.pool.min(chain.models.len());
                let pi = ModelDistribution::Finite(FiniteModels::uniform(chain.models[..pool_size].to_vec())?);
                let mut rng = self.rng("sgd", &[n as u64, s as u64, rep as u64]);
                let opts = SgdOptions {
                    schedule: sgd.schedule.clone(),
                    iterations: sgd.iterations,
                    batch: s,
                    trace_every: 0,
                    keep_iterates: Some(1),
                    ..Default::default()
                };
                let run = population_barycenter(&pi, &opts, &mut rng)?;
                let ms = self.elapsed(start);
                let mut out = Vec::with_capacity(sgd.iterations + 2);
                for (t, m) in run.trace.iterates.iter().filter(|(t, _)| *t >= 1) {
                    let v = w2sq_ls(m.as_location_scatter().expect("location-scatter"), &self.truth)?;
                    let mut r = self.record(exp, n, rep, Metric::W2sqBaryToTruth, Method::Sgd, v);
                    r.s = Some(s);
                    r.t = Some(*t);
                    r.wall_ms = ms;
                    out.push(r);
                }
                let residual = fixed_point_residual(&run.model, &pi, self.cfg.residual_mc, &mut rng)?;
                let mut r = self.record(exp, n, rep, Metric::Residual, Method::Sgd, residual);
                r.s = Some(s);
                r.wall_ms = ms;
                out.push(r);
                if rep == 0 {
                    let start = Instant::now();
                    let v = variance_of_gradient_estimator(&run.model, &pi, s, sgd.variance_reps, &mut rng)?;
                    let mut r = self.record(exp, n, rep, Metric::VarGrad, Method::Sgd, v);
                    r.s = Some(s);
                    r.wall_ms = self.elapsed(start);
                    out.push(r);
                }
                Ok((out, run.converged()))
            })
            .collect();
        let mut report = ExperimentReport::new(exp.name(), sgd.summary_from);
        for r in rows {
            let (recs, ok) = r?;
            report.records.extend(recs);
            report.flagged += usize::from(!ok);
        }
        let ks: Vec<usize> = self.cfg.k_grid.iter().copied().filter(|&k| k >= sgd.summary_from).collect();
        for ((n, k, rep), cell, ms) in self.barycenter_cells(&self.cfg.n_grid, &ks) {
            let Some(c) = cell else { continue };
            let mut r = self.record(exp, n, rep, Metric::W2sqBaryToTruth, Method::Descent, c.w2sq);
            r.k = Some(k);
            r.wall_ms = ms;
            report.records.push(r);
        }
        Ok(report)
    }

    pub fn run(&self, experiment: Experiment) -> Result<ExperimentReport> {
        log::info!("running {}", experiment.name());
        match experiment {
            Experiment::Consistency => self.run_posterior_consistency(),
            Experiment::Barycenter => self.run_barycenter_vs_truth(),
            Experiment::CompareBma => self.run_bary_vs_bma(),
            Experiment::Sgd => self.run_sgd_experiment(),
        }
    }
}

pub fn run_posterior_consistency(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Context::new(cfg, &[Experiment::Consistency])?.run_posterior_consistency()
}

pub fn run_barycenter_vs_truth(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Context::new(cfg, &[Experiment::Barycenter])?.run_barycenter_vs_truth()
}

pub fn run_bary_vs_bma(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Context::new(cfg, &[Experiment::CompareBma])?.run_bary_vs_bma()
}

pub fn run_sgd_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Context::new(cfg, &[Experiment::Sgd])?.run_sgd_experiment()
}

/// Runs `experiments` on one shared context, in the given order.
pub fn run_experiments(cfg: &ExperimentConfig, experiments: &[Experiment]) -> Result<Vec<ExperimentReport>> {
    let ctx = Context::new(cfg, experiments)?;
    experiments.iter().map(|&e| ctx.run(e)).collect()
}

pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    run_experiments(cfg, &Experiment::ALL)
}
