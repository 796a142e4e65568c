use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::likelihood::log_likelihood;
use super::prior::{ParamPrior, Params, ScatterParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::Generator;

/// Acceptance rates outside this range after burn-in trigger a warning.
pub const ACCEPTANCE_WARN_RANGE: (f64, f64) = (0.05, 0.8);

/// Random-walk Metropolis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub thin: usize,
    /// Multiplier on the initial proposal scale; `0` freezes
    /// the chain at its starting point.
    pub proposal_scale: f64,
    /// Tune the proposal during burn-in; it is frozen afterwards.
    pub adapt: bool,
    pub target_acceptance: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { burn_in: 6000, thin: 10, proposal_scale: 1.0, adapt: true, target_acceptance: 0.35 }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thinning must be at least 1".into()));
        }
        if !(self.proposal_scale >= 0.0 && self.proposal_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("proposal scale {} must be ≥ 0", self.proposal_scale)));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidArgument("target acceptance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// `min(1, exp(log_proposed - log_current))`.
pub fn acceptance_probability(log_current: f64, log_proposed: f64) -> f64 {
    if log_proposed == f64::NEG_INFINITY {
        return 0.0;
    }
    if log_current == f64::NEG_INFINITY {
        return 1.0;
    }
    (log_proposed - log_current).exp().min(1.0)
}

/// Draws a Metropolis accept/reject decision.
pub fn metropolis_accept(log_current: f64, log_proposed: f64, rng: &mut dyn RngCore) -> bool {
    let a = acceptance_probability(log_current, log_proposed);
    a >= 1.0 || rng.random::<f64>() < a
}

/// Output of [`random_walk_metropolis`].
#[derive(Debug, Clone)]
pub struct RawChain {
    pub draws: Vec<Vec<f64>>,
    pub log_target: Vec<f64>,
    /// Post-burn-in acceptance rate.
    pub acceptance_rate: f64,
}

fn covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mean = rows.iter().fold(DVector::zeros(d), |acc, r| acc + DVector::from_column_slice(r)) / n;
    let mut c = DMatrix::zeros(d, d);
    for r in rows {
        let v = DVector::from_column_slice(r) - &mean;
        c += &v * v.transpose();
    }
    c / (n - 1.0)
}

/// Gaussian random-walk Metropolis on `R^d`.
///
/// The proposal starts as `N(0, diag(init_sd²))` scaled by
/// `proposal_scale · 2.38/√d`. During burn-in the global scale follows a
/// Robbins-Monro recursion towards `target_acceptance`, and at the end of
/// each burn-in quarter the proposal covariance is replaced by the sample
/// covariance of that quarter. Returns `k` draws taken every `thin` steps.
pub fn random_walk_metropolis(
    log_target: &dyn Fn(&[f64]) -> f64,
    init: Vec<f64>,
    init_sd: &[f64],
    k: usize,
    cfg: &McmcConfig,
    rng: &mut dyn RngCore,
) -> Result<RawChain> {
    if init_sd.len() != init.len() {
        return Err(Error::DimensionMismatch { expected: init.len(), got: init_sd.len() });
    }
    let factor = DMatrix::from_diagonal(&DVector::from_column_slice(init_sd));
    rwm_with_factor(log_target, init, factor, k, cfg, rng)
}

/// As [`random_walk_metropolis`], with initial proposal `N(0, L Lᵀ)`.
fn rwm_with_factor(
    log_target: &dyn Fn(&[f64]) -> f64,
    init: Vec<f64>,
    mut factor: DMatrix<f64>,
    k: usize,
    cfg: &McmcConfig,
    rng: &mut dyn RngCore,
) -> Result<RawChain> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument("number of draws must be at least 1".into()));
    }
    let d = init.len();
    let mut x = init;
    let mut lx = log_target(&x);
    if lx == f64::NEG_INFINITY {
        return Err(Error::Domain("starting point has zero target density".into()));
    }
    if d == 0 || cfg.proposal_scale == 0.0 {
        return Ok(RawChain { draws: vec![x; k], log_target: vec![lx; k], acceptance_rate: 1.0 });
    }
    let base = 2.38 / (d as f64).sqrt();
    let mut log_scale = (cfg.proposal_scale * base).ln();
    let window = cfg.burn_in / 4;
    let mut window_draws: Vec<Vec<f64>> = Vec::with_capacity(window);
    let total = cfg.burn_in + k * cfg.thin;
    let mut draws = Vec::with_capacity(k);
    let mut log_target_values = Vec::with_capacity(k);
    let mut accepted_after = 0usize;
    let mut step_in_window = 0usize;
    for t in 0..total {
        let xi = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &factor * xi * log_scale.exp();
        let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let ly = log_target(&y);
        let acc = acceptance_probability(lx, ly);
        let accepted = acc >= 1.0 || rng.random::<f64>() < acc;
        if accepted {
            x = y;
            lx = ly;
        }
        if t < cfg.burn_in {
            if cfg.adapt {
                step_in_window += 1;
                log_scale += (acc - cfg.target_acceptance) / (step_in_window as f64).powf(0.6);
                window_draws.push(x.clone());
                if window >= 10 * d && window_draws.len() == window && t + 1 < cfg.burn_in {
                    let c = linalg::symmetrize(&covariance(&window_draws));
                    let ridge = 1e-10 * c.diagonal().amax().max(1e-300);
                    if let Some(ch) = (c + DMatrix::identity(d, d) * ridge).cholesky() {
                        factor = ch.l();
                        log_scale = (cfg.proposal_scale * base).ln();
                        step_in_window = 0;
                    }
                    window_draws.clear();
                }
            }
        } else {
            accepted_after += usize::from(accepted);
            if (t - cfg.burn_in + 1) % cfg.thin == 0 {
                draws.push(x.clone());
                log_target_values.push(lx);
            }
        }
    }
    let acceptance_rate = accepted_after as f64 / (k * cfg.thin) as f64;
    let (lo, hi) = ACCEPTANCE_WARN_RANGE;
    if !(lo..=hi).contains(&acceptance_rate) {
        log::warn!("Metropolis acceptance rate {acceptance_rate:.3} outside [{lo}, {hi}]");
    }
    Ok(RawChain { draws, log_target: log_target_values, acceptance_rate })
}

/// Post-burn-in, thinned posterior draws.
#[derive(Debug, Clone)]
pub struct PosteriorChain {
    pub draws: Vec<Params>,
    pub log_posterior: Vec<f64>,
    pub acceptance_rate: f64,
    pub burn_in: usize,
    pub thin: usize,
}

fn kernel_levels(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

/// Starting point: `b` at the data mean and kernel parameters at the best
/// point of a grid of prior quantiles.
fn starting_point(prior: &ParamPrior, data: &Dataset, target: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    let mut p = Params {
        location: if prior.location.sd > 0.0 {
            data.mean().unwrap_or_else(|| prior.location_mean())
        } else {
            prior.location_mean()
        },
        scatter: match prior.kernel_quantiles([0.5; 3]) {
            Some([eps, sigma, u]) => ScatterParams::Kernel { eps, sigma, omega: 1.0 / u },
            None => prior.from_unconstrained(&vec![0.0; prior.free_dim()])?.scatter,
        },
    };
    if data.is_empty() || prior.kernel_quantiles([0.5; 3]).is_none() {
        return prior.to_unconstrained(&p);
    }
    let mut best = (f64::NEG_INFINITY, prior.to_unconstrained(&p)?);
    for &ue in &kernel_levels(6) {
        for &us in &kernel_levels(6) {
            for &uo in &kernel_levels(24) {
                let [eps, sigma, u] = prior.kernel_quantiles([ue, us, uo]).expect("kernel prior");
                p.scatter = ScatterParams::Kernel { eps, sigma, omega: 1.0 / u };
                let z = prior.to_unconstrained(&p)?;
                let v = target(&z);
                if v > best.0 {
                    best = (v, z);
                }
            }
        }
    }
    Ok(best.1)
}

/// Cholesky factor of the initial proposal: the data covariance over
/// `n + 1` for the location block, `1/(n + 1)` for the scatter parameters.
fn initial_factor(prior: &ParamPrior, data: &Dataset, d: usize) -> DMatrix<f64> {
    let n = data.len() as f64;
    let mut cov = DMatrix::from_diagonal_element(d, d, 1.0 / (n + 1.0));
    if prior.location.sd > 0.0 {
        let q = prior.dim;
        let block = match data.len() {
            0 | 1 => DMatrix::from_diagonal_element(q, q, prior.location.sd.powi(2)),
            _ => {
                let x = data.observations();
                let centred = x - DMatrix::from_fn(x.nrows(), q, |_, j| x.column(j).mean());
                let c = centred.transpose() * &centred / ((n - 1.0) * (n + 1.0));
                let floor = 1e-12 * c.diagonal().amax().max(1e-300);
                c + DMatrix::identity(q, q) * floor
            }
        };
        cov.view_mut((0, 0), (q, q)).copy_from(&block);
    }
    match cov.clone().cholesky() {
        Some(ch) => ch.l(),
        None => DMatrix::from_diagonal(&cov.diagonal().map(f64::sqrt)),
    }
}

/// Samples `k` draws from the posterior of `prior` given `data` by
/// random-walk Metropolis in the unconstrained coordinates of the prior.
pub fn metropolis_sample(
    prior: &ParamPrior,
    data: &Dataset,
    generator: &Arc<Generator>,
    k: usize,
    cfg: &McmcConfig,
    rng: &mut dyn RngCore,
) -> Result<PosteriorChain> {
    if data.dim() != prior.dim || generator.dim() != prior.dim {
        return Err(Error::DimensionMismatch { expected: prior.dim, got: data.dim().max(generator.dim()) });
    }
    let target = |z: &[f64]| -> f64 {
        let lp = prior.log_density_unconstrained(z);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        match prior.from_unconstrained(z) {
            Ok(p) => lp + log_likelihood(&p, data, generator),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let init = starting_point(prior, data, &target)?;
    let raw = rwm_with_factor(&target, init.clone(), initial_factor(prior, data, init.len()), k, cfg, rng)?;
    let draws = raw.draws.iter().map(|z| prior.from_unconstrained(z)).collect::<Result<Vec<_>>>()?;
    Ok(PosteriorChain {
        draws,
        log_posterior: raw.log_target,
        acceptance_rate: raw.acceptance_rate,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
    })
}

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let b = batches.max(2).min(x.len());
    let size = x.len() / b;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b).map(|i| x[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

impl PosteriorChain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// The first `k` draws.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!("prefix {k} outside 1..={}", self.len())));
        }
        Ok(Self {
            draws: self.draws[..k].to_vec(),
            log_posterior: self.log_posterior[..k].to_vec(),
            ..self.clone()
        })
    }

    /// CSV with columns `b1..bq`, then `eps,sigma,omega` for kernel
    /// scatter, then `log_posterior`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let Some(first) = self.draws.first() else {
            w.flush()?;
            return Ok(());
        };
        let kernel = matches!(first.scatter, ScatterParams::Kernel { .. });
        let mut header: Vec<String> = (1..=first.dim()).map(|i| format!("b{i}")).collect();
        if kernel {
            header.extend(["eps", "sigma", "omega"].map(String::from));
        }
        header.push("log_posterior".into());
        w.write_record(&header)?;
        for (p, lp) in self.draws.iter().zip(&self.log_posterior) {
            let mut row: Vec<String> = p.location.iter().map(|v| v.to_string()).collect();
            if let ScatterParams::Kernel { eps, sigma, omega } = p.scatter {
                row.extend([eps, sigma, omega].map(|v| v.to_string()));
            }
            row.push(lp.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads draws written by [`Self::write_csv`]; a known scatter is taken
    /// from `prior`. Burn-in, thinning and acceptance are not stored.
    pub fn read_csv<R: Read>(input: R, prior: &ParamPrior) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let q = prior.dim;
        let fixed = prior.from_unconstrained(&vec![0.0; prior.free_dim()])?.scatter;
        let mut draws = Vec::new();
        let mut log_posterior = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad chain value {s:?}: {e}"))))
                .collect::<Result<_>>()?;
            let kernel = matches!(fixed, ScatterParams::Kernel { .. });
            let expected = q + if kernel { 3 } else { 0 } + 1;
            if vals.len() != expected {
                return Err(Error::DimensionMismatch { expected, got: vals.len() });
            }
            let scatter = if kernel {
                ScatterParams::Kernel { eps: vals[q], sigma: vals[q + 1], omega: vals[q + 2] }
            } else {
                fixed.clone()
            };
            draws.push(Params { location: DVector::from_column_slice(&vals[..q]), scatter });
            log_posterior.push(vals[expected - 1]);
        }
        Ok(Self { draws, log_posterior, acceptance_rate: f64::NAN, burn_in: 0, thin: 1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::UnivariateModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn acceptance_rule() {
        assert_eq!(acceptance_probability(0.0, 1.0), 1.0);
        assert!((acceptance_probability(0.0, -1.0) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(acceptance_probability(0.0, f64::NEG_INFINITY), 0.0);
        assert_eq!(acceptance_probability(f64::NEG_INFINITY, -5.0), 1.0);
    }

    #[test]
    fn two_state_detailed_balance() {
        // Target (0.3, 0.7); the proposal always flips the state.
        let p = [0.3f64, 0.7];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut state = 0usize;
        let n = 200_000;
        let mut flows = [0usize; 2];
        let mut visits = [0usize; 2];
        for _ in 0..n {
            visits[state] += 1;
            let other = 1 - state;
            if metropolis_accept(p[state].ln(), p[other].ln(), &mut rng) {
                flows[state] += 1;
                state = other;
            }
        }
        assert!(flows[0].abs_diff(flows[1]) <= 1);
        let freq = visits[0] as f64 / n as f64;
        // Two-state chain with flip probabilities 1 and 3/7: lag-one
        // autocorrelation -3/7.
        let rho: f64 = -3.0 / 7.0;
        let se = (0.3 * 0.7 / n as f64 * (1.0 + rho) / (1.0 - rho)).sqrt();
        assert!((freq - 0.3).abs() < 3.0 * se, "{freq} vs 0.3 ± {se}");
        let rate01 = flows[0] as f64 / visits[0] as f64;
        let rate10 = flows[1] as f64 / visits[1] as f64;
        assert!((0.3 * rate01 - 0.7 * rate10).abs() < 3.0 * (0.3 * 0.7 / n as f64).sqrt());
    }

    #[test]
    fn gaussian_target_moments() {
        let target = |x: &[f64]| -0.5 * ((x[0] - 1.0).powi(2) / 4.0 + x[1].powi(2) / 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = McmcConfig { burn_in: 4000, thin: 5, ..Default::default() };
        let chain = random_walk_metropolis(&target, vec![0.0, 0.0], &[1.0, 1.0], 8000, &cfg, &mut rng).unwrap();
        let x0: Vec<f64> = chain.draws.iter().map(|d| d[0]).collect();
        let m = x0.iter().sum::<f64>() / x0.len() as f64;
        assert!((m - 1.0).abs() < 3.0 * batch_means_se(&x0, 20), "{m}");
        let v = x0.iter().map(|x| (x - m).powi(2)).sum::<f64>() / x0.len() as f64;
        assert!((v - 4.0).abs() < 0.6, "{v}");
        assert!(chain.acceptance_rate > 0.15 && chain.acceptance_rate < 0.6, "{}", chain.acceptance_rate);
    }

    #[test]
    fn frozen_and_invalid() {
        let target = |_: &[f64]| 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = McmcConfig { proposal_scale: 0.0, ..Default::default() };
        let c = random_walk_metropolis(&target, vec![3.0], &[1.0], 5, &cfg, &mut rng).unwrap();
        assert!(c.draws.iter().all(|d| d[0] == 3.0));
        assert!(random_walk_metropolis(&target, vec![3.0], &[1.0], 0, &cfg, &mut rng).is_err());
        let bad = McmcConfig { thin: 0, ..Default::default() };
        assert!(random_walk_metropolis(&target, vec![3.0], &[1.0], 5, &bad, &mut rng).is_err());
        let nowhere = |_: &[f64]| f64::NEG_INFINITY;
        assert!(random_walk_metropolis(&nowhere, vec![3.0], &[1.0], 5, &McmcConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn conjugate_normal_posterior() {
        let g = Arc::new(Generator::gaussian(1).unwrap());
        let prior = ParamPrior::known_scatter(vec![0.0], 1.0, DMatrix::identity(1, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = UnivariateModel::normal(1.0, 1.0).unwrap().into();
        let data = Dataset::sample(&truth, 50, &mut rng).unwrap();
        let n = 50.0;
        let xbar = data.mean().unwrap()[0];
        let (post_mean, post_var) = (n * xbar / (n + 1.0), 1.0 / (n + 1.0));
        let chain = metropolis_sample(&prior, &data, &g, 5000, &McmcConfig::default(), &mut rng).unwrap();
        let th: Vec<f64> = chain.draws.iter().map(|p| p.location[0]).collect();
        let m = th.iter().sum::<f64>() / th.len() as f64;
        let se = batch_means_se(&th, 25);
        assert!((m - post_mean).abs() < 3.0 * se, "{m} vs {post_mean} (se {se})");
        let sq: Vec<f64> = th.iter().map(|t| (t - post_mean).powi(2)).collect();
        let v = sq.iter().sum::<f64>() / sq.len() as f64;
        assert!((v - post_var).abs() < 3.0 * batch_means_se(&sq, 25), "{v} vs {post_var}");
    }

    fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn no_data_recovers_prior() {
        let g = Arc::new(Generator::gaussian(2).unwrap());
        let prior = ParamPrior::experiment(2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = McmcConfig { thin: 20, ..Default::default() };
        let chain = metropolis_sample(&prior, &Dataset::empty(2).unwrap(), &g, 10_000, &cfg, &mut rng).unwrap();
        let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        use statrs::distribution::ContinuousCDF;
        for j in 0..2 {
            let d = ks_distance(chain.draws.iter().map(|p| p.location[j]).collect(), |x| normal.cdf(x));
            assert!(d < 0.05, "b{j}: {d}");
        }
        let exp_cdf = |rate: f64| move |x: f64| 1.0 - (-rate * x).exp();
        let pick = |f: fn(&ScatterParams) -> f64| chain.draws.iter().map(|p| f(&p.scatter)).collect::<Vec<_>>();
        let eps = pick(|s| if let ScatterParams::Kernel { eps, .. } = s { *eps } else { f64::NAN });
        let sig = pick(|s| if let ScatterParams::Kernel { sigma, .. } = s { *sigma } else { f64::NAN });
        let inv = pick(|s| if let ScatterParams::Kernel { omega, .. } = s { 1.0 / omega } else { f64::NAN });
        assert!(ks_distance(eps, exp_cdf(20.0)) < 0.05);
        assert!(ks_distance(sig, exp_cdf(1.0)) < 0.05);
        assert!(ks_distance(inv, exp_cdf(15.0)) < 0.05);
    }

    #[test]
    fn chain_csv_round_trip() {
        let g = Arc::new(Generator::gaussian(2).unwrap());
        let prior = ParamPrior::experiment(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = McmcConfig { burn_in: 100, thin: 1, ..Default::default() };
        let chain = metropolis_sample(&prior, &Dataset::empty(2).unwrap(), &g, 20, &cfg, &mut rng).unwrap();
        let mut buf = Vec::new();
        chain.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("b1,b2,eps,sigma,omega,log_posterior\n"));
        let back = PosteriorChain::read_csv(buf.as_slice(), &prior).unwrap();
        assert_eq!(back.draws, chain.draws);
        assert_eq!(back.log_posterior, chain.log_posterior);
    }

    #[test]
    fn batch_means_iid() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let se = batch_means_se(&x, 20);
        assert!((se - 0.01).abs() < 0.005, "{se}");
    }
}
