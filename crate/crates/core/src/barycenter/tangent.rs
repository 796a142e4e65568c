//! Displacements `T_μ^m - I` as vectors in a Euclidean space whose norm is
//! the `L²(μ)` norm, so that risks, gradients and residuals become vector
//! averages.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::distribution::{FiniteModels, ModelDistribution};
use crate::error::{Error, Result};
use crate::measures::{Model, Shape, UnivariateModel};
use crate::quadrature::{self, Rule};
use crate::transport::ls_map_matrix;

/// Generator radii used as nodes for spherical families.
pub const SPHERICAL_NODES: usize = 4096;

/// Smallest replication count accepted by
/// [`variance_of_gradient_estimator`].
pub const MIN_VARIANCE_REPS: usize = 200;

fn rule(clipped: bool) -> &'static Rule {
    if clipped {
        quadrature::clipped_unit_rule()
    } else {
        quadrature::unit_rule()
    }
}

/// Standard quantiles `Q_shape(u_j)` on the rule nodes, cached per shape.
fn standard_quantiles(shape: Shape, clipped: bool) -> Arc<Vec<f64>> {
    type Key = (u8, u64, bool);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Vec<f64>>>>> = OnceLock::new();
    let key = match shape {
        Shape::Normal => (0, 0, clipped),
        Shape::Laplace => (1, 0, clipped),
        Shape::StudentT(dof) => (2, dof.to_bits(), clipped),
        Shape::Exponential => (3, 0, clipped),
        Shape::Logistic => (4, 0, clipped),
        Shape::Gumbel => (5, 0, clipped),
    };
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache lock").get(&key) {
        return v.clone();
    }
    let standard = UnivariateModel::from_location_scale(shape, 0.0, 1.0).expect("unit scale");
    let values: Arc<Vec<f64>> = Arc::new(rule(clipped).nodes.iter().map(|&u| standard.quantile_unchecked(u)).collect());
    cache.lock().expect("cache lock").insert(key, values.clone());
    values
}

/// `Q_m` on the nodes of the (clipped) unit rule.
pub fn quantiles_on_rule(m: &UnivariateModel, clipped: bool) -> Vec<f64> {
    match m {
        UnivariateModel::QuantileAverage(a) => {
            let mut out = vec![0.0; rule(clipped).len()];
            for (w, part) in a.parts() {
                for (o, q) in out.iter_mut().zip(quantiles_on_rule(part, clipped)) {
                    *o += w * q;
                }
            }
            out
        }
        UnivariateModel::Grid(g) => rule(clipped).nodes.iter().map(|&u| g.quantile(u)).collect(),
        _ => {
            let (shape, loc, scale) = m.location_scale().expect("parametric family");
            standard_quantiles(shape, clipped).iter().map(|z| loc + scale * z).collect()
        }
    }
}

fn univariate_tangents(mu: &UnivariateModel, members: &[&UnivariateModel]) -> Vec<DVector<f64>> {
    let clipped = mu.heavy_tailed() || members.iter().any(|m| m.heavy_tailed());
    let sqrt_w: Vec<f64> = rule(clipped).weights.iter().map(|w| w.sqrt()).collect();
    let base = quantiles_on_rule(mu, clipped);
    members
        .iter()
        .map(|m| {
            let q = quantiles_on_rule(m, clipped);
            DVector::from_iterator(q.len(), q.iter().zip(&base).zip(&sqrt_w).map(|((a, b), s)| s * (a - b)))
        })
        .collect()
}

fn as_family<'a, T>(members: &[&'a Model], pick: impl Fn(&'a Model) -> Option<&'a T>) -> Result<Vec<&'a T>> {
    members
        .iter()
        .map(|m| pick(m).ok_or_else(|| Error::Incompatible(format!("unexpected {} model", m.family()))))
        .collect()
}

/// Tangent vectors `t_i` with `‖t_i‖² = ‖T_μ^{m_i} - I‖²_{L²(μ)} = W₂²(μ, m_i)`.
///
/// Location-scatter: `[vec((A_i - I) A_μ); b_i - b_μ]`. Univariate:
/// `√w_j (Q_i(u_j) - Q_μ(u_j))` on the quantile rule. Spherical:
/// `(α_i(r_j) - α_μ(r_j)) / √N` on fixed generator radii. Copula: the
/// marginal vectors stacked.
pub fn tangent_vectors(mu: &Model, members: &[&Model]) -> Result<Vec<DVector<f64>>> {
    for m in members {
        mu.check_compatible(m)?;
    }
    Ok(match mu {
        Model::Univariate(base) => univariate_tangents(base, &as_family(members, Model::as_univariate)?),
        Model::LocationScatter(base) => {
            let q = base.dim();
            let a0 = base.scatter();
            let ms = as_family(members, Model::as_location_scatter)?;
            ms.iter()
                .map(|m| {
                    let d = ls_map_matrix(base, m) - DMatrix::identity(q, q);
                    let lin = d * a0;
                    let shift = m.location() - base.location();
                    DVector::from_iterator(q * q + q, lin.iter().copied().chain(shift.iter().copied()))
                })
                .collect()
        }
        Model::Spherical(base) => {
            let radii = base.radius_nodes(SPHERICAL_NODES);
            let scale = 1.0 / (radii.len() as f64).sqrt();
            let base_vals: Vec<f64> = radii.iter().map(|&r| base.alpha().eval(r)).collect();
            members
                .iter()
                .map(|m| {
                    let Model::Spherical(s) = m else { unreachable!("checked family") };
                    DVector::from_iterator(
                        radii.len(),
                        radii.iter().zip(&base_vals).map(|(&r, b)| scale * (s.alpha().eval(r) - b)),
                    )
                })
                .collect()
        }
        Model::Copula(base) => {
            let ms: Vec<_> = members
                .iter()
                .map(|m| match m {
                    Model::Copula(c) => c,
                    _ => unreachable!("checked family"),
                })
                .collect();
            let mut stacked: Vec<Vec<f64>> = vec![Vec::new(); ms.len()];
            for (j, m0) in base.marginals().iter().enumerate() {
                let marg: Vec<&UnivariateModel> = ms.iter().map(|m| &m.marginals()[j]).collect();
                for (acc, t) in stacked.iter_mut().zip(univariate_tangents(m0, &marg)) {
                    acc.extend(t.iter());
                }
            }
            stacked.into_iter().map(DVector::from_vec).collect()
        }
    })
}

fn weighted_mean(weights: &[f64], vectors: &[DVector<f64>]) -> DVector<f64> {
    let mut mean = DVector::zeros(vectors[0].len());
    for (w, t) in weights.iter().zip(vectors) {
        mean.axpy(*w, t, 1.0);
    }
    mean
}

/// Bayes risk `F(μ) = ½ Σ λ_i W₂²(μ, m_i)` and `‖F′(μ)‖² = ‖Σ λ_i (T^{m_i} - I)‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Risk {
    pub f: f64,
    pub grad_sq: f64,
}

pub fn risk(mu: &Model, pi: &FiniteModels) -> Result<Risk> {
    let members: Vec<&Model> = pi.support().iter().collect();
    let t = tangent_vectors(mu, &members)?;
    let f = 0.5 * pi.weights().iter().zip(&t).map(|(w, v)| w * v.norm_squared()).sum::<f64>();
    let grad_sq = weighted_mean(pi.weights(), &t).norm_squared();
    Ok(Risk { f, grad_sq })
}

/// `‖∫ T_μ̂^m Π(dm) - I‖`: in `L²(μ̂)` in general, and for location-scatter
/// models `(‖Σ λ_i A_i - I‖_F² + ‖Σ λ_i b_i - b̂‖²)^{1/2}`. A sampled `Π` is
/// replaced by `n_mc` draws.
pub fn fixed_point_residual(mu: &Model, pi: &ModelDistribution, n_mc: usize, rng: &mut dyn RngCore) -> Result<f64> {
    let drawn;
    let (support, weights): (Vec<&Model>, Vec<f64>) = match pi {
        ModelDistribution::Finite(f) => (f.support().iter().collect(), f.weights().to_vec()),
        ModelDistribution::Sampler(_) => {
            if n_mc == 0 {
                return Err(Error::InvalidArgument("n_mc must be positive for a sampled distribution".into()));
            }
            drawn = pi.draw_many(n_mc, rng)?;
            (drawn.iter().collect(), vec![1.0 / n_mc as f64; n_mc])
        }
    };
    if let Model::LocationScatter(base) = mu {
        let q = base.dim();
        let mut a_bar = -DMatrix::identity(q, q);
        let mut b_bar = -base.location().clone();
        for (w, m) in weights.iter().zip(&support) {
            mu.check_compatible(m)?;
            let m = m.as_location_scatter().expect("checked family");
            a_bar += ls_map_matrix(base, m) * *w;
            b_bar += m.location() * *w;
        }
        return Ok((a_bar.norm_squared() + b_bar.norm_squared()).sqrt());
    }
    let t = tangent_vectors(mu, &support)?;
    Ok(weighted_mean(&weights, &t).norm())
}

/// Monte Carlo estimate of `𝕍[-(1/S) Σ_i (T_μ^{m_i} - I)]` in `L²(μ)` from
/// `reps` independent batches of size `s`.
pub fn variance_of_gradient_estimator(
    mu: &Model,
    pi: &ModelDistribution,
    s: usize,
    reps: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if s == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if reps < MIN_VARIANCE_REPS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_VARIANCE_REPS} replications for a stable variance, got {reps}"
        )));
    }
    let draws = pi.draw_many(reps * s, rng)?;
    let refs: Vec<&Model> = draws.iter().collect();
    let t = tangent_vectors(mu, &refs)?;
    let w = vec![1.0 / s as f64; s];
    let batch_means: Vec<DVector<f64>> = t.chunks(s).map(|c| weighted_mean(&w, c)).collect();
    let grand = weighted_mean(&vec![1.0 / reps as f64; reps], &batch_means);
    Ok(batch_means.iter().map(|g| (g - &grand).norm_squared()).sum::<f64>() / (reps - 1) as f64)
}
