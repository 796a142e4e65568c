use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::DVector;

use super::data::Dataset;
use super::prior::{ParamPrior, Params};
use crate::measures::Generator;

static NON_FINITE: AtomicUsize = AtomicUsize::new(0);

/// Number of likelihood evaluations that overflowed to a non-finite value
/// and were replaced by `-∞`.
pub fn non_finite_count() -> usize {
    NON_FINITE.load(Ordering::Relaxed)
}

/// `Σ_i [log f̃(A⁻¹(x_i - b)) - log det A]` for the location-scatter model of
/// `θ`; `-∞` when `θ` does not give a positive definite scatter.
pub fn log_likelihood(theta: &Params, data: &Dataset, generator: &Arc<Generator>) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let Ok(model) = theta.model(generator) else {
        return f64::NEG_INFINITY;
    };
    let x = data.observations();
    let centered = x - DVector::from_element(x.nrows(), 1.0) * model.location().transpose();
    // A⁻¹ is symmetric, so rows of `z` are A⁻¹(x_i - b).
    let z = centered * model.scatter_inv();
    let coords = generator.coordinates();
    let mut total = -(x.nrows() as f64) * model.log_det_scatter();
    for (j, c) in coords.iter().enumerate() {
        total += z.column(j).iter().map(|&v| c.ln_pdf(v)).sum::<f64>();
    }
    if total.is_finite() {
        total
    } else {
        if NON_FINITE.fetch_add(1, Ordering::Relaxed) == 0 {
            log::warn!("non-finite log-likelihood replaced by -inf");
        }
        f64::NEG_INFINITY
    }
}

/// Unnormalised log posterior `log p(θ) + log L(θ)` in the prior's natural
/// coordinates.
pub fn log_posterior(prior: &ParamPrior, theta: &Params, data: &Dataset, generator: &Arc<Generator>) -> f64 {
    let lp = prior.log_density(theta);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    lp + log_likelihood(theta, data, generator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::prior::ScatterParams;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed(b: Vec<f64>, s: DMatrix<f64>) -> Params {
        Params { location: DVector::from_vec(b), scatter: ScatterParams::Fixed(Arc::new(s)) }
    }

    #[test]
    fn standard_normal_point() {
        let g = Arc::new(Generator::gaussian(1).unwrap());
        let data = Dataset::new(DMatrix::from_element(1, 1, 0.0)).unwrap();
        let ll = log_likelihood(&fixed(vec![0.0], DMatrix::identity(1, 1)), &data, &g);
        assert!((ll + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
        assert_eq!(log_likelihood(&fixed(vec![0.0], DMatrix::identity(1, 1)), &Dataset::empty(1).unwrap(), &g), 0.0);
    }

    #[test]
    fn matches_model_density() {
        let g = Arc::new(Generator::mixed(3).unwrap());
        let theta = Params {
            location: DVector::from_vec(vec![0.0, 1.0, 2.0]),
            scatter: ScatterParams::Kernel { eps: 0.1, sigma: 1.0, omega: 3.0 },
        };
        let model = theta.model(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data = Dataset::new(model.sample(20, &mut rng).unwrap().points().clone()).unwrap();
        let direct: f64 = data.observations().row_iter().map(|r| model.ln_pdf(&r.transpose())).sum();
        assert!((log_likelihood(&theta, &data, &g) - direct).abs() < 1e-9 * direct.abs());
    }

    #[test]
    fn scaling_changes_log_det_only() {
        let g = Arc::new(Generator::mixed(3).unwrap());
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 1.5]);
        let theta = fixed(vec![0.0; 3], s.clone());
        let doubled = fixed(vec![0.0; 3], s * 4.0);
        let a = theta.model(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = a.sample(10, &mut rng).unwrap().points().clone();
        let d1 = Dataset::new(base.clone()).unwrap();
        let d2 = Dataset::new(base * 2.0).unwrap();
        let diff = log_likelihood(&doubled, &d2, &g) - log_likelihood(&theta, &d1, &g);
        assert!((diff + 10.0 * 3.0 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn invalid_scatter_is_neg_infinity() {
        let g = Arc::new(Generator::gaussian(1).unwrap());
        let data = Dataset::new(DMatrix::from_element(1, 1, 0.0)).unwrap();
        let bad = fixed(vec![0.0], DMatrix::from_element(1, 1, -1.0));
        assert_eq!(log_likelihood(&bad, &data, &g), f64::NEG_INFINITY);
    }

    #[test]
    fn posterior_ratio_is_likelihood_plus_prior_ratio() {
        let g = Arc::new(Generator::gaussian(2).unwrap());
        let prior = ParamPrior::experiment(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = prior.sample(&mut rng).unwrap();
        let b = prior.sample(&mut rng).unwrap();
        let data = Dataset::new(a.model(&g).unwrap().sample(15, &mut rng).unwrap().points().clone()).unwrap();
        let lhs = log_posterior(&prior, &a, &data, &g) - log_posterior(&prior, &b, &data, &g);
        let rhs = (log_likelihood(&a, &data, &g) - log_likelihood(&b, &data, &g))
            + (prior.log_density(&a) - prior.log_density(&b));
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }
}
