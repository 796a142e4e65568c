//! Pushforward of a model under `(1 - γ) I + γ Σ λ_i T^{m_i}`, computed in
//! family parameters.

use super::distribution::FiniteModels;
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{CopulaModel, LocationScatterModel, Model, RadialProfile, SphericalModel, UnivariateModel};

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("step γ={gamma} outside [0, 1]")));
    }
    Ok(())
}

fn check_weights(members: &[(f64, &Model)]) -> Result<()> {
    if members.is_empty() {
        return Err(Error::Empty("no models to average".into()));
    }
    if members.iter().any(|(w, _)| !(*w >= 0.0)) {
        return Err(Error::InvalidWeights("negative averaging weight".into()));
    }
    let total: f64 = members.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("averaging weights sum to {total}")));
    }
    Ok(())
}

/// `Q ← (1 - γ) Q_0 + γ Σ λ_i Q_i`, kept in closed form when all parts
/// share one location-scale shape.
fn univariate(base: &UnivariateModel, gamma: f64, members: &[(f64, &UnivariateModel)]) -> Result<UnivariateModel> {
    let mut parts: Vec<(f64, &UnivariateModel)> = Vec::with_capacity(members.len() + 1);
    if gamma < 1.0 {
        parts.push((1.0 - gamma, base));
    }
    parts.extend(members.iter().filter(|(w, _)| *w > 0.0).map(|&(w, m)| (gamma * w, m)));
    if let Some((shape, _, _)) = parts[0].1.location_scale() {
        let mut loc = 0.0;
        let mut scale = 0.0;
        let mut shared = true;
        for (c, m) in &parts {
            match m.location_scale() {
                Some((s, l, sc)) if s == shape => {
                    loc += c * l;
                    scale += c * sc;
                }
                _ => {
                    shared = false;
                    break;
                }
            }
        }
        if shared {
            if let Some(m) = UnivariateModel::from_location_scale(shape, loc, scale) {
                return Ok(m);
            }
        }
    }
    UnivariateModel::quantile_average(&parts)
}

/// `b ← (1-γ) b_0 + γ Σ λ_i b_i`,
/// `Σ ← A_0⁻¹ [(1-γ) Σ_0 + γ Σ λ_i (A_0 Σ_i A_0)^{1/2}]² A_0⁻¹`.
fn location_scatter(
    base: &LocationScatterModel,
    gamma: f64,
    members: &[(f64, &LocationScatterModel)],
) -> Result<LocationScatterModel> {
    let a0 = base.scatter();
    let mut b = base.location() * (1.0 - gamma);
    let mut m = base.sigma() * (1.0 - gamma);
    for &(w, mi) in members {
        if !base.compatible_with(mi) {
            return Err(Error::Incompatible("location-scatter models use different generators".into()));
        }
        if w == 0.0 {
            continue;
        }
        b += mi.location() * (gamma * w);
        m += linalg::sqrtm(&(a0 * mi.sigma() * a0)) * (gamma * w);
    }
    let inv = base.scatter_inv();
    let m = linalg::symmetrize(&m);
    let sigma = inv * &m * &m * inv;
    Ok(LocationScatterModel::from_parts(base.generator().clone(), b, sigma))
}

fn spherical(base: &SphericalModel, gamma: f64, members: &[(f64, &SphericalModel)]) -> Result<SphericalModel> {
    let mut parts: Vec<(f64, &RadialProfile)> = Vec::with_capacity(members.len() + 1);
    if gamma < 1.0 {
        parts.push((1.0 - gamma, base.alpha()));
    }
    for &(w, m) in members {
        if !base.compatible_with(m) {
            return Err(Error::Incompatible("spherical models use different generators".into()));
        }
        if w > 0.0 {
            parts.push((gamma * w, m.alpha()));
        }
    }
    SphericalModel::new(base.generator().clone(), RadialProfile::combine(&parts)?)
}

fn copula(base: &CopulaModel, gamma: f64, members: &[(f64, &CopulaModel)]) -> Result<CopulaModel> {
    let mut marginals = Vec::with_capacity(base.dim());
    for (j, m0) in base.marginals().iter().enumerate() {
        let parts: Vec<(f64, &UnivariateModel)> = members.iter().map(|&(w, m)| (w, &m.marginals()[j])).collect();
        marginals.push(univariate(m0, gamma, &parts)?);
    }
    CopulaModel::new(base.copula().clone(), marginals)
}

/// Pushforward of `base` under `(1 - γ) I + γ Σ λ_i T_base^{m_i}`.
pub fn averaged_pushforward(base: &Model, gamma: f64, members: &[(f64, &Model)]) -> Result<Model> {
    check_gamma(gamma)?;
    check_weights(members)?;
    for (_, m) in members {
        base.check_compatible(m)?;
    }
    if gamma == 0.0 {
        return Ok(base.clone());
    }
    Ok(match base {
        Model::Univariate(b) => {
            let ms: Vec<(f64, &UnivariateModel)> =
                members.iter().map(|&(w, m)| (w, m.as_univariate().expect("checked family"))).collect();
            Model::Univariate(univariate(b, gamma, &ms)?)
        }
        Model::LocationScatter(b) => {
            let ms: Vec<(f64, &LocationScatterModel)> =
                members.iter().map(|&(w, m)| (w, m.as_location_scatter().expect("checked family"))).collect();
            Model::LocationScatter(location_scatter(b, gamma, &ms)?)
        }
        Model::Spherical(b) => {
            let ms: Vec<(f64, &SphericalModel)> = members
                .iter()
                .map(|&(w, m)| match m {
                    Model::Spherical(s) => (w, s),
                    _ => unreachable!("checked family"),
                })
                .collect();
            Model::Spherical(spherical(b, gamma, &ms)?)
        }
        Model::Copula(b) => {
            let ms: Vec<(f64, &CopulaModel)> = members
                .iter()
                .map(|&(w, m)| match m {
                    Model::Copula(c) => (w, c),
                    _ => unreachable!("checked family"),
                })
                .collect();
            Model::Copula(copula(b, gamma, &ms)?)
        }
    })
}

/// One deterministic descent step `G_{k,γ}(μ)` for a finite distribution.
pub fn gk_step(mu: &Model, pi: &FiniteModels, gamma: f64) -> Result<Model> {
    averaged_pushforward(mu, gamma, &pi.members())
}

/// `μ_{k+1} = [(1 - γ) I + γ T_{μ}^{m}](μ)`.
pub fn sgd_step(mu: &Model, m: &Model, gamma: f64) -> Result<Model> {
    averaged_pushforward(mu, gamma, &[(1.0, m)])
}

/// `μ_{k+1} = [(1 - γ) I + (γ/S) Σ_i T_{μ}^{m_i}](μ)`.
pub fn batch_sgd_step(mu: &Model, batch: &[Model], gamma: f64) -> Result<Model> {
    if batch.is_empty() {
        return Err(Error::Empty("empty batch".into()));
    }
    let w = 1.0 / batch.len() as f64;
    let members: Vec<(f64, &Model)> = batch.iter().map(|m| (w, m)).collect();
    averaged_pushforward(mu, gamma, &members)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_ls_model, Generator};
    use crate::transport::{w2sq_ls, wp_univariate};
    use nalgebra::{DMatrix, DVector};
    use std::sync::Arc;

    fn n(m: f64, s: f64) -> Model {
        UnivariateModel::normal(m, s).unwrap().into()
    }

    fn uni(m: &Model) -> &UnivariateModel {
        m.as_univariate().unwrap()
    }

    #[test]
    fn gamma_zero_is_identity_and_one_is_target() {
        let mu = n(0.0, 1.0);
        let m = UnivariateModel::laplace(1.0, 2.0).unwrap().into();
        let same = sgd_step(&mu, &m, 0.0).unwrap();
        assert_eq!(uni(&same), uni(&mu));
        let full = sgd_step(&mu, &m, 1.0).unwrap();
        assert_eq!(uni(&full), uni(&m));
        assert!(sgd_step(&mu, &m, 1.5).is_err());
    }

    #[test]
    fn two_gaussians() {
        let pi = FiniteModels::uniform(vec![n(0.0, 1.0), n(4.0, 3.0)]).unwrap();
        let out = gk_step(&n(-7.0, 0.1), &pi, 1.0).unwrap();
        assert_eq!(uni(&out), &UnivariateModel::normal(2.0, 2.0).unwrap());
    }

    #[test]
    fn batch_reductions() {
        let mu = n(0.5, 2.0);
        let m = n(1.0, 1.0);
        let one = batch_sgd_step(&mu, std::slice::from_ref(&m), 0.3).unwrap();
        let single = sgd_step(&mu, &m, 0.3).unwrap();
        assert_eq!(uni(&one), uni(&single));
        let rep = batch_sgd_step(&mu, &[m.clone(), m.clone(), m.clone()], 0.3).unwrap();
        assert!(wp_univariate(uni(&rep), uni(&single), 2.0).unwrap() < 1e-12);
        let avg = batch_sgd_step(&mu, &[n(0.0, 1.0), n(2.0, 1.0)], 1.0).unwrap();
        assert!(wp_univariate(uni(&avg), &UnivariateModel::normal(1.0, 1.0).unwrap(), 2.0).unwrap() < 1e-12);
        assert!(batch_sgd_step(&mu, &[], 0.5).is_err());
    }

    #[test]
    fn mixed_shapes_average_quantiles() {
        let a = n(0.0, 1.0);
        let b: Model = UnivariateModel::laplace(2.0, 1.0).unwrap().into();
        let out = batch_sgd_step(&a, &[a.clone(), b.clone()], 1.0).unwrap();
        for u in [0.01, 0.3, 0.5, 0.9] {
            let expected = 0.5 * (uni(&a).quantile_unchecked(u) + uni(&b).quantile_unchecked(u));
            assert!((uni(&out).quantile_unchecked(u) - expected).abs() < 1e-14);
        }
    }

    fn ls(diag: &[f64], b: &[f64]) -> Model {
        let g = Arc::new(Generator::gaussian(diag.len()).unwrap());
        make_ls_model(g, DVector::from_row_slice(b), DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
            .unwrap()
            .into()
    }

    #[test]
    fn ls_scalar_update() {
        let out = sgd_step(&ls(&[1.0], &[0.0]), &ls(&[9.0], &[2.0]), 0.5).unwrap();
        let m = out.as_location_scatter().unwrap();
        assert!((m.sigma()[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((m.location()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ls_full_step_hits_target() {
        let g = Arc::new(Generator::gaussian(2).unwrap());
        let s0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s1 = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 3.0]);
        let m0: Model = make_ls_model(g.clone(), DVector::zeros(2), s0).unwrap().into();
        let m1: Model = make_ls_model(g, DVector::from_vec(vec![1.0, 2.0]), s1).unwrap().into();
        let out = sgd_step(&m0, &m1, 1.0).unwrap();
        let d = w2sq_ls(out.as_location_scatter().unwrap(), m1.as_location_scatter().unwrap()).unwrap();
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn incompatible_members() {
        let a = ls(&[1.0], &[0.0]);
        assert!(sgd_step(&a, &n(0.0, 1.0), 0.5).is_err());
    }
}
