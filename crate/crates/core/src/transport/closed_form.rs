//! Optimal maps and Wasserstein distances between members of the same
//! closed-form family.

use nalgebra::DMatrix;

use super::map::TransportMap;
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{CopulaModel, LocationScatterModel, Model, RadialProfile, SphericalModel, UnivariateModel};
use crate::quadrature::{self, Rule};

/// Generator radii used by [`w2sq`] for spherical models.
pub const SPHERICAL_W2_NODES: usize = 4096;

/// Monotone rearrangement `Q_dst ∘ F_src`.
pub fn ot_map_univariate(src: &UnivariateModel, dst: &UnivariateModel) -> TransportMap {
    if src == dst {
        return TransportMap::Identity;
    }
    TransportMap::MonotoneRearrangement { source: src.clone(), target: dst.clone() }
}

/// Quadrature rule for quantile integrals between `a` and `b`: full (0, 1)
/// unless one side is heavy tailed, then clipped at `1e-5`.
pub fn quantile_rule(a: &UnivariateModel, b: &UnivariateModel) -> &'static Rule {
    if a.heavy_tailed() || b.heavy_tailed() {
        quadrature::clipped_unit_rule()
    } else {
        quadrature::unit_rule()
    }
}

fn finite_moment(m: &UnivariateModel, p: f64) -> Result<()> {
    if let UnivariateModel::StudentT { dof, .. } = *m {
        if p >= dof {
            return Err(Error::Domain(format!("Student-t({dof}) has no finite moment of order {p}")));
        }
    }
    Ok(())
}

/// `W_p^p = ∫_0^1 |Q_1(u) - Q_2(u)|^p du`.
pub fn wpp_univariate(m1: &UnivariateModel, m2: &UnivariateModel, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("Wasserstein order must be at least 1, got {p}")));
    }
    finite_moment(m1, p)?;
    finite_moment(m2, p)?;
    if m1 == m2 {
        return Ok(0.0);
    }
    let heavy = m1.heavy_tailed() || m2.heavy_tailed();
    let rule = quantile_rule(m1, m2);
    let integrand = |u: f64| (m1.quantile_unchecked(u) - m2.quantile_unchecked(u)).abs().powf(p);
    let value = rule.integrate(integrand);
    // half-size rule on the same interval as an error estimate
    let coarse = quadrature::coarse_unit_rule(heavy);
    let rough = coarse.integrate(integrand);
    let err = (value - rough).abs();
    if !value.is_finite() || err > 1e-3 * value.max(1e-8) {
        return Err(Error::Numerical(format!(
            "quantile quadrature did not converge: value {value:.6e}, achieved tolerance {err:.3e}"
        )));
    }
    Ok(value.max(0.0))
}

pub fn wp_univariate(m1: &UnivariateModel, m2: &UnivariateModel, p: f64) -> Result<f64> {
    Ok(wpp_univariate(m1, m2, p)?.powf(1.0 / p))
}

/// The symmetric PSD matrix `A₁⁻¹ (A₁ Σ₂ A₁)^{1/2} A₁⁻¹` of the optimal
/// affine map from `m1` to `m2`.
pub fn ls_map_matrix(m1: &LocationScatterModel, m2: &LocationScatterModel) -> DMatrix<f64> {
    let a1 = m1.scatter();
    let inv = m1.scatter_inv();
    let middle = linalg::sqrtm(&(a1 * m2.sigma() * a1));
    linalg::symmetrize(&(inv * middle * inv))
}

fn check_ls(m1: &LocationScatterModel, m2: &LocationScatterModel) -> Result<()> {
    if !m1.compatible_with(m2) {
        return Err(Error::Incompatible("location-scatter models use different generators".into()));
    }
    Ok(())
}

/// `T(x) = A (x - b₁) + b₂`.
pub fn ot_map_ls(m1: &LocationScatterModel, m2: &LocationScatterModel) -> Result<TransportMap> {
    check_ls(m1, m2)?;
    Ok(TransportMap::AffinePsd {
        matrix: ls_map_matrix(m1, m2),
        source_location: m1.location().clone(),
        target_location: m2.location().clone(),
    })
}

/// `‖b₁ - b₂‖² + tr(Σ₁ + Σ₂ - 2 (Σ₁^{1/2} Σ₂ Σ₁^{1/2})^{1/2})`.
///
/// Exact when the generator is standardized; otherwise the cost of the
/// affine map computed as if it were.
pub fn w2sq_ls(m1: &LocationScatterModel, m2: &LocationScatterModel) -> Result<f64> {
    check_ls(m1, m2)?;
    let a1 = m1.scatter();
    let shift = (m1.location() - m2.location()).norm_squared();
    let cross = linalg::trace_sqrtm(&(a1 * m2.sigma() * a1));
    Ok((shift + m1.sigma().trace() + m2.sigma().trace() - 2.0 * cross).max(0.0))
}

pub fn w2_ls(m1: &LocationScatterModel, m2: &LocationScatterModel) -> Result<f64> {
    Ok(w2sq_ls(m1, m2)?.sqrt())
}

/// Coordinatewise monotone rearrangement between models sharing a copula.
pub fn ot_map_copula(m1: &CopulaModel, m2: &CopulaModel) -> Result<TransportMap> {
    if !m1.compatible_with(m2) {
        return Err(Error::Incompatible("copula models do not share a copula".into()));
    }
    if m1 == m2 {
        return Ok(TransportMap::Identity);
    }
    Ok(TransportMap::Coordinatewise(
        m1.marginals().iter().zip(m2.marginals()).map(|(a, b)| ot_map_univariate(a, b)).collect(),
    ))
}

/// `W_p^p` between copula models: the sum of marginal `W_p^p`.
pub fn wpp_copula(m1: &CopulaModel, m2: &CopulaModel, p: f64) -> Result<f64> {
    if !m1.compatible_with(m2) {
        return Err(Error::Incompatible("copula models do not share a copula".into()));
    }
    m1.marginals().iter().zip(m2.marginals()).map(|(a, b)| wpp_univariate(a, b, p)).sum()
}

/// Radial map with profile `α₂ ∘ α₁⁻¹`.
pub fn ot_map_spherical(m1: &SphericalModel, m2: &SphericalModel) -> Result<TransportMap> {
    if !m1.compatible_with(m2) {
        return Err(Error::Incompatible("spherical models use different generators".into()));
    }
    if m1.alpha() == m2.alpha() {
        return Ok(TransportMap::Identity);
    }
    Ok(TransportMap::Radial { profile: RadialProfile::compose(m2.alpha(), m1.alpha())? })
}

/// `W₂² = E (α₁(R) - α₂(R))²` with `R = ‖x̃‖`, estimated on the model's fixed
/// radius sample of size `n_nodes`.
pub fn w2sq_spherical(m1: &SphericalModel, m2: &SphericalModel, n_nodes: usize) -> Result<f64> {
    if !m1.compatible_with(m2) {
        return Err(Error::Incompatible("spherical models use different generators".into()));
    }
    let r = m1.radius_nodes(n_nodes);
    Ok(r.iter().map(|&r| (m1.alpha().eval(r) - m2.alpha().eval(r)).powi(2)).sum::<f64>() / r.len() as f64)
}

/// `W₂²` between two compatible models of any closed-form family.
pub fn w2sq(a: &Model, b: &Model) -> Result<f64> {
    a.check_compatible(b)?;
    match (a, b) {
        (Model::Univariate(x), Model::Univariate(y)) => wpp_univariate(x, y, 2.0),
        (Model::LocationScatter(x), Model::LocationScatter(y)) => w2sq_ls(x, y),
        (Model::Spherical(x), Model::Spherical(y)) => w2sq_spherical(x, y, SPHERICAL_W2_NODES),
        (Model::Copula(x), Model::Copula(y)) => wpp_copula(x, y, 2.0),
        _ => unreachable!("checked compatibility"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_ls_model, Copula, Generator};
    use nalgebra::DVector;
    use std::sync::Arc;

    fn n(m: f64, s: f64) -> UnivariateModel {
        UnivariateModel::normal(m, s).unwrap()
    }

    #[test]
    fn identity_map_on_grid() {
        let m = UnivariateModel::logistic(0.5, 2.0).unwrap();
        let t = TransportMap::MonotoneRearrangement { source: m.clone(), target: m.clone() };
        for i in -40..=40 {
            let x = i as f64 * 0.25;
            assert!((t.apply_scalar(x) - x).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_rearrangement_is_affine() {
        let t = ot_map_univariate(&n(0.0, 1.0), &n(2.0, 3.0));
        for x in [-2.0, -0.3, 0.0, 1.7] {
            assert!((t.apply_scalar(x) - (2.0 + 3.0 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_rearrangement_doubles() {
        let e1 = UnivariateModel::exponential(1.0).unwrap();
        let e2 = UnivariateModel::exponential(0.5).unwrap();
        let t = ot_map_univariate(&e1, &e2);
        for x in [0.1, 1.0, 3.0] {
            assert!((t.apply_scalar(x) - 2.0 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_family_rearrangement_via_quantiles() {
        let src = UnivariateModel::laplace(0.0, 1.0).unwrap();
        let dst = n(1.0, 2.0);
        let t = ot_map_univariate(&src, &dst);
        for x in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            let expected = dst.quantile_unchecked(src.cdf(x));
            assert!((t.apply_scalar(x) - expected).abs() < 1e-12);
        }
        let probes: Vec<f64> = (-50..50).map(|i| i as f64 * 0.2).collect();
        assert!(t.is_nondecreasing_on(&probes));
    }

    #[test]
    fn univariate_w2_examples() {
        assert_eq!(wp_univariate(&n(0.0, 1.0), &n(0.0, 1.0), 2.0).unwrap(), 0.0);
        assert!((wp_univariate(&n(0.0, 1.0), &n(2.0, 1.0), 2.0).unwrap() - 2.0).abs() < 1e-9);
        let w = wp_univariate(&n(0.0, 1.0), &n(2.0, 2.0), 2.0).unwrap();
        assert!((w - 5.0_f64.sqrt()).abs() < 1e-8, "{w}");
    }

    #[test]
    fn univariate_wp_symmetry_and_order() {
        let a = UnivariateModel::gumbel(0.0, 1.0).unwrap();
        let b = UnivariateModel::laplace(1.0, 0.5).unwrap();
        let ab = wp_univariate(&a, &b, 2.0).unwrap();
        assert!((ab - wp_univariate(&b, &a, 2.0).unwrap()).abs() < 1e-14);
        let w1 = wp_univariate(&a, &b, 1.0).unwrap();
        assert!(w1 <= ab + 1e-12);
        let t3 = UnivariateModel::student_t(3.0, 0.0, 1.0).unwrap();
        assert!(matches!(wp_univariate(&t3, &a, 3.0), Err(Error::Domain(_))));
        assert!(wp_univariate(&t3, &a, 2.0).is_ok());
        assert!(wp_univariate(&a, &b, 0.5).is_err());
    }

    #[test]
    fn w1_between_shifted_laplace_is_the_shift() {
        let a = UnivariateModel::laplace(0.0, 1.0).unwrap();
        let b = UnivariateModel::laplace(0.75, 1.0).unwrap();
        assert!((wp_univariate(&a, &b, 1.0).unwrap() - 0.75).abs() < 1e-12);
    }

    fn ls(q: usize, b: &[f64], sigma: DMatrix<f64>) -> LocationScatterModel {
        make_ls_model(Arc::new(Generator::gaussian(q).unwrap()), DVector::from_row_slice(b), sigma).unwrap()
    }

    #[test]
    fn ls_map_with_identity_source() {
        let s2 = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let m1 = ls(2, &[0.0, 0.0], DMatrix::identity(2, 2));
        let m2 = ls(2, &[1.0, -1.0], s2);
        let a = ls_map_matrix(&m1, &m2);
        assert!((a - m2.scatter()).amax() < 1e-12);
    }

    #[test]
    fn ls_map_commuting_diagonal() {
        let m1 = ls(2, &[0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])));
        let m2 = ls(2, &[0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])));
        let a = ls_map_matrix(&m1, &m2);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]));
        assert!((a - expected).amax() < 1e-12);
    }

    #[test]
    fn ls_w2_examples() {
        let i2 = DMatrix::identity(2, 2);
        let m1 = ls(2, &[0.0, 0.0], i2.clone());
        assert_eq!(w2_ls(&m1, &m1).unwrap(), 0.0);
        let m2 = ls(2, &[3.0, 4.0], i2);
        assert!((w2_ls(&m1, &m2).unwrap() - 5.0).abs() < 1e-12);
        let a = ls(1, &[0.0], DMatrix::from_element(1, 1, 1.0));
        let b = ls(1, &[2.0], DMatrix::from_element(1, 1, 4.0));
        assert!((w2sq_ls(&a, &b).unwrap() - 5.0).abs() < 1e-12);
        let quad = wpp_univariate(&n(0.0, 1.0), &n(2.0, 2.0), 2.0).unwrap();
        assert!((quad - 5.0).abs() < 1e-8);
    }

    #[test]
    fn ls_generator_mismatch() {
        let g1 = Arc::new(Generator::gaussian(2).unwrap());
        let g2 = Arc::new(Generator::mixed(2).unwrap());
        let a = make_ls_model(g1, DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let b = make_ls_model(g2, DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(ot_map_ls(&a, &b), Err(Error::Incompatible(_))));
        assert!(w2_ls(&a, &b).is_err());
    }

    #[test]
    fn copula_maps() {
        let same = vec![n(0.0, 1.0), n(0.0, 1.0)];
        let shifted = vec![n(1.0, 1.0), n(1.0, 1.0)];
        let ind_a = CopulaModel::new(Copula::Independence, same.clone()).unwrap();
        let ind_b = CopulaModel::new(Copula::Independence, shifted.clone()).unwrap();
        assert!(matches!(ot_map_copula(&ind_a, &ind_a).unwrap(), TransportMap::Identity));
        let t = ot_map_copula(&ind_a, &ind_b).unwrap();
        let y = t.apply(&DVector::from_vec(vec![0.3, -1.2]));
        assert!((y[0] - 1.3).abs() < 1e-12 && (y[1] + 0.2).abs() < 1e-12);
        assert!((wpp_copula(&ind_a, &ind_b, 2.0).unwrap() - 2.0).abs() < 1e-9);

        let rho = Copula::gaussian(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        let g_a = CopulaModel::new(rho.clone(), same).unwrap();
        let g_b = CopulaModel::new(rho, shifted).unwrap();
        let tg = ot_map_copula(&g_a, &g_b).unwrap();
        let yg = tg.apply(&DVector::from_vec(vec![0.3, -1.2]));
        assert!((yg - y).amax() < 1e-12);
        assert!((wpp_copula(&g_a, &g_b, 2.0).unwrap() - 2.0).abs() < 1e-9);
        assert!(ot_map_copula(&ind_a, &g_b).is_err());
    }

    #[test]
    fn spherical_maps() {
        let g = Arc::new(Generator::gaussian(2).unwrap());
        let radii: Vec<f64> = (0..=400).map(|i| i as f64 * 0.025).collect();
        let lin = RadialProfile::from_fn(radii.clone(), |r| r).unwrap();
        let double = RadialProfile::from_fn(radii.clone(), |r| 2.0 * r).unwrap();
        let square = RadialProfile::from_fn(radii.clone(), |r| r * r).unwrap();
        let m_lin = SphericalModel::new(g.clone(), lin).unwrap();
        let m_double = SphericalModel::new(g.clone(), double).unwrap();
        let m_square = SphericalModel::new(g.clone(), square).unwrap();

        assert!(matches!(ot_map_spherical(&m_lin, &m_lin).unwrap(), TransportMap::Identity));
        let t = ot_map_spherical(&m_lin, &m_double).unwrap();
        let y = t.apply(&DVector::from_vec(vec![0.6, -0.8]));
        assert!((y - DVector::from_vec(vec![1.2, -1.6])).amax() < 1e-12);

        let t = ot_map_spherical(&m_square, &m_lin).unwrap();
        let TransportMap::Radial { profile } = &t else { panic!() };
        for s in [0.25_f64, 1.0, 2.0, 4.0, 9.0] {
            assert!((profile.eval(s) - s.sqrt()).abs() < 2e-3, "{s}");
        }
        let probes: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        assert!(t.is_nondecreasing_on(&probes));
        assert!(w2sq_spherical(&m_lin, &m_double, 4000).unwrap() > 0.0);
    }
}
