use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Exponent of the non-uniform grid on [0, 1] the kernel is evaluated on.
pub const GRID_EXPONENT: f64 = 1.1;

/// Grid points `((i-1)/(q-1))^1.1`, `i = 1..q`.
pub fn kernel_grid(q: usize) -> Vec<f64> {
    if q == 1 {
        return vec![0.0];
    }
    (0..q).map(|i| (i as f64 / (q - 1) as f64).powf(GRID_EXPONENT)).collect()
}

/// Covariance `Σ_ij = ε δ_ij + σ cos(ω (s_i - s_j))` on the grid of
/// [`kernel_grid`].
pub fn experiment_covariance(q: usize, eps: f64, sigma: f64, omega: f64) -> Result<DMatrix<f64>> {
    if q == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("ε must be positive, got {eps}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("σ must be positive, got {sigma}")));
    }
    if !omega.is_finite() {
        return Err(Error::Domain(format!("ω must be finite, got {omega}")));
    }
    let s = kernel_grid(q);
    Ok(DMatrix::from_fn(q, q, |i, j| {
        let ridge = if i == j { eps } else { 0.0 };
        ridge + sigma * (omega * (s[i] - s[j])).cos()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use nalgebra::SymmetricEigen;

    #[test]
    fn true_model_diagonal() {
        let m = experiment_covariance(15, 0.01, 1.0, 5.652).unwrap();
        for i in 0..15 {
            assert!((m[(i, i)] - 1.01).abs() < 1e-15);
        }
        assert_eq!(linalg::max_asymmetry(&m), 0.0);
        assert!(linalg::min_eigenvalue(&m) > 0.0);
    }

    #[test]
    fn zero_frequency_is_rank_one_plus_ridge() {
        let (q, eps, sigma) = (6, 0.1, 2.0);
        let m = experiment_covariance(q, eps, sigma, 0.0).unwrap();
        let mut eig: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        for &e in &eig[..q - 1] {
            assert!((e - eps).abs() < 1e-12);
        }
        assert!((eig[q - 1] - (eps + q as f64 * sigma)).abs() < 1e-12);
    }

    #[test]
    fn positive_definite_over_parameter_sweep() {
        for &eps in &[1e-3, 0.01, 0.5] {
            for &sigma in &[0.1, 1.0, 5.0] {
                for &omega in &[0.0, 1.0, 5.652, 30.0] {
                    let m = experiment_covariance(15, eps, sigma, omega).unwrap();
                    assert!(linalg::check_spd(&m).is_ok());
                }
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(experiment_covariance(3, 0.0, 1.0, 1.0).is_err());
        assert!(experiment_covariance(3, 0.1, -1.0, 1.0).is_err());
        assert!(experiment_covariance(0, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let s = kernel_grid(15);
        assert_eq!(s[0], 0.0);
        assert!((s[14] - 1.0).abs() < 1e-15);
        assert!(((1.0_f64 / 14.0).powf(1.1) - s[1]).abs() < 1e-15);
    }
}
