use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::discrete::DiscreteMeasure;
use super::generator::Generator;
use crate::error::{Error, Result};
use crate::linalg::{self, SpdRoots};

/// `L(A x̃ + b)` for a generator `x̃`, location `b` and symmetric positive
/// definite scatter `A = Σ^{1/2}`.
///
/// Closed-form distances and maps treat `Σ` as the covariance, which is
/// exact when the generator is standardized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawLocationScatter", into = "RawLocationScatter")]
pub struct LocationScatterModel {
    generator: Arc<Generator>,
    location: DVector<f64>,
    sigma: DMatrix<f64>,
    roots: SpdRoots,
}

#[derive(Serialize, Deserialize)]
struct RawLocationScatter {
    generator: Generator,
    location: Vec<f64>,
    /// Row-major `Σ`.
    scatter_squared: Vec<Vec<f64>>,
}

impl TryFrom<RawLocationScatter> for LocationScatterModel {
    type Error = Error;

    fn try_from(raw: RawLocationScatter) -> Result<Self> {
        let q = raw.location.len();
        if raw.scatter_squared.len() != q || raw.scatter_squared.iter().any(|r| r.len() != q) {
            return Err(Error::DimensionMismatch { expected: q, got: raw.scatter_squared.len() });
        }
        let sigma = DMatrix::from_fn(q, q, |i, j| raw.scatter_squared[i][j]);
        make_ls_model(Arc::new(raw.generator), DVector::from_vec(raw.location), sigma)
    }
}

impl From<LocationScatterModel> for RawLocationScatter {
    fn from(m: LocationScatterModel) -> Self {
        let q = m.dim();
        Self {
            generator: (*m.generator).clone(),
            location: m.location.iter().copied().collect(),
            scatter_squared: (0..q).map(|i| m.sigma.row(i).iter().copied().collect()).collect(),
        }
    }
}

/// Builds a location-scatter model from its location and `Σ = A²`, storing
/// the principal square root `A`.
pub fn make_ls_model(
    generator: Arc<Generator>,
    location: DVector<f64>,
    sigma: DMatrix<f64>,
) -> Result<LocationScatterModel> {
    let q = generator.dim();
    if location.len() != q {
        return Err(Error::DimensionMismatch { expected: q, got: location.len() });
    }
    if sigma.nrows() != q {
        return Err(Error::DimensionMismatch { expected: q, got: sigma.nrows() });
    }
    if location.iter().any(|v| !v.is_finite()) || sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite model parameters".into()));
    }
    linalg::check_spd(&sigma)?;
    Ok(LocationScatterModel::from_parts(generator, location, sigma))
}

impl LocationScatterModel {
    /// Skips validation; eigenvalues of `sigma` are floored when rooting.
    pub(crate) fn from_parts(generator: Arc<Generator>, location: DVector<f64>, sigma: DMatrix<f64>) -> Self {
        let sigma = linalg::symmetrize(&sigma);
        let roots = SpdRoots::new(&sigma);
        Self { generator, location, sigma, roots }
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    pub fn generator(&self) -> &Arc<Generator> {
        &self.generator
    }

    pub fn location(&self) -> &DVector<f64> {
        &self.location
    }

    /// `Σ = A²`.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// The scatter matrix `A`.
    pub fn scatter(&self) -> &DMatrix<f64> {
        &self.roots.sqrt
    }

    pub fn scatter_inv(&self) -> &DMatrix<f64> {
        &self.roots.inv_sqrt
    }

    pub fn log_det_scatter(&self) -> f64 {
        self.roots.log_det_sqrt
    }

    /// Same generator (by identity or by value).
    pub fn compatible_with(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.generator, &other.generator) || *self.generator == *other.generator
    }

    pub fn ln_pdf(&self, x: &DVector<f64>) -> f64 {
        let z = self.scatter_inv() * (x - &self.location);
        self.generator.ln_pdf(z.as_slice()) - self.log_det_scatter()
    }

    pub fn pdf(&self, x: &DVector<f64>) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        self.scatter() * self.generator.sample(rng) + &self.location
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
        let mut pts = DMatrix::zeros(n, self.dim());
        for i in 0..n {
            pts.set_row(i, &self.sample_one(rng).transpose());
        }
        DiscreteMeasure::uniform(pts)
    }

    /// Model mean (the generator has zero mean).
    pub fn mean(&self) -> &DVector<f64> {
        &self.location
    }

    /// `A C A` with `C` the generator's diagonal covariance.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let c = DMatrix::from_diagonal(&DVector::from_vec(self.generator.variances()?));
        Some(self.scatter() * c * self.scatter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gauss(q: usize) -> Arc<Generator> {
        Arc::new(Generator::gaussian(q).unwrap())
    }

    #[test]
    fn identity_scatter() {
        let m = make_ls_model(gauss(3), DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
        assert!((m.scatter() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn diagonal_scatter() {
        let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let m = make_ls_model(gauss(2), DVector::zeros(2), sigma).unwrap();
        let a = m.scatter();
        assert!((a[(0, 0)] - 2.0).abs() < 1e-14 && (a[(1, 1)] - 3.0).abs() < 1e-14);
        assert!(a[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn correlated_scatter_squares_back() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let m = make_ls_model(gauss(2), DVector::zeros(2), sigma.clone()).unwrap();
        assert!((m.scatter() * m.scatter() - sigma).amax() < 1e-10);
        // eigen oracle: eigenvalues 3 and 1 with eigenvectors (1,1)/√2, (1,-1)/√2
        let expected_00 = 0.5 * (3.0_f64.sqrt() + 1.0);
        let expected_01 = 0.5 * (3.0_f64.sqrt() - 1.0);
        assert!((m.scatter()[(0, 0)] - expected_00).abs() < 1e-12);
        assert!((m.scatter()[(0, 1)] - expected_01).abs() < 1e-12);
    }

    #[test]
    fn non_pd_reports_smallest_eigenvalue() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match make_ls_model(gauss(2), DVector::zeros(2), sigma) {
            Err(Error::NotPositiveDefinite { min_eigenvalue }) => assert!((min_eigenvalue + 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn density_change_of_variables() {
        let g = gauss(1);
        let m = make_ls_model(g, DVector::from_vec(vec![1.0]), DMatrix::from_element(1, 1, 4.0)).unwrap();
        let x = DVector::from_vec(vec![2.0]);
        let expected = -0.5 * 0.25 - 2.0_f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((m.ln_pdf(&x) - expected).abs() < 1e-14);
    }

    #[test]
    fn density_integrates_in_two_dims() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let g = Arc::new(Generator::mixed(2).unwrap());
        let m = make_ls_model(g, DVector::from_vec(vec![0.5, -0.5]), sigma).unwrap();
        let rule = crate::quadrature::rule_on(400, -25.0, 25.0);
        let mut total = 0.0;
        for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
            for (y, wy) in rule.nodes.iter().zip(&rule.weights) {
                total += wx * wy * m.pdf(&DVector::from_vec(vec![*x, *y]));
            }
        }
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn pushforward_moments() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DVector::from_vec(vec![1.0, -2.0]);
        let m = make_ls_model(gauss(2), b.clone(), sigma.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 50_000;
        let s = m.sample(n, &mut rng).unwrap();
        let mean = s.mean();
        for i in 0..2 {
            let band = 3.0 * (sigma[(i, i)] / n as f64).sqrt();
            assert!((mean[i] - b[i]).abs() < band);
        }
        let cov = s.covariance();
        for i in 0..2 {
            for j in 0..2 {
                // var of x_i x_j is at most 3 Σ_ii Σ_jj for Gaussians
                let band = 3.0 * (3.0 * sigma[(i, i)] * sigma[(j, j)] / n as f64).sqrt();
                assert!((cov[(i, j)] - sigma[(i, j)]).abs() < band);
            }
        }
        assert!(s.has_uniform_weights());
    }

    #[test]
    fn json_round_trip() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = make_ls_model(Arc::new(Generator::mixed(2).unwrap()), DVector::from_vec(vec![1.0, 2.0]), sigma).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: LocationScatterModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back.sigma(), m.sigma());
        assert_eq!(back.location(), m.location());
        assert!(back.compatible_with(&m));
    }
}
