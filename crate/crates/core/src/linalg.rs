//! Symmetric positive definite matrix helpers built on a symmetric
//! eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this are clamped when taking matrix roots.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Tolerance for the symmetry check on user-supplied matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Validates that `m` is square, symmetric within [`SYMMETRY_TOL`] (relative
/// to its largest entry) and has strictly positive spectrum.
pub fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let min_eig = min_eigenvalue(m);
    if !(min_eig > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eig });
    }
    Ok(())
}

/// Square root and inverse square root of a symmetric positive definite
/// matrix, sharing one eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpdRoots {
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    /// `log det(sqrt)`, i.e. half the log-determinant of the input.
    pub log_det_sqrt: f64,
    pub min_eigenvalue: f64,
}

impl SpdRoots {
    /// Principal roots of `m`. Eigenvalues below [`EIGEN_FLOOR`] are clamped
    /// with a warning.
    pub fn new(m: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(symmetrize(m));
        let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eigenvalue < EIGEN_FLOOR {
            log::warn!("clamping eigenvalue {min_eigenvalue:.3e} to {EIGEN_FLOOR:.0e}");
        }
        let vals: DVector<f64> = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
        let roots = vals.map(f64::sqrt);
        let sqrt = spectral(&eig.eigenvectors, &roots);
        let inv_sqrt = spectral(&eig.eigenvectors, &roots.map(|r| 1.0 / r));
        let log_det_sqrt = roots.iter().map(|r| r.ln()).sum();
        Self { sqrt, inv_sqrt, log_det_sqrt, min_eigenvalue }
    }
}

fn spectral(vectors: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let scaled = vectors * DMatrix::from_diagonal(values);
    symmetrize(&(scaled * vectors.transpose()))
}

/// Principal PSD square root with eigenvalue clamping.
pub fn sqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| {
        if l < EIGEN_FLOOR {
            if l < -1e-8 * m.amax().max(1.0) {
                log::warn!("clamping negative eigenvalue {l:.3e} in sqrtm");
            }
            EIGEN_FLOOR.sqrt()
        } else {
            l.sqrt()
        }
    });
    spectral(&eig.eigenvectors, &roots)
}

/// Trace of the principal square root, `tr(m^{1/2})`.
pub fn trace_sqrtm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum()
}

/// Lower Cholesky factor for sampling; falls back to the symmetric root for
/// matrices that are only semidefinite.
pub fn sampling_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    match m.clone().cholesky() {
        Some(c) => c.l(),
        None => sqrtm(m),
    }
}
