use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::barycenter::FiniteModels;
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Model};

/// The model average `m̄ = Σ λ_i m_i` of a finite distribution over models.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    components: FiniteModels,
}

pub fn model_average(pi: &FiniteModels) -> MixtureModel {
    MixtureModel { components: pi.clone() }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

impl MixtureModel {
    pub fn components(&self) -> &FiniteModels {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.support()[0].dim()
    }

    pub fn ln_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.components.len());
        for (w, m) in self.components.members() {
            if w > 0.0 {
                let lp = m.ln_pdf(x).ok_or_else(|| no_density(m))?;
                terms.push(w.ln() + lp);
            }
        }
        Ok(log_sum_exp(terms.into_iter()))
    }

    pub fn pdf(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.ln_pdf(x)?.exp())
    }

    pub fn mean(&self) -> Result<DVector<f64>> {
        let mut acc = DVector::zeros(self.dim());
        for (w, m) in self.components.members() {
            acc += m.mean().ok_or_else(|| no_moment(m))? * w;
        }
        Ok(acc)
    }

    /// `Σ λ_i (C_i + b_i b_iᵀ) - b̄ b̄ᵀ`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let q = self.dim();
        let mut acc = DMatrix::zeros(q, q);
        for (w, m) in self.components.members() {
            let b = m.mean().ok_or_else(|| no_moment(m))?;
            acc += (m.covariance().ok_or_else(|| no_moment(m))? + &b * b.transpose()) * w;
        }
        let mean = self.mean()?;
        Ok(acc - &mean * mean.transpose())
    }

    /// `E‖X‖²`.
    pub fn second_moment(&self) -> Result<f64> {
        let mut acc = 0.0;
        for (w, m) in self.components.members() {
            acc += w * m.second_moment().ok_or_else(|| no_moment(m))?;
        }
        Ok(acc)
    }

    /// Hierarchical sampling: a component by weight, then a draw from it.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let pick = WeightedIndex::new(self.components.weights()).map_err(|e| Error::InvalidWeights(e.to_string()))?;
        let mut pts = DMatrix::zeros(n, self.dim());
        for i in 0..n {
            let m = &self.components.support()[pick.sample(rng)];
            pts.set_row(i, &m.sample(1, rng)?.points().row(0));
        }
        DiscreteMeasure::uniform(pts)
    }
}

fn no_density(m: &Model) -> Error {
    Error::InvalidArgument(format!("{} models have no closed-form density", m.family()))
}

fn no_moment(m: &Model) -> Error {
    Error::InvalidArgument(format!("{} model lacks finite first or second moments", m.family()))
}

/// A normalised density on a rectangular grid in one or two dimensions.
#[derive(Debug, Clone)]
pub struct DensityTable {
    pub axes: Vec<Vec<f64>>,
    /// Row-major over the axes (last axis fastest).
    pub values: Vec<f64>,
    /// Normalising constant of the unnormalised average.
    pub z: f64,
}

/// Trapezoid weights for a strictly increasing axis.
fn trapezoid(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
            let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

fn grid_points(axes: &[Vec<f64>]) -> (Vec<DVector<f64>>, Vec<f64>) {
    let w: Vec<Vec<f64>> = axes.iter().map(|a| trapezoid(a)).collect();
    match axes {
        [x] => (x.iter().map(|&v| DVector::from_element(1, v)).collect(), w[0].clone()),
        [x, y] => {
            let mut pts = Vec::with_capacity(x.len() * y.len());
            let mut ws = Vec::with_capacity(x.len() * y.len());
            for (i, &xi) in x.iter().enumerate() {
                for (j, &yj) in y.iter().enumerate() {
                    pts.push(DVector::from_vec(vec![xi, yj]));
                    ws.push(w[0][i] * w[1][j]);
                }
            }
            (pts, ws)
        }
        _ => unreachable!("checked dimension"),
    }
}

impl DensityTable {
    /// Trapezoid integral of the table.
    pub fn integral(&self) -> f64 {
        let (_, w) = grid_points(&self.axes);
        w.iter().zip(&self.values).map(|(a, b)| a * b).sum()
    }

    /// Value at grid index `(i)` or `(i, j)`.
    pub fn at(&self, idx: &[usize]) -> f64 {
        match idx {
            [i] => self.values[*i],
            [i, j] => self.values[i * self.axes[1].len() + j],
            _ => panic!("index must have one or two entries"),
        }
    }
}

fn density_average(
    pi: &FiniteModels,
    axes: &[Vec<f64>],
    combine: impl Fn(&[(f64, f64)]) -> f64,
) -> Result<DensityTable> {
    let q = pi.support()[0].dim();
    if !(1..=2).contains(&axes.len()) || axes.len() != q {
        return Err(Error::InvalidArgument(format!(
            "density tables need a 1-D or 2-D grid matching the model dimension {q}"
        )));
    }
    for a in axes {
        if a.len() < 2 || a.windows(2).any(|w| !(w[1] > w[0])) || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid axes must be strictly increasing with ≥ 2 points".into()));
        }
    }
    let (pts, w) = grid_points(axes);
    let members = pi.members();
    let mut values = Vec::with_capacity(pts.len());
    let mut parts = Vec::with_capacity(members.len());
    for x in &pts {
        parts.clear();
        for &(lam, m) in &members {
            if lam > 0.0 {
                parts.push((lam, m.ln_pdf(x).ok_or_else(|| no_density(m))?));
            }
        }
        values.push(combine(&parts));
    }
    let z: f64 = w.iter().zip(&values).map(|(a, b)| a * b).sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Numerical(format!("model average normaliser {z} on the grid")));
    }
    values.iter_mut().for_each(|v| *v /= z);
    Ok(DensityTable { axes: axes.to_vec(), values, z })
}

/// `m̂_exp ∝ exp(Σ λ_i ln m_i)` tabulated on `axes`, normalised by
/// trapezoid quadrature. Points where some density vanishes get 0.
pub fn exponential_model_average(pi: &FiniteModels, axes: &[Vec<f64>]) -> Result<DensityTable> {
    density_average(pi, axes, |parts| {
        let s: f64 = parts.iter().map(|(w, lp)| w * lp).sum();
        if s.is_nan() {
            0.0
        } else {
            s.exp()
        }
    })
}

/// `m̂₂ ∝ (Σ λ_i √m_i)²` tabulated on `axes`.
pub fn square_model_average(pi: &FiniteModels, axes: &[Vec<f64>]) -> Result<DensityTable> {
    density_average(pi, axes, |parts| parts.iter().map(|(w, lp)| w * (0.5 * lp).exp()).sum::<f64>().powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_ls_model, Generator, UnivariateModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn n(m: f64, s: f64) -> Model {
        UnivariateModel::normal(m, s).unwrap().into()
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    fn x(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn point_mass_average_is_the_model() {
        let m = n(0.5, 2.0);
        let mix = model_average(&FiniteModels::uniform(vec![m.clone()]).unwrap());
        for v in [-3.0, 0.0, 1.7] {
            assert!((mix.ln_pdf(&x(v)).unwrap() - m.ln_pdf(&x(v)).unwrap()).abs() < 1e-14);
        }
        let pi = FiniteModels::uniform(vec![m.clone()]).unwrap();
        let ax = vec![axis(-12.0, 13.0, 4001)];
        for t in [exponential_model_average(&pi, &ax).unwrap(), square_model_average(&pi, &ax).unwrap()] {
            assert!((t.z - 1.0).abs() < 1e-6);
            for i in [100, 2000, 3500] {
                assert!((t.at(&[i]) - m.ln_pdf(&x(ax[0][i])).unwrap().exp()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gaussian_pair_mixture() {
        let pi = FiniteModels::uniform(vec![n(1.0, 1.0), n(3.0, 1.0)]).unwrap();
        let mix = model_average(&pi);
        assert!((mix.mean().unwrap()[0] - 2.0).abs() < 1e-15);
        assert!((mix.covariance().unwrap()[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((mix.second_moment().unwrap() - 6.0).abs() < 1e-14);
        // Separation equal to twice the sd: a single flat-topped mode.
        let p = |v: f64| mix.pdf(&x(v)).unwrap();
        assert!(p(2.0) > p(1.0) && p(2.0) > p(3.0));
        let gauss = n(2.0, 2f64.sqrt());
        assert!((p(2.0) - gauss.ln_pdf(&x(2.0)).unwrap().exp()).abs() > 1e-2);
        let wide = model_average(&FiniteModels::uniform(vec![n(0.0, 1.0), n(4.0, 1.0)]).unwrap());
        let w = |v: f64| wide.pdf(&x(v)).unwrap();
        assert!(w(0.1) > w(2.0) && w(3.9) > w(2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = mix.sample(20_000, &mut rng).unwrap();
        assert!((s.mean()[0] - 2.0).abs() < 0.05);
        assert!((s.covariance()[(0, 0)] - 2.0).abs() < 0.1);
    }

    #[test]
    fn exponential_average_of_shifted_gaussians() {
        let pi = FiniteModels::uniform(vec![n(0.0, 1.0), n(2.0, 1.0)]).unwrap();
        let ax = vec![axis(-10.0, 12.0, 4401)];
        let t = exponential_model_average(&pi, &ax).unwrap();
        let target = n(1.0, 1.0);
        let err = ax[0].iter().enumerate().map(|(i, &v)| (t.at(&[i]) - target.ln_pdf(&x(v)).unwrap().exp()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!((t.z - (-0.5f64).exp()).abs() < 1e-6);
        assert!(t.z < 1.0);
        assert!((t.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_average_is_unimodal_and_normalised() {
        let pi = FiniteModels::uniform(vec![n(0.0, 1.0), n(2.0, 1.0)]).unwrap();
        let ax = vec![axis(-10.0, 12.0, 4401)];
        let t = square_model_average(&pi, &ax).unwrap();
        assert!((t.integral() - 1.0).abs() < 1e-6);
        let phi = |m: f64, v: f64| (-(v - m).powi(2) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let raw = |v: f64| (0.5 * phi(0.0, v).sqrt() + 0.5 * phi(2.0, v).sqrt()).powi(2);
        let z = 0.5 + 0.5 * (-0.5f64).exp();
        for (i, &v) in ax[0].iter().enumerate().step_by(97) {
            assert!((t.at(&[i]) - raw(v) / z).abs() < 1e-6);
        }
        let argmax = (0..t.values.len()).max_by(|&a, &b| t.values[a].total_cmp(&t.values[b])).unwrap();
        assert!((ax[0][argmax] - 1.0).abs() < 1e-2);
        assert!(t.values[..argmax].windows(2).all(|w| w[1] >= w[0]));
        assert!(t.values[argmax..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn two_dimensional_table() {
        let g = Arc::new(Generator::gaussian(2).unwrap());
        let m = |b: [f64; 2]| -> Model {
            make_ls_model(g.clone(), DVector::from_row_slice(&b), DMatrix::identity(2, 2)).unwrap().into()
        };
        let pi = FiniteModels::uniform(vec![m([0.0, 0.0]), m([2.0, 0.0])]).unwrap();
        let ax = vec![axis(-8.0, 10.0, 301), axis(-9.0, 9.0, 301)];
        let t = exponential_model_average(&pi, &ax).unwrap();
        assert!((t.z - (-0.5f64).exp()).abs() < 1e-4);
        assert!(exponential_model_average(&pi, &ax[..1]).is_err());
    }
}
