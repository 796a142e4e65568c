//! Exact optimal transport between weighted point clouds.
//!
//! Equal-weight square problems use an assignment solver, general weights
//! a transportation simplex, and one-dimensional clouds the monotone
//! (sorted) coupling. Entropic Sinkhorn is available only on request.

mod hungarian;
mod network_simplex;
mod sinkhorn;

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

/// Marginal tolerance of a valid [`CouplingPlan`].
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Monotone,
    Assignment,
    NetworkSimplex,
    Sinkhorn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOtConfig {
    /// Largest `n = m` handed to the assignment solver.
    pub assignment_cap: usize,
    /// Largest `n · m` handed to the transportation simplex.
    pub simplex_cap: usize,
    /// Use the sorted coupling for one-dimensional clouds.
    pub monotone_1d: bool,
    /// Entropic regularization, relative to the largest cost. When set,
    /// problems beyond both caps fall back to Sinkhorn instead of failing.
    pub sinkhorn_eps: Option<f64>,
    pub max_pivots: usize,
}

impl Default for DiscreteOtConfig {
    fn default() -> Self {
        Self {
            assignment_cap: 512,
            simplex_cap: 100_000,
            monotone_1d: true,
            sinkhorn_eps: None,
            max_pivots: 10_000_000,
        }
    }
}

/// Sparse coupling between two clouds, stored as (row, col, mass) triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPlan {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CouplingPlan {
    /// Validates nonnegativity and both marginals within [`MARGINAL_TOL`].
    pub fn new(src: &DiscreteMeasure, dst: &DiscreteMeasure, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let (rows, cols) = (src.len(), dst.len());
        let mut row_sum = vec![0.0; rows];
        let mut col_sum = vec![0.0; cols];
        for &(i, j, x) in &entries {
            if i >= rows || j >= cols {
                return Err(Error::InvalidArgument(format!("plan entry ({i}, {j}) outside {rows} x {cols}")));
            }
            if !(x >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative plan mass {x} at ({i}, {j})")));
            }
            row_sum[i] += x;
            col_sum[j] += x;
        }
        let row_err = row_sum.iter().zip(src.weights().iter()).map(|(s, w)| (s - w).abs()).fold(0.0, f64::max);
        let col_err = col_sum.iter().zip(dst.weights().iter()).map(|(s, w)| (s - w).abs()).fold(0.0, f64::max);
        if row_err.max(col_err) > MARGINAL_TOL {
            return Err(Error::Numerical(format!(
                "coupling marginals violated: rows {row_err:.3e}, columns {col_err:.3e}"
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, x) in &self.entries {
            d[(i, j)] += x;
        }
        d
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows];
        self.entries.iter().for_each(|&(i, _, x)| s[i] += x);
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        self.entries.iter().for_each(|&(_, j, x)| s[j] += x);
        s
    }

    /// COO-triplet CSV with header `row,col,mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "mass"])?;
        for &(i, j, x) in &self.entries {
            w.write_record([i.to_string(), j.to_string(), format!("{x:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct OtSolution {
    pub plan: CouplingPlan,
    /// `Σ γ_ij ‖x_i - y_j‖^p`.
    pub cost: f64,
    /// `cost^{1/p}`.
    pub distance: f64,
    pub solver: Solver,
}

fn ground_cost(src: &DiscreteMeasure, dst: &DiscreteMeasure, p: f64) -> Vec<f64> {
    let (x, y) = (src.points(), dst.points());
    let (n, m, d) = (x.nrows(), y.nrows(), x.ncols());
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..d {
                let t = x[(i, k)] - y[(j, k)];
                s += t * t;
            }
            c[i * m + j] = if p == 2.0 { s } else { s.sqrt().powf(p) };
        }
    }
    c
}

fn pair_cost(src: &DiscreteMeasure, dst: &DiscreteMeasure, i: usize, j: usize, p: f64) -> f64 {
    let s = (src.points().row(i) - dst.points().row(j)).norm_squared();
    if p == 2.0 {
        s
    } else {
        s.sqrt().powf(p)
    }
}

fn monotone_1d(src: &DiscreteMeasure, dst: &DiscreteMeasure) -> Vec<(usize, usize, f64)> {
    let order = |m: &DiscreteMeasure| {
        let mut idx: Vec<usize> = (0..m.len()).collect();
        idx.sort_by(|&a, &b| m.points()[(a, 0)].total_cmp(&m.points()[(b, 0)]));
        idx
    };
    let (oa, ob) = (order(src), order(dst));
    let (wa, wb) = (src.weights(), dst.weights());
    if src.len() == dst.len() && src.has_uniform_weights() && dst.has_uniform_weights() {
        let mass = 1.0 / src.len() as f64;
        return oa.iter().zip(&ob).map(|(&i, &j)| (i, j, mass)).collect();
    }
    let mut entries = Vec::with_capacity(src.len() + dst.len());
    let (mut s, mut t) = (0, 0);
    let (mut ra, mut rb) = (wa[oa[0]], wb[ob[0]]);
    while s < oa.len() && t < ob.len() {
        let x = ra.min(rb);
        if x > 0.0 {
            entries.push((oa[s], ob[t], x));
        }
        ra -= x;
        rb -= x;
        if ra <= rb {
            s += 1;
            if s < oa.len() {
                ra = wa[oa[s]];
            }
        } else {
            t += 1;
            if t < ob.len() {
                rb = wb[ob[t]];
            }
        }
    }
    entries
}

/// Exact `W_p` between two clouds with the default configuration.
pub fn discrete_ot(src: &DiscreteMeasure, dst: &DiscreteMeasure, p: f64) -> Result<OtSolution> {
    discrete_ot_with(src, dst, p, &DiscreteOtConfig::default())
}

pub fn discrete_ot_with(src: &DiscreteMeasure, dst: &DiscreteMeasure, p: f64, cfg: &DiscreteOtConfig) -> Result<OtSolution> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("Wasserstein order must be at least 1, got {p}")));
    }
    if src.dim() != dst.dim() {
        return Err(Error::DimensionMismatch { expected: src.dim(), got: dst.dim() });
    }
    let (n, m) = (src.len(), dst.len());
    let equal = n == m && src.has_uniform_weights() && dst.has_uniform_weights();
    let (entries, solver) = if cfg.monotone_1d && src.dim() == 1 {
        (monotone_1d(src, dst), Solver::Monotone)
    } else if equal && n <= cfg.assignment_cap {
        let cost = ground_cost(src, dst, p);
        let assignment = hungarian::solve(&cost, n);
        let mass = 1.0 / n as f64;
        (assignment.into_iter().enumerate().map(|(i, j)| (i, j, mass)).collect(), Solver::Assignment)
    } else if n * m <= cfg.simplex_cap {
        let cost = ground_cost(src, dst, p);
        let a: Vec<f64> = src.weights().iter().copied().collect();
        let b: Vec<f64> = dst.weights().iter().copied().collect();
        (network_simplex::solve(&cost, &a, &b, cfg.max_pivots)?, Solver::NetworkSimplex)
    } else if let Some(rel_eps) = cfg.sinkhorn_eps {
        let cost = ground_cost(src, dst, p);
        let scale = cost.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let a: Vec<f64> = src.weights().iter().copied().collect();
        let b: Vec<f64> = dst.weights().iter().copied().collect();
        let dense = sinkhorn::solve(&cost, &a, &b, rel_eps * scale, MARGINAL_TOL / 10.0, 100_000)?;
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(k, &x)| (k / m, k % m, x))
            .collect();
        (entries, Solver::Sinkhorn)
    } else {
        let cap = if equal { cfg.assignment_cap * cfg.assignment_cap } else { cfg.simplex_cap };
        return Err(Error::SizeCap { size: n * m, cap: cap.max(cfg.simplex_cap) });
    };
    let plan = CouplingPlan::new(src, dst, entries)?;
    let cost: f64 = plan.entries().iter().map(|&(i, j, x)| x * pair_cost(src, dst, i, j, p)).sum();
    let cost = cost.max(0.0);
    Ok(OtSolution { plan, distance: cost.powf(1.0 / p), cost, solver })
}

/// Uniform subsample of `cap` points without replacement, or the cloud
/// itself when it is already small enough. Weights are reset to uniform.
pub fn subsample<R: Rng + ?Sized>(cloud: &DiscreteMeasure, cap: usize, rng: &mut R) -> Result<DiscreteMeasure> {
    if cloud.len() <= cap {
        return Ok(cloud.clone());
    }
    let mut idx = sample(rng, cloud.len(), cap).into_vec();
    idx.sort_unstable();
    let points = DMatrix::from_fn(cap, cloud.dim(), |r, c| cloud.points()[(idx[r], c)]);
    DiscreteMeasure::uniform(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud(xs: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(DMatrix::from_column_slice(xs.len(), 1, xs)).unwrap()
    }

    fn general() -> DiscreteOtConfig {
        DiscreteOtConfig { monotone_1d: false, ..Default::default() }
    }

    #[test]
    fn identical_clouds_cost_zero() {
        let a = cloud(&[0.3, -1.0, 2.0]);
        for cfg in [DiscreteOtConfig::default(), general()] {
            let s = discrete_ot_with(&a, &a, 2.0, &cfg).unwrap();
            assert_eq!(s.cost, 0.0);
            assert!(s.plan.entries().iter().all(|&(i, j, _)| i == j));
        }
    }

    #[test]
    fn two_point_monotone_matching() {
        let a = cloud(&[0.0, 2.0]);
        let b = cloud(&[3.0, 1.0]);
        for cfg in [DiscreteOtConfig::default(), general()] {
            let s = discrete_ot_with(&a, &b, 2.0, &cfg).unwrap();
            assert!((s.cost - 1.0).abs() < 1e-15);
            assert!((s.distance - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn solver_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = |n: usize, rng: &mut ChaCha8Rng| DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let a = DiscreteMeasure::uniform(pts(20, &mut rng)).unwrap();
        let b = DiscreteMeasure::uniform(pts(20, &mut rng)).unwrap();
        let c = DiscreteMeasure::uniform(pts(13, &mut rng)).unwrap();
        assert_eq!(discrete_ot(&a, &b, 2.0).unwrap().solver, Solver::Assignment);
        let s = discrete_ot(&a, &c, 2.0).unwrap();
        assert_eq!(s.solver, Solver::NetworkSimplex);
        let big = DiscreteMeasure::uniform(pts(600, &mut rng)).unwrap();
        assert!(matches!(discrete_ot(&big, &big, 2.0), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn simplex_matches_assignment_on_square_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let n = 2 + rng.random_range(0..30);
            let a = DiscreteMeasure::uniform(DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>())).unwrap();
            let b = DiscreteMeasure::uniform(DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>())).unwrap();
            let h = discrete_ot(&a, &b, 2.0).unwrap();
            let cfg = DiscreteOtConfig { assignment_cap: 0, ..Default::default() };
            let s = discrete_ot_with(&a, &b, 2.0, &cfg).unwrap();
            assert_eq!(s.solver, Solver::NetworkSimplex);
            assert!((h.cost - s.cost).abs() < 1e-12 * h.cost.max(1.0), "{} vs {}", h.cost, s.cost);
        }
    }

    #[test]
    fn weighted_1d_matches_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (n, m) = (1 + rng.random_range(0..8), 1 + rng.random_range(0..8));
            let w = |k: usize, rng: &mut ChaCha8Rng| {
                let v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
                let s: f64 = v.iter().sum();
                DVector::from_iterator(k, v.into_iter().map(|x| x / s))
            };
            let a = DiscreteMeasure::new(DMatrix::from_fn(n, 1, |_, _| rng.random::<f64>() * 4.0), w(n, &mut rng)).unwrap();
            let b = DiscreteMeasure::new(DMatrix::from_fn(m, 1, |_, _| rng.random::<f64>() * 4.0), w(m, &mut rng));
            let Ok(b) = b else { continue };
            for p in [1.0, 2.0, 3.0] {
                let mono = discrete_ot(&a, &b, p).unwrap();
                let simplex = discrete_ot_with(&a, &b, p, &general()).unwrap();
                assert!((mono.cost - simplex.cost).abs() < 1e-10, "p={p}: {} vs {}", mono.cost, simplex.cost);
            }
        }
    }

    #[test]
    fn sinkhorn_is_opt_in() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DiscreteMeasure::uniform(DMatrix::from_fn(8, 2, |_, _| rng.random::<f64>())).unwrap();
        let b = DiscreteMeasure::uniform(DMatrix::from_fn(8, 2, |_, _| rng.random::<f64>())).unwrap();
        let cfg = DiscreteOtConfig { assignment_cap: 0, simplex_cap: 0, sinkhorn_eps: Some(0.1), ..general() };
        let s = discrete_ot_with(&a, &b, 2.0, &cfg).unwrap();
        assert_eq!(s.solver, Solver::Sinkhorn);
        let exact = discrete_ot(&a, &b, 2.0).unwrap();
        assert!(s.cost >= exact.cost - 1e-12);
        assert!(s.cost < exact.cost + 0.2);
    }

    #[test]
    fn csv_export() {
        let a = cloud(&[0.0, 1.0]);
        let b = cloud(&[1.0, 0.0]);
        let s = discrete_ot(&a, &b, 2.0).unwrap();
        let mut buf = Vec::new();
        s.plan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("row,col,mass\n"));
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("0,1,5e-1") && text.contains("1,0,5e-1"));
    }

    #[test]
    fn plan_validation() {
        let a = cloud(&[0.0, 1.0]);
        assert!(CouplingPlan::new(&a, &a, vec![(0, 0, 0.5)]).is_err());
        assert!(CouplingPlan::new(&a, &a, vec![(0, 0, 0.5), (1, 1, 0.5)]).is_ok());
        assert!(CouplingPlan::new(&a, &a, vec![(0, 0, 0.5), (1, 2, 0.5)]).is_err());
    }

    #[test]
    fn subsample_caps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let big = cloud(&(0..1000).map(|i| i as f64).collect::<Vec<_>>());
        let s = subsample(&big, 512, &mut rng).unwrap();
        assert_eq!(s.len(), 512);
        assert!(s.has_uniform_weights());
    }
}
