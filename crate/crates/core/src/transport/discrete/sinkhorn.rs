//! Log-domain Sinkhorn iterations for entropically regularized transport.

use crate::error::{Error, Result};

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Dense plan for `min <c, x> - eps H(x)`; the row marginals are exact and
/// columns are matched to `tol` in l¹ before returning.
pub fn solve(cost: &[f64], a: &[f64], b: &[f64], eps: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let (n, m) = (a.len(), b.len());
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("entropic regularization must be positive, got {eps}")));
    }
    let ln_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let ln_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let plan = |f: &[f64], g: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                x[i * m + j] = ((f[i] + g[j] - cost[i * m + j]) / eps).exp();
            }
        }
        x
    };
    for _ in 0..max_iter {
        for i in 0..n {
            f[i] = eps * ln_a[i] - eps * log_sum_exp((0..m).map(|j| (g[j] - cost[i * m + j]) / eps));
        }
        for j in 0..m {
            g[j] = eps * ln_b[j] - eps * log_sum_exp((0..n).map(|i| (f[i] - cost[i * m + j]) / eps));
        }
        // columns exact now; check rows
        let mut err = 0.0;
        for i in 0..n {
            let row = (0..m).map(|j| (f[i] + g[j] - cost[i * m + j]) / eps);
            err += (log_sum_exp(row).exp() - a[i]).abs();
        }
        if err < tol {
            // one last row update makes rows exact, columns within err
            for i in 0..n {
                f[i] = eps * ln_a[i] - eps * log_sum_exp((0..m).map(|j| (g[j] - cost[i * m + j]) / eps));
            }
            return Ok(plan(&f, &g));
        }
    }
    Err(Error::Numerical(format!("Sinkhorn did not reach marginal tolerance {tol:e} in {max_iter} iterations")))
}
