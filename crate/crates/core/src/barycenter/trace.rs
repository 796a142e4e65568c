use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::measures::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub gamma: f64,
    /// Estimate of `F(μ) = ½ ∫ W₂²(μ, m) Π(dm)`.
    pub f_est: f64,
    /// Estimate of `‖F′(μ)‖²`.
    pub gradnorm_est: f64,
    pub wall_ms: f64,
}

/// Per-iteration diagnostics of a descent run.
#[derive(Debug, Clone, Default)]
pub struct DescentTrace {
    pub rows: Vec<TraceRow>,
    /// Thinned iterates `(iter, model)`, when requested.
    pub iterates: Vec<(usize, Model)>,
    pub converged: bool,
}

impl DescentTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last_risk(&self) -> Option<f64> {
        self.rows.last().map(|r| r.f_est)
    }

    /// CSV with columns `iter,gamma,F_est,gradnorm_est,wall_ms`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "gamma", "F_est", "gradnorm_est", "wall_ms"])?;
        for r in &self.rows {
            w.write_record([
                r.iter.to_string(),
                r.gamma.to_string(),
                r.f_est.to_string(),
                r.gradnorm_est.to_string(),
                format!("{:.3}", r.wall_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
