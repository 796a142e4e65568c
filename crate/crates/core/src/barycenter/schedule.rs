use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step sizes `γ_t`, `t = 1, 2, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `γ_t = a / (t + c)^r`.
    Power { a: f64, c: f64, r: f64 },
    /// Explicit finite sequence; the last value repeats.
    Explicit { steps: Vec<f64> },
}

impl Default for StepSchedule {
    /// `γ_t = 1/t`.
    fn default() -> Self {
        Self::Power { a: 1.0, c: 0.0, r: 1.0 }
    }
}

/// Which of the conditions `Σγ_t = ∞` and `Σγ_t² < ∞` a schedule meets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleConditions {
    pub sum_diverges: bool,
    pub squares_summable: bool,
}

impl ScheduleConditions {
    pub fn both(&self) -> bool {
        self.sum_diverges && self.squares_summable
    }
}

impl StepSchedule {
    pub fn power(a: f64, c: f64, r: f64) -> Result<Self> {
        let s = Self::Power { a, c, r };
        s.validate()?;
        Ok(s)
    }

    pub fn conditions(&self) -> ScheduleConditions {
        match *self {
            Self::Power { r, .. } => ScheduleConditions { sum_diverges: r <= 1.0, squares_summable: r > 0.5 },
            Self::Explicit { ref steps } => {
                let last = steps.last().copied().unwrap_or(0.0);
                ScheduleConditions { sum_diverges: last > 0.0, squares_summable: last == 0.0 }
            }
        }
    }

    /// Checks that every step lies in (0, 1] and, for power rules, that both
    /// step conditions hold (`a > 0`, `c ≥ 0`, `r ∈ (1/2, 1]`).
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Power { a, c, r } => {
                if !(a > 0.0) || !(c >= 0.0) || !a.is_finite() || !c.is_finite() {
                    return Err(Error::InvalidArgument(format!("step rule needs a > 0 and c >= 0, got a={a}, c={c}")));
                }
                if !(r > 0.5 && r <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "step exponent r={r} outside (1/2, 1]: Σγ_t = ∞ and Σγ_t² < ∞ cannot both hold"
                    )));
                }
                if a / (1.0 + c).powf(r) > 1.0 {
                    return Err(Error::InvalidArgument(format!("first step {} exceeds 1", a / (1.0 + c).powf(r))));
                }
                Ok(())
            }
            Self::Explicit { ref steps } => {
                if steps.is_empty() {
                    return Err(Error::Empty("explicit step sequence".into()));
                }
                if let Some(g) = steps.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
                    return Err(Error::InvalidArgument(format!("step {g} outside (0, 1]")));
                }
                Ok(())
            }
        }
    }

    /// `γ_t` for `t ≥ 1`.
    pub fn gamma(&self, t: usize) -> f64 {
        let t = t.max(1);
        match *self {
            Self::Power { a, c, r } => a / (t as f64 + c).powf(r),
            Self::Explicit { ref steps } => steps[(t - 1).min(steps.len() - 1)],
        }
    }
}
