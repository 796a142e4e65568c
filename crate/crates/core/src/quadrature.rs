//! Gauss–Legendre rules on the unit interval, used for quantile integrals.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of nodes in the default rule on (0, 1).
pub const DEFAULT_NODES: usize = 2048;

/// Lower/upper probability clip used for heavy-tailed integrands.
pub const HEAVY_TAIL_CLIP: f64 = 1e-5;

/// A quadrature rule: nodes with positive weights.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Affine image of a rule on [-1, 1] onto [a, b].
    fn mapped(base: &Rule, a: f64, b: f64) -> Rule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Rule {
            nodes: base.nodes.iter().map(|x| mid + half * x).collect(),
            weights: base.weights.iter().map(|w| half * w).collect(),
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the three-term recurrence. Nodes are returned in increasing order.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// Value and derivative of the Legendre polynomial of degree `n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Halvings toward each endpoint in the graded rule on (0, 1).
const GRADING_DEPTH: u32 = 40;

/// Composite Gauss–Legendre rule on `[lo, 1 - lo]` with panels graded
/// geometrically toward both endpoints: `[2^-(k+1), 2^-k]` for `k ≥ 1` until
/// `lo` (or depth [`GRADING_DEPTH`]) is reached, mirrored on the upper half.
/// About `total` nodes are spread evenly over the panels, which keeps
/// quantile integrands with endpoint singularities at full accuracy.
pub fn graded_unit_rule(total: usize, lo: f64) -> Rule {
    let mut edges = vec![0.5];
    let mut k = 1;
    loop {
        let e = 0.5_f64.powi(k as i32 + 1);
        if e <= lo || k > GRADING_DEPTH {
            edges.push(lo);
            break;
        }
        edges.push(e);
        k += 1;
    }
    let panels = edges.len() - 1;
    let order = (total / (2 * panels)).max(2);
    let base = gauss_legendre(order);
    let mut lower: Vec<(f64, f64)> = Vec::with_capacity(panels * order);
    for w in edges.windows(2).rev() {
        let r = Rule::mapped(&base, w[1], w[0]);
        lower.extend(r.nodes.into_iter().zip(r.weights));
    }
    let mut nodes: Vec<f64> = lower.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = lower.iter().map(|p| p.1).collect();
    for &(x, w) in lower.iter().rev() {
        nodes.push(1.0 - x);
        weights.push(w);
    }
    Rule { nodes, weights }
}

/// The default rule on (0, 1).
pub fn unit_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| graded_unit_rule(DEFAULT_NODES, 0.0))
}

/// The default rule on the clipped interval
/// `[HEAVY_TAIL_CLIP, 1 - HEAVY_TAIL_CLIP]`.
pub fn clipped_unit_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| graded_unit_rule(DEFAULT_NODES, HEAVY_TAIL_CLIP))
}

/// Half-size companion of [`unit_rule`] or [`clipped_unit_rule`], used for
/// error estimates.
pub fn coarse_unit_rule(clipped: bool) -> &'static Rule {
    static FULL: OnceLock<Rule> = OnceLock::new();
    static CLIPPED: OnceLock<Rule> = OnceLock::new();
    if clipped {
        CLIPPED.get_or_init(|| graded_unit_rule(DEFAULT_NODES / 2, HEAVY_TAIL_CLIP))
    } else {
        FULL.get_or_init(|| graded_unit_rule(DEFAULT_NODES / 2, 0.0))
    }
}

/// Rule of arbitrary size on [a, b].
pub fn rule_on(n: usize, a: f64, b: f64) -> Rule {
    Rule::mapped(&gauss_legendre(n), a, b)
}
