//! Transportation simplex on a spanning-tree basis.
//!
//! Nodes `0..n` are sources and `n..n+m` are sinks. The basis always holds
//! `n + m - 1` cells forming a spanning tree; degenerate pivots are allowed.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

struct Tree {
    n: usize,
    m: usize,
    /// Basic cells as (source, sink).
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// Incident basic cell indices per node.
    adj: Vec<Vec<usize>>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
}

impl Tree {
    fn other(&self, cell: usize, node: usize) -> usize {
        let (i, j) = self.cells[cell];
        if node == i {
            self.n + j
        } else {
            i
        }
    }

    fn cost(&self, cost: &[f64], cell: usize) -> f64 {
        let (i, j) = self.cells[cell];
        cost[i * self.m + j]
    }

    /// Potentials `u_i + v_j = c_ij` on basic cells, with `u_0 = 0`, plus
    /// parent pointers and depths rooted at source 0.
    fn refresh(&mut self, cost: &[f64]) {
        let total = self.n + self.m;
        self.parent_cell.iter_mut().for_each(|p| *p = NONE);
        let mut seen = vec![false; total];
        let mut queue = VecDeque::with_capacity(total);
        self.potential[0] = 0.0;
        self.depth[0] = 0;
        seen[0] = true;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for k in 0..self.adj[node].len() {
                let cell = self.adj[node][k];
                let next = self.other(cell, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                self.potential[next] = self.cost(cost, cell) - self.potential[node];
                self.parent_cell[next] = cell;
                self.depth[next] = self.depth[node] + 1;
                queue.push_back(next);
            }
        }
    }

    /// Cells on the tree path from `from` to `to`, in order.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let (mut a, mut b) = (from, to);
        let mut head = Vec::new();
        let mut tail = Vec::new();
        while self.depth[a] > self.depth[b] {
            let c = self.parent_cell[a];
            head.push(c);
            a = self.other(c, a);
        }
        while self.depth[b] > self.depth[a] {
            let c = self.parent_cell[b];
            tail.push(c);
            b = self.other(c, b);
        }
        while a != b {
            let ca = self.parent_cell[a];
            head.push(ca);
            a = self.other(ca, a);
            let cb = self.parent_cell[b];
            tail.push(cb);
            b = self.other(cb, b);
        }
        head.extend(tail.into_iter().rev());
        head
    }

    fn remove_cell(&mut self, cell: usize) {
        let (i, j) = self.cells[cell];
        let sink = self.n + j;
        self.adj[i].retain(|&c| c != cell);
        self.adj[sink].retain(|&c| c != cell);
    }

    fn add_cell(&mut self, cell: usize) {
        let (i, j) = self.cells[cell];
        self.adj[i].push(cell);
        self.adj[self.n + j].push(cell);
    }
}

fn northwest_corner(a: &[f64], b: &[f64]) -> (Vec<(usize, usize)>, Vec<f64>) {
    let (n, m) = (a.len(), b.len());
    let mut cells = Vec::with_capacity(n + m - 1);
    let mut flow = Vec::with_capacity(n + m - 1);
    let (mut ra, mut rb) = (a[0], b[0]);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = ra.min(rb).max(0.0);
        cells.push((i, j));
        flow.push(x);
        if i == n - 1 && j == m - 1 {
            break;
        }
        ra -= x;
        rb -= x;
        // advance exactly one index per cell so the basis stays a tree
        if (ra <= rb && i < n - 1) || j == m - 1 {
            i += 1;
            ra = a[i];
        } else {
            j += 1;
            rb = b[j];
        }
    }
    (cells, flow)
}

/// Exact flows of a basis tree for the given marginals, by leaf
/// elimination. Tiny negative values from rounding are clamped to zero.
fn tree_flows(tree: &Tree, a: &[f64], b: &[f64]) -> Vec<f64> {
    let (n, m) = (tree.n, tree.m);
    let mut residual: Vec<f64> = a.iter().copied().chain(b.iter().copied()).collect();
    let mut degree: Vec<usize> = tree.adj.iter().map(Vec::len).collect();
    let mut done = vec![false; tree.cells.len()];
    let mut flow = vec![0.0; tree.cells.len()];
    let mut leaves: Vec<usize> = (0..n + m).filter(|&v| degree[v] == 1).collect();
    while let Some(leaf) = leaves.pop() {
        if degree[leaf] != 1 {
            continue;
        }
        let Some(&cell) = tree.adj[leaf].iter().find(|&&c| !done[c]) else { continue };
        let other = tree.other(cell, leaf);
        let x = residual[leaf].max(0.0);
        flow[cell] = x;
        done[cell] = true;
        residual[leaf] -= x;
        residual[other] -= x;
        degree[leaf] = 0;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
    }
    flow
}

/// Solves `min Σ c_ij x_ij` subject to row sums `a`, column sums `b`,
/// `x ≥ 0`. `cost` is row-major `n × m`. Returns (source, sink, mass)
/// triplets with positive mass.
pub fn solve(cost: &[f64], a: &[f64], b: &[f64], max_pivots: usize) -> Result<Vec<(usize, usize, f64)>> {
    let (n, m) = (a.len(), b.len());
    debug_assert_eq!(cost.len(), n * m);
    let (cells, flow) = northwest_corner(a, b);
    let mut tree = Tree {
        n,
        m,
        cells,
        flow,
        adj: vec![Vec::new(); n + m],
        parent_cell: vec![NONE; n + m],
        depth: vec![0; n + m],
        potential: vec![0.0; n + m],
    };
    for c in 0..tree.cells.len() {
        tree.add_cell(c);
    }
    let scale = cost.iter().fold(0.0_f64, |s, c| s.max(c.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let total = n * m;
    let block = ((total as f64).sqrt() as usize).max(16).min(total);
    let mut next = 0;
    let mut pivots = 0;
    tree.refresh(cost);
    loop {
        // block pricing: most negative reduced cost within the first block
        // that contains any candidate
        let mut best = None;
        let mut best_rc = -tol;
        let mut scanned = 0;
        while scanned < total {
            let end = (scanned + block).min(total);
            for _ in scanned..end {
                let idx = next;
                next = if next + 1 == total { 0 } else { next + 1 };
                let (i, j) = (idx / m, idx % m);
                let rc = cost[idx] - tree.potential[i] - tree.potential[n + j];
                if rc < best_rc {
                    best_rc = rc;
                    best = Some((i, j));
                }
            }
            scanned = end;
            if best.is_some() {
                break;
            }
        }
        let Some((i, j)) = best else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numerical(format!("network simplex exceeded {max_pivots} pivots")));
        }
        // cycle: entering (+), then the tree path sink j → source i alternating (−, +, …)
        let path = tree.path(n + j, i);
        let mut theta = f64::INFINITY;
        let mut leaving = NONE;
        for (k, &c) in path.iter().enumerate() {
            if k % 2 == 0 && tree.flow[c] < theta {
                theta = tree.flow[c];
                leaving = c;
            }
        }
        for (k, &c) in path.iter().enumerate() {
            if k % 2 == 0 {
                tree.flow[c] = (tree.flow[c] - theta).max(0.0);
            } else {
                tree.flow[c] += theta;
            }
        }
        tree.remove_cell(leaving);
        tree.cells[leaving] = (i, j);
        tree.flow[leaving] = theta;
        tree.add_cell(leaving);
        tree.refresh(cost);
    }
    let flow = tree_flows(&tree, a, b);
    Ok(tree
        .cells
        .iter()
        .zip(flow)
        .filter(|(_, x)| *x > 0.0)
        .map(|(&(i, j), x)| (i, j, x))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(cost: &[f64], m: usize, plan: &[(usize, usize, f64)]) -> f64 {
        plan.iter().map(|&(i, j, x)| x * cost[i * m + j]).sum()
    }

    #[test]
    fn classic_instance() {
        // supplies 20, 30, 25; demands 10, 10, 35, 20
        let a = [20.0, 30.0, 25.0];
        let b = [10.0, 10.0, 35.0, 20.0];
        let cost = [2.0, 3.0, 11.0, 7.0, 1.0, 0.0, 6.0, 1.0, 5.0, 8.0, 15.0, 9.0];
        let plan = solve(&cost, &a, &b, 10_000).unwrap();
        // optimum by exhaustive LP reasoning
        let lp = brute_lp(&cost, &a, &b);
        assert!((total(&cost, 4, &plan) - lp).abs() < 1e-9, "{} vs {lp}", total(&cost, 4, &plan));
    }

    /// Enumerates integer plans for tiny integral instances.
    fn brute_lp(cost: &[f64], a: &[f64], b: &[f64]) -> f64 {
        fn rec(cell: usize, n: usize, m: usize, ra: &mut Vec<i64>, rb: &mut Vec<i64>, cost: &[f64], acc: f64, best: &mut f64) {
            if cell == n * m {
                if ra.iter().all(|&x| x == 0) && rb.iter().all(|&x| x == 0) {
                    *best = best.min(acc);
                }
                return;
            }
            let (i, j) = (cell / m, cell % m);
            let hi = ra[i].min(rb[j]);
            let lo = if j == m - 1 { ra[i] } else { 0 };
            if lo > hi {
                return;
            }
            for x in lo..=hi {
                ra[i] -= x;
                rb[j] -= x;
                rec(cell + 1, n, m, ra, rb, cost, acc + x as f64 * cost[cell], best);
                ra[i] += x;
                rb[j] += x;
            }
        }
        let mut ra: Vec<i64> = a.iter().map(|&x| (x / 5.0) as i64).collect();
        let mut rb: Vec<i64> = b.iter().map(|&x| (x / 5.0) as i64).collect();
        let mut best = f64::INFINITY;
        rec(0, a.len(), b.len(), &mut ra, &mut rb, cost, 0.0, &mut best);
        best * 5.0
    }

    #[test]
    fn degenerate_equal_marginals() {
        let a = [0.25; 4];
        let b = [0.25; 4];
        let cost: Vec<f64> = (0..16).map(|k| ((k / 4) as f64 - (3 - k % 4) as f64).powi(2)).collect();
        let plan = solve(&cost, &a, &b, 10_000).unwrap();
        assert!(total(&cost, 4, &plan).abs() < 1e-15);
    }
}
