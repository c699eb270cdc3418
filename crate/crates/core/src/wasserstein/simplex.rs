//! Transportation simplex on a dense cost matrix.
//!
//! The basis is a spanning tree of the bipartite row/column graph with
//! `m + k − 1` cells, initialized by the northwest-corner rule. Pricing is
//! Dantzig's most negative reduced cost; after a run of degenerate pivots the
//! solver switches to Bland's rule until the next non-degenerate pivot.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Optimal flows and dual potentials of a balanced transportation problem.
#[derive(Debug, Clone)]
pub struct SimplexSolution<T> {
    /// Basic cells `(row, col, flow)`; zero-flow basic cells are dropped.
    pub flows: Vec<(usize, usize, T)>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub iterations: usize,
}

struct Basis<T> {
    m: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<T>,
    /// Tree adjacency: node → incident cell ids (rows `0..m`, columns `m..`).
    adj: Vec<Vec<usize>>,
}

impl<T: Real> Basis<T> {
    fn node_of_col(&self, j: usize) -> usize {
        self.m + j
    }

    fn add(&mut self, id: usize) {
        let (i, j) = self.cells[id];
        let c = self.node_of_col(j);
        self.adj[i].push(id);
        self.adj[c].push(id);
    }

    fn remove(&mut self, id: usize) {
        let (i, j) = self.cells[id];
        let c = self.node_of_col(j);
        self.adj[i].retain(|&x| x != id);
        self.adj[c].retain(|&x| x != id);
    }

    fn other(&self, id: usize, node: usize) -> usize {
        let (i, j) = self.cells[id];
        if node == i {
            self.node_of_col(j)
        } else {
            i
        }
    }

    fn potentials(&self, cost: &[T], k: usize, u: &mut [T], v: &mut [T]) {
        let n = self.adj.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        u[0] = T::zero();
        while let Some(node) = stack.pop() {
            for &id in &self.adj[node] {
                let next = self.other(id, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let (i, j) = self.cells[id];
                let c = cost[i * k + j];
                if next >= self.m {
                    v[j] = c - u[i];
                } else {
                    u[i] = c - v[j];
                }
                stack.push(next);
            }
        }
    }

    /// Cell ids on the tree path from `from` to `to`.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let n = self.adj.len();
        let mut via = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([from]);
        seen[from] = true;
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &id in &self.adj[node] {
                let next = self.other(id, node);
                if !seen[next] {
                    seen[next] = true;
                    via[next] = id;
                    queue.push_back(next);
                }
            }
        }
        let mut out = Vec::new();
        let mut node = to;
        while node != from {
            let id = via[node];
            out.push(id);
            node = self.other(id, node);
        }
        out.reverse();
        out
    }
}

fn northwest<T: Real>(supply: &[T], demand: &[T]) -> (Vec<(usize, usize)>, Vec<T>) {
    let (m, k) = (supply.len(), demand.len());
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let mut cells = Vec::with_capacity(m + k - 1);
    let mut flow = Vec::with_capacity(m + k - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = if i == m - 1 && j == k - 1 {
            a[i].max(T::zero())
        } else {
            a[i].min(b[j]).max(T::zero())
        };
        cells.push((i, j));
        flow.push(x);
        a[i] = a[i] - x;
        b[j] = b[j] - x;
        if i == m - 1 && j == k - 1 {
            break;
        }
        if j == k - 1 || (i < m - 1 && a[i] <= b[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    (cells, flow)
}

/// Solves `min Σ x_ij c_ij` subject to row sums `supply` and column sums
/// `demand`. `cost` is row-major `m × k`.
pub fn transport_simplex<T: Real>(supply: &[T], demand: &[T], cost: &[T]) -> Result<SimplexSolution<T>> {
    let (m, k) = (supply.len(), demand.len());
    if m == 0 || k == 0 || cost.len() != m * k {
        return Err(Error::SolverFailure("malformed transportation problem".into()));
    }
    let cmax = cost.iter().fold(T::zero(), |a, &c| a.max(c.abs()));
    let tol = T::lit(1e-12) * (T::one() + cmax);
    let flow_tol = T::lit(1e-15);
    let (cells, flow) = northwest(supply, demand);
    let mut basis = Basis {
        m,
        cells,
        flow,
        adj: vec![Vec::new(); m + k],
    };
    for id in 0..basis.cells.len() {
        basis.add(id);
    }
    let mut u = vec![T::zero(); m];
    let mut v = vec![T::zero(); k];
    let degenerate_limit = (m + k).max(100);
    let mut degenerate_run = 0usize;
    let max_iter = 100 * (m + k) * (m + k).max(10) + 1000;
    let mut iterations = 0usize;
    loop {
        basis.potentials(cost, k, &mut u, &mut v);
        let bland = degenerate_run >= degenerate_limit;
        let mut enter: Option<(usize, usize)> = None;
        let mut best = -tol;
        'scan: for i in 0..m {
            let row = &cost[i * k..(i + 1) * k];
            for j in 0..k {
                let r = row[j] - u[i] - v[j];
                if r < best {
                    enter = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = enter else { break };
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::SolverFailure(format!("no optimum after {max_iter} pivots")));
        }
        let path = basis.path(ei, basis.node_of_col(ej));
        // cells at even path positions lose flow
        let mut theta = T::infinity();
        let mut leave = usize::MAX;
        for (pos, &id) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let f = basis.flow[id];
                let better = f < theta
                    || (f == theta && bland && basis.cells[id] < basis.cells[leave]);
                if better {
                    theta = f;
                    leave = id;
                }
            }
        }
        for (pos, &id) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[id] = basis.flow[id] - theta;
            } else {
                basis.flow[id] = basis.flow[id] + theta;
            }
        }
        basis.remove(leave);
        basis.cells[leave] = (ei, ej);
        basis.flow[leave] = theta;
        basis.add(leave);
        if theta <= flow_tol {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }
    let flows = basis
        .cells
        .iter()
        .zip(&basis.flow)
        .filter(|(_, &f)| f > T::zero())
        .map(|(&(i, j), &f)| (i, j, f))
        .collect();
    Ok(SimplexSolution { flows, u, v, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(sol: &SimplexSolution<f64>, cost: &[f64], k: usize) -> f64 {
        sol.flows.iter().map(|&(i, j, f)| f * cost[i * k + j]).sum()
    }

    #[test]
    fn textbook_instance() {
        // integral instance, cross-checked against enumeration of integer flows
        let supply = [20.0, 30.0, 25.0];
        let demand = [10.0, 25.0, 40.0];
        let cost = [8.0, 6.0, 10.0, 9.0, 12.0, 13.0, 14.0, 9.0, 16.0];
        let sol = transport_simplex(&supply, &demand, &cost).unwrap();
        let obj = objective(&sol, &cost, 3);
        let dual: f64 = supply.iter().zip(&sol.u).map(|(a, b)| a * b).sum::<f64>()
            + demand.iter().zip(&sol.v).map(|(a, b)| a * b).sum::<f64>();
        assert!((obj - dual).abs() < 1e-9);
        for i in 0..3 {
            for j in 0..3 {
                assert!(sol.u[i] + sol.v[j] <= cost[i * 3 + j] + 1e-9);
            }
        }
        let brute = brute_force(&supply, &demand, &cost);
        assert!((obj - brute).abs() < 1e-9, "{obj} vs {brute}");
    }

    /// Grid search over integer flows for small integral instances.
    fn brute_force(a: &[f64; 3], b: &[f64; 3], c: &[f64; 9]) -> f64 {
        let mut best = f64::INFINITY;
        let (a0, a1) = (a[0] as i32, a[1] as i32);
        for x00 in 0..=a0 {
            for x01 in 0..=(a0 - x00) {
                let x02 = a0 - x00 - x01;
                for x10 in 0..=a1 {
                    for x11 in 0..=(a1 - x10) {
                        let x12 = a1 - x10 - x11;
                        let x20 = b[0] as i32 - x00 - x10;
                        let x21 = b[1] as i32 - x01 - x11;
                        let x22 = b[2] as i32 - x02 - x12;
                        if x20 < 0 || x21 < 0 || x22 < 0 || x20 + x21 + x22 != a[2] as i32 {
                            continue;
                        }
                        let x = [x00, x01, x02, x10, x11, x12, x20, x21, x22];
                        let v: f64 = x.iter().zip(c).map(|(&f, &w)| f as f64 * w).sum();
                        best = best.min(v);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn degenerate_identity() {
        let n = 30;
        let w = vec![1.0 / n as f64; n];
        let cost: Vec<f64> = (0..n * n)
            .map(|e| {
                let (i, j) = (e / n, e % n);
                ((i as f64 - j as f64).powi(2)) / 2.0
            })
            .collect();
        let sol = transport_simplex(&w, &w, &cost).unwrap();
        assert!(objective(&sol, &cost, n).abs() < 1e-15);
        assert!(sol.flows.iter().all(|&(i, j, _)| i == j));
    }
}
