//! Uniform hash grid for radius queries on embedded point sets.

use std::collections::HashMap;

use crate::scalar::Real;

const MAX_DIM: usize = 3;

#[derive(Debug, Clone)]
pub(crate) struct HashGrid {
    cell: f64,
    dim: usize,
    cells: HashMap<[i64; MAX_DIM], Vec<u32>>,
    points: Vec<[f64; MAX_DIM]>,
}

impl HashGrid {
    /// Builds the grid. `points` must all have the same dimension, at most 3.
    pub(crate) fn new<T: Real>(points: &[Vec<T>], cell: f64) -> Option<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if dim == 0 || dim > MAX_DIM || !(cell > 0.0) {
            return None;
        }
        let mut cells: HashMap<[i64; MAX_DIM], Vec<u32>> = HashMap::new();
        let mut flat = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return None;
            }
            let mut q = [0.0; MAX_DIM];
            for (k, v) in p.iter().enumerate() {
                q[k] = v.as_f64();
            }
            cells.entry(key(&q, cell, dim)).or_default().push(i as u32);
            flat.push(q);
        }
        Some(Self {
            cell,
            dim,
            cells,
            points: flat,
        })
    }

    /// Indices of points whose Euclidean distance to `center` is `< radius`,
    /// sorted ascending.
    pub(crate) fn within(&self, center: usize, radius: f64) -> Vec<usize> {
        let c = self.points[center];
        let reach = (radius / self.cell).ceil() as i64;
        let span = (2 * reach + 1) as f64;
        let mut out = Vec::new();
        if span.powi(self.dim as i32) > self.cells.len() as f64 {
            let r2 = radius * radius;
            for (i, p) in self.points.iter().enumerate() {
                if sq(p, &c) < r2 {
                    out.push(i);
                }
            }
            return out;
        }
        let base = key(&c, self.cell, self.dim);
        let r2 = radius * radius;
        let mut offset = [0i64; MAX_DIM];
        visit(self.dim, 0, reach, &mut offset, &mut |off| {
            let mut k = base;
            for d in 0..self.dim {
                k[d] += off[d];
            }
            if let Some(ids) = self.cells.get(&k) {
                for &i in ids {
                    if sq(&self.points[i as usize], &c) < r2 {
                        out.push(i as usize);
                    }
                }
            }
        });
        out.sort_unstable();
        out
    }

    /// Smallest positive distance from `i` to another point, searching up to
    /// `radius`.
    pub(crate) fn nearest_positive(&self, i: usize, radius: f64) -> Option<f64> {
        let c = self.points[i];
        self.within(i, radius)
            .into_iter()
            .map(|j| sq(&self.points[j], &c).sqrt())
            .filter(|&d| d > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    }
}

fn key(p: &[f64; MAX_DIM], cell: f64, dim: usize) -> [i64; MAX_DIM] {
    let mut k = [0i64; MAX_DIM];
    for d in 0..dim {
        k[d] = (p[d] / cell).floor() as i64;
    }
    k
}

fn sq(a: &[f64; MAX_DIM], b: &[f64; MAX_DIM]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn visit(
    dim: usize,
    d: usize,
    reach: i64,
    off: &mut [i64; MAX_DIM],
    f: &mut impl FnMut(&[i64; MAX_DIM]),
) {
    if d == dim {
        f(off);
        return;
    }
    for o in -reach..=reach {
        off[d] = o;
        visit(dim, d + 1, reach, off, f);
    }
    off[d] = 0;
}
