//! Test spaces with analytic angle oracles.

use std::f64::consts::PI;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{DiscreteMMSpace, EmbeddedMetric, PointId, Storage};
use crate::spatial::HashGrid;

/// How an oracle space realizes its metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Shortest paths in the `h`-neighbourhood graph.
    #[default]
    Graph,
    /// Exact distances from coordinates.
    Exact,
}

/// Sampling scheme on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereSampling {
    #[default]
    Uniform,
    /// Deterministic Fibonacci lattice (quasi-uniform).
    Fibonacci,
}

/// Analytic ground truth attached to a generated space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleDescriptor {
    /// Points carry Euclidean coordinates.
    Euclidean,
    /// Points carry unit vectors in ℝ³.
    Sphere,
    /// Points carry polar coordinates `(r, θ)`, `θ ∈ [0, alpha)`.
    Cone { alpha: f64 },
    /// Metric tree; directions at a vertex are the incident edges.
    Tree,
}

impl OracleDescriptor {
    /// Angle at `x` between the directions to `p` and `q`, or `None` where the
    /// oracle is undefined (coincident points, cone apex).
    pub fn angle<T: Real>(&self, space: &DiscreteMMSpace<T>, p: PointId, x: PointId, q: PointId) -> Option<f64> {
        if p == x || q == x {
            return None;
        }
        let coords = space.coords();
        let c = |i: PointId| -> Option<Vec<f64>> {
            coords.map(|cs| cs[i.0].iter().map(|v| v.as_f64()).collect())
        };
        match self {
            OracleDescriptor::Euclidean => {
                let (pp, xx, qq) = (c(p)?, c(x)?, c(q)?);
                let u: Vec<f64> = pp.iter().zip(&xx).map(|(a, b)| a - b).collect();
                let v: Vec<f64> = qq.iter().zip(&xx).map(|(a, b)| a - b).collect();
                vector_angle(&u, &v)
            }
            OracleDescriptor::Sphere => {
                let (pp, xx, qq) = (c(p)?, c(x)?, c(q)?);
                let tangent = |a: &[f64]| -> Vec<f64> {
                    let d: f64 = a.iter().zip(&xx).map(|(s, t)| s * t).sum();
                    a.iter().zip(&xx).map(|(s, t)| s - d * t).collect()
                };
                vector_angle(&tangent(&pp), &tangent(&qq))
            }
            OracleDescriptor::Cone { alpha } => {
                let (pp, xx, qq) = (c(p)?, c(x)?, c(q)?);
                if xx[0] <= 0.0 {
                    return None;
                }
                let dir = |a: &[f64]| -> Vec<f64> {
                    let dt = wrap(a[1] - xx[1], *alpha);
                    if dt.abs() < PI {
                        vec![a[0] * dt.cos() - xx[0], a[0] * dt.sin()]
                    } else {
                        vec![-xx[0], 0.0]
                    }
                };
                vector_angle(&dir(&pp), &dir(&qq))
            }
            OracleDescriptor::Tree => {
                let gromov = space.dist(x, p) + space.dist(x, q) - space.dist(p, q);
                Some(if gromov.as_f64() > 1e-9 * (1.0 + space.dist(p, q).as_f64()) {
                    0.0
                } else {
                    PI
                })
            }
        }
    }
}

fn wrap(dt: f64, alpha: f64) -> f64 {
    let mut d = dt.rem_euclid(alpha);
    if d > alpha / 2.0 {
        d -= alpha;
    }
    d
}

fn vector_angle(u: &[f64], v: &[f64]) -> Option<f64> {
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    let c: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / (nu * nv);
    Some(c.clamp(-1.0, 1.0).acos())
}

/// Generated space with its oracle and declared curvature-dimension bounds.
#[derive(Debug, Clone)]
pub struct OracleSpace<T: Real> {
    pub space: DiscreteMMSpace<T>,
    pub oracle: OracleDescriptor,
    /// Declared `(K, N)`, when the model is a smooth comparison space.
    pub curvature: Option<(f64, f64)>,
    pub description: String,
}

impl<T: Real> OracleSpace<T> {
    pub fn angle(&self, p: PointId, x: PointId, q: PointId) -> Option<f64> {
        self.oracle.angle(&self.space, p, x, q)
    }
}

fn to_t<T: Real>(pts: &[Vec<f64>]) -> Vec<Vec<T>> {
    pts.iter().map(|p| p.iter().map(|&v| T::lit(v)).collect()).collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pairs within distance `< h` under `metric`, found through a grid on
/// `grid_coords` with Euclidean search radius `reach`.
fn radius_edges(
    grid_coords: &[Vec<f64>],
    reach: f64,
    h: f64,
    metric: impl Fn(usize, usize) -> f64,
) -> Vec<(usize, usize, f64)> {
    let grid = HashGrid::new(grid_coords, reach).expect("coordinates of dimension at most 3");
    let mut edges = Vec::new();
    for i in 0..grid_coords.len() {
        for j in grid.within(i, reach * (1.0 + 1e-12)) {
            if j > i {
                let d = metric(i, j);
                if d > 0.0 && d < h {
                    edges.push((i, j, d));
                }
            }
        }
    }
    edges
}

/// Builds the graph space, enlarging `h` by 20% until the graph connects.
fn connect<T: Real>(
    coords: &[Vec<f64>],
    measure: &[f64],
    mut h: f64,
    reach_of: impl Fn(f64) -> f64,
    metric: impl Fn(usize, usize) -> f64 + Copy,
) -> Result<DiscreteMMSpace<T>> {
    let n = coords.len();
    let measure_t: Vec<T> = measure.iter().map(|&m| T::lit(m)).collect();
    for _ in 0..12 {
        let edges = radius_edges(coords, reach_of(h), h, metric);
        let edges_t: Vec<(usize, usize, T)> = edges.iter().map(|&(u, v, w)| (u, v, T::lit(w))).collect();
        match DiscreteMMSpace::build_from_edges_with(
            n,
            &edges_t,
            measure_t.clone(),
            T::lit(h),
            Some(to_t(coords)),
            Storage::Auto,
        ) {
            Err(Error::DisconnectedGraph(..)) | Err(Error::InvalidSpace(_)) => {
                warn!("neighbourhood graph at h = {h} rejected; retrying with larger h");
                h *= 1.2;
            }
            other => return other,
        }
    }
    Err(Error::DisconnectedGraph(0, 0))
}

/// Default connection radius `2 (log n / n)^{1/dim}`, times `area^{1/dim}`.
pub fn default_h(n: usize, dim: usize, area: f64) -> f64 {
    let n = n as f64;
    2.0 * (area * n.ln() / n).powf(1.0 / dim as f64)
}

/// `n` uniform points in `[0,1]^dim` with the neighbourhood-graph metric.
pub fn euclidean_cloud<T: Real>(n: usize, dim: usize, seed: u64, h: Option<f64>) -> Result<OracleSpace<T>> {
    if n < 100 {
        return Err(Error::InvalidSpace(format!("cloud needs at least 100 points, got {n}")));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidSpace(format!("dimension {dim} not in 1..=3")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let h = h.unwrap_or_else(|| default_h(n, dim, 1.0));
    let measure = vec![1.0 / n as f64; n];
    let space = connect(&pts, &measure, h, |h| h, |i, j| euclid(&pts[i], &pts[j]))?;
    Ok(OracleSpace {
        space,
        oracle: OracleDescriptor::Euclidean,
        curvature: Some((0.0, dim as f64)),
        description: format!("uniform cloud in [0,1]^{dim}, n = {n}, seed = {seed}"),
    })
}

/// Euclidean cloud whose measure is a Gaussian density centred in the cube.
pub fn gaussian_weighted_cloud<T: Real>(n: usize, dim: usize, seed: u64, h: Option<f64>) -> Result<OracleSpace<T>> {
    let base = euclidean_cloud::<T>(n, dim, seed, h)?;
    let sigma = 0.25;
    let coords = base.space.coords().expect("cloud has coordinates");
    let raw: Vec<f64> = coords
        .iter()
        .map(|p| {
            let r2: f64 = p.iter().map(|&v| (v.as_f64() - 0.5).powi(2)).sum();
            (-r2 / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let measure = raw.iter().map(|&m| T::lit(m / total)).collect();
    Ok(OracleSpace {
        space: base.space.with_measure(measure)?,
        oracle: OracleDescriptor::Euclidean,
        curvature: None,
        description: format!("gaussian-weighted cloud in [0,1]^{dim}, n = {n}, seed = {seed}"),
    })
}

/// Points on the unit sphere `S² ⊂ ℝ³`.
pub fn sphere_cloud<T: Real>(
    n: usize,
    seed: u64,
    h: Option<f64>,
    sampling: SphereSampling,
    metric: MetricKind,
) -> Result<OracleSpace<T>> {
    if n < 100 {
        return Err(Error::InvalidSpace(format!("cloud needs at least 100 points, got {n}")));
    }
    let pts: Vec<Vec<f64>> = match sampling {
        SphereSampling::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| loop {
                    let v: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    if r > 1e-9 {
                        break v.iter().map(|a| a / r).collect();
                    }
                })
                .collect()
        }
        SphereSampling::Fibonacci => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
    };
    let h = h.unwrap_or_else(|| default_h(n, 2, 4.0 * PI));
    let measure = vec![1.0 / n as f64; n];
    let arc = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let cx = a[1] * b[2] - a[2] * b[1];
        let cy = a[2] * b[0] - a[0] * b[2];
        let cz = a[0] * b[1] - a[1] * b[0];
        (cx * cx + cy * cy + cz * cz).sqrt().atan2(dot)
    };
    let space = match metric {
        MetricKind::Graph => connect(
            &pts,
            &measure,
            h,
            |h| 2.0 * (0.5 * h.min(PI)).sin(),
            |i, j| arc(&pts[i], &pts[j]),
        )?,
        MetricKind::Exact => DiscreteMMSpace::from_embedded(
            to_t(&pts),
            EmbeddedMetric::Sphere,
            measure.iter().map(|&m| T::lit(m)).collect(),
            T::lit(h),
        )?,
    };
    Ok(OracleSpace {
        space,
        oracle: OracleDescriptor::Sphere,
        curvature: Some((1.0, 2.0)),
        description: format!("{sampling:?} sample of the unit sphere, n = {n}, seed = {seed}"),
    })
}

/// Flat cone of total angle `alpha ≤ 2π` over the unit disk, apex included as point 0.
pub fn cone_cloud<T: Real>(alpha: f64, n: usize, seed: u64, h: Option<f64>) -> Result<OracleSpace<T>> {
    if !(alpha > 0.0 && alpha <= 2.0 * PI) {
        return Err(Error::InvalidSpace(format!("cone angle {alpha} not in (0, 2π]")));
    }
    if n < 100 {
        return Err(Error::InvalidSpace(format!("cloud needs at least 100 points, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut polar = vec![vec![0.0, 0.0]];
    for _ in 1..n {
        // area element r dr dθ
        let r: f64 = rng.random::<f64>().sqrt();
        let th: f64 = rng.random::<f64>() * alpha;
        polar.push(vec![r, th]);
    }
    let area = 0.5 * alpha;
    let h = h.unwrap_or_else(|| default_h(n, 2, area));
    let cone_dist = |a: &[f64], b: &[f64]| -> f64 {
        let dt = wrap(b[1] - a[1], alpha).abs();
        if dt < PI {
            (a[0] * a[0] + b[0] * b[0] - 2.0 * a[0] * b[0] * dt.cos()).max(0.0).sqrt()
        } else {
            a[0] + b[0]
        }
    };
    // the grid works on an angle-preserving planar chart; search radius stays
    // Euclidean since the chart z ↦ r e^{iθ·2π/α} only stretches angles
    let stretch = 2.0 * PI / alpha;
    let chart: Vec<Vec<f64>> = polar
        .iter()
        .map(|p| vec![p[0] * (p[1] * stretch).cos(), p[0] * (p[1] * stretch).sin()])
        .collect();
    let measure = vec![1.0 / n as f64; n];
    let space = connect_with_chart(&polar, &chart, &measure, h, stretch.max(1.0), cone_dist)?;
    Ok(OracleSpace {
        space,
        oracle: OracleDescriptor::Cone { alpha },
        curvature: Some((0.0, 2.0)),
        description: format!("flat cone of angle {alpha:.4}, n = {n}, seed = {seed}"),
    })
}

fn connect_with_chart<T: Real>(
    coords: &[Vec<f64>],
    chart: &[Vec<f64>],
    measure: &[f64],
    mut h: f64,
    stretch: f64,
    metric: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<DiscreteMMSpace<T>> {
    let n = coords.len();
    let measure_t: Vec<T> = measure.iter().map(|&m| T::lit(m)).collect();
    for _ in 0..12 {
        let edges = radius_edges(chart, h * stretch, h, |i, j| metric(&coords[i], &coords[j]));
        let edges_t: Vec<(usize, usize, T)> = edges.iter().map(|&(u, v, w)| (u, v, T::lit(w))).collect();
        match DiscreteMMSpace::build_from_edges_with(
            n,
            &edges_t,
            measure_t.clone(),
            T::lit(h),
            Some(to_t(coords)),
            Storage::Auto,
        ) {
            Err(Error::DisconnectedGraph(..)) | Err(Error::InvalidSpace(_)) => h *= 1.2,
            other => return other,
        }
    }
    Err(Error::DisconnectedGraph(0, 0))
}

/// Tree edge `(u, v, length)` between combinatorial vertices.
pub type TreeEdge = (usize, usize, f64);

/// Metric tree whose edges are subdivided into pieces of length at most `step`.
///
/// Combinatorial vertex `v` keeps index `v`; subdivision points follow in edge order.
pub fn metric_tree<T: Real>(edges: &[TreeEdge], step: f64) -> Result<OracleSpace<T>> {
    if edges.is_empty() || !(step > 0.0) {
        return Err(Error::InvalidSpace("tree needs edges and a positive step".into()));
    }
    let base = edges.iter().map(|&(u, v, _)| u.max(v)).max().expect("nonempty") + 1;
    if edges.len() + 1 != base {
        return Err(Error::InvalidSpace("edge list is not a spanning tree".into()));
    }
    let mut out = Vec::new();
    let mut next = base;
    for &(u, v, len) in edges {
        if !(len > 0.0) {
            return Err(Error::InvalidSpace(format!("edge ({u},{v}) has length {len}")));
        }
        let k = (len / step).ceil().max(1.0) as usize;
        let w = len / k as f64;
        let mut prev = u;
        for _ in 1..k {
            out.push((prev, next, T::lit(w)));
            prev = next;
            next += 1;
        }
        out.push((prev, v, T::lit(w)));
    }
    let min_piece = edges
        .iter()
        .map(|&(_, _, len)| len / (len / step).ceil().max(1.0))
        .fold(f64::INFINITY, f64::min);
    let h = 2.0 * min_piece;
    let space = DiscreteMMSpace::build_from_edges(next, &out, vec![T::lit(1.0 / next as f64); next], T::lit(h))?;
    Ok(OracleSpace {
        space,
        oracle: OracleDescriptor::Tree,
        curvature: None,
        description: format!("metric tree with {} edges, step {step}", edges.len()),
    })
}

/// Star with `arms` edges of length `len` at vertex 0.
pub fn star<T: Real>(arms: usize, len: f64, step: f64) -> Result<OracleSpace<T>> {
    let edges: Vec<TreeEdge> = (1..=arms).map(|i| (0, i, len)).collect();
    metric_tree(&edges, step)
}

/// Regular grid of spacing `delta` over the box `lo..=hi` (per axis).
pub fn euclidean_grid<T: Real>(
    lo: &[f64],
    hi: &[f64],
    delta: f64,
    h: f64,
    metric: MetricKind,
) -> Result<OracleSpace<T>> {
    if lo.len() != hi.len() || lo.is_empty() || lo.len() > 3 || !(delta > 0.0) {
        return Err(Error::InvalidSpace("malformed grid box".into()));
    }
    let counts: Vec<usize> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| ((b - a) / delta + 1e-9).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    let mut pts = Vec::with_capacity(total);
    for mut k in 0..total {
        let mut p = Vec::with_capacity(lo.len());
        for (axis, &c) in counts.iter().enumerate() {
            p.push(lo[axis] + (k % c) as f64 * delta);
            k /= c;
        }
        pts.push(p);
    }
    let cell = delta.powi(lo.len() as i32);
    let measure = vec![cell; total];
    let space = match metric {
        MetricKind::Exact => DiscreteMMSpace::from_embedded(
            to_t(&pts),
            EmbeddedMetric::Euclidean,
            measure.iter().map(|&m| T::lit(m)).collect(),
            T::lit(h),
        )?,
        MetricKind::Graph => connect(&pts, &measure, h, |h| h, |i, j| euclid(&pts[i], &pts[j]))?,
    };
    Ok(OracleSpace {
        space,
        oracle: OracleDescriptor::Euclidean,
        curvature: Some((0.0, lo.len() as f64)),
        description: format!("grid {counts:?} with spacing {delta}"),
    })
}

/// Index of the grid or cloud point nearest to `target` (Euclidean coordinates).
pub fn nearest_point<T: Real>(space: &DiscreteMMSpace<T>, target: &[f64]) -> Option<PointId> {
    let coords = space.coords()?;
    let mut best = (f64::INFINITY, 0);
    for (i, c) in coords.iter().enumerate() {
        let d: f64 = c.iter().zip(target).map(|(a, b)| (a.as_f64() - b).powi(2)).sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    Some(PointId(best.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_oracle_values() {
        let s = euclidean_grid::<f64>(&[0.0, 0.0], &[1.0, 1.0], 0.5, 1.0, MetricKind::Exact).unwrap();
        // ids: (0,0)=0 (0.5,0)=1 (1,0)=2 (0,0.5)=3 (0.5,0.5)=4
        let o = &s.oracle;
        assert_eq!(o.angle(&s.space, PointId(0), PointId(1), PointId(2)), Some(PI));
        assert_eq!(o.angle(&s.space, PointId(0), PointId(1), PointId(0)), Some(0.0));
        let right = o.angle(&s.space, PointId(0), PointId(1), PointId(4)).unwrap();
        assert!((right - PI / 2.0).abs() < 1e-12);
        assert_eq!(o.angle(&s.space, PointId(1), PointId(1), PointId(4)), None);
    }

    #[test]
    fn sphere_equilateral_octant() {
        let coords = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![-1.0, 0.0, 0.0]];
        let s = DiscreteMMSpace::<f64>::from_embedded(coords, EmbeddedMetric::Sphere, vec![0.25; 4], 4.0).unwrap();
        let o = OracleDescriptor::Sphere;
        let a = o.angle(&s, PointId(1), PointId(0), PointId(2)).unwrap();
        assert!((a - PI / 2.0).abs() < 1e-12);
        let b = o.angle(&s, PointId(1), PointId(2), PointId(3)).unwrap();
        assert!((b - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn cone_full_angle_is_plane() {
        let c = cone_cloud::<f64>(2.0 * PI, 400, 5, None).unwrap();
        let coords = c.space.coords().unwrap();
        let plane = |i: usize| {
            let (r, t) = (coords[i][0], coords[i][1]);
            vec![r * t.cos(), r * t.sin()]
        };
        for (p, x, q) in [(3, 7, 11), (20, 40, 60), (5, 9, 100)] {
            let a = c.angle(PointId(p), PointId(x), PointId(q)).unwrap();
            let (pp, xx, qq) = (plane(p), plane(x), plane(q));
            let u = [pp[0] - xx[0], pp[1] - xx[1]];
            let v = [qq[0] - xx[0], qq[1] - xx[1]];
            let e = vector_angle(&u, &v).unwrap();
            assert!((a - e).abs() < 1e-9, "{a} vs {e}");
        }
        assert_eq!(c.angle(PointId(3), PointId(0), PointId(5)), None);
    }

    #[test]
    fn tree_oracle() {
        let t = star::<f64>(3, 2.0, 0.5).unwrap();
        assert_eq!(t.space.n(), 13);
        assert_eq!(t.angle(PointId(1), PointId(0), PointId(2)), Some(PI));
        let mid = PointId(4); // first subdivision point on edge 0–1
        assert_eq!(t.angle(PointId(1), PointId(0), mid), Some(0.0));
    }

    #[test]
    fn cloud_basics() {
        let c = euclidean_cloud::<f64>(500, 2, 1, None).unwrap();
        assert_eq!(c.space.n(), 500);
        c.space.check_metric(10_000, 2, 1e-9).unwrap();
        let g = gaussian_weighted_cloud::<f64>(500, 2, 1, None).unwrap();
        assert!((g.space.total_mass() - 1.0).abs() < 1e-12);
    }
}
