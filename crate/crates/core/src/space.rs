//! Finite metric measure spaces.
//!
//! A [`DiscreteMMSpace`] is a finite point set with a metric, a positive
//! measure and a neighbourhood scale `h`. Graph spaces store the completed
//! shortest-path metric of a weighted edge list: densely for small `n`, and as
//! an on-demand Dijkstra row cache above [`DENSE_LIMIT`] points. Oracle spaces
//! with an exact embedded metric (Euclidean or great-circle) skip the graph and
//! evaluate distances from coordinates.
//!
//! Spaces are immutable once built. [`DiscreteMMSpace::rescale`] shares the
//! underlying storage and only changes a distance multiplier, the measure and
//! the basepoint.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{tight_slack, Real};
use crate::spatial::HashGrid;

/// Largest point count stored as a dense distance matrix under [`Storage::Auto`].
pub const DENSE_LIMIT: usize = 5000;

const ROW_CACHE_CAP: usize = 4096;

/// Index of a point in its owning space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(pub usize);

impl PointId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for PointId {
    fn from(i: usize) -> Self {
        PointId(i)
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One real value per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField<T> {
    pub values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self { values: vec![c; n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> T) -> Self {
        Self {
            values: (0..n).map(f).collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, p: PointId) -> T {
        self.values[p.0]
    }

    /// Pointwise `a·self + b·other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        self.map(|v| a * v)
    }
}

impl<T> std::ops::Index<PointId> for ScalarField<T> {
    type Output = T;
    fn index(&self, p: PointId) -> &T {
        &self.values[p.0]
    }
}

impl<T> std::ops::Index<usize> for ScalarField<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

/// Open ball `{ y : d(center, y) < radius }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball<T> {
    pub center: PointId,
    pub radius: T,
    /// Members sorted by id; always contains `center`.
    pub members: Vec<PointId>,
    /// `distances[k] = d(center, members[k])`.
    pub distances: Vec<T>,
}

impl<T: Real> Ball<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, p: PointId) -> bool {
        self.members.binary_search(&p).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PointId, T)> + '_ {
        self.members.iter().copied().zip(self.distances.iter().copied())
    }
}

/// Exact metric used by coordinate-backed oracle spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddedMetric {
    /// Euclidean distance between coordinate vectors.
    Euclidean,
    /// Great-circle distance between unit vectors of the round sphere.
    Sphere,
}

/// How a graph metric is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Storage {
    /// Dense up to [`DENSE_LIMIT`] points, row cache above.
    #[default]
    Auto,
    Dense,
    Sparse,
}

/// Compressed adjacency of a weighted undirected graph.
#[derive(Debug, Clone)]
pub struct Graph<T> {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Real> Graph<T> {
    fn from_edges(n: usize, edges: &[(usize, usize, T)]) -> Self {
        let mut best: HashMap<(usize, usize), T> = HashMap::with_capacity(edges.len());
        for &(u, v, w) in edges {
            if u == v {
                continue;
            }
            let k = (u.min(v), u.max(v));
            best.entry(k)
                .and_modify(|x| {
                    if w < *x {
                        *x = w
                    }
                })
                .or_insert(w);
        }
        let mut adj: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (&(u, v), &w) in &best {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for list in &mut adj {
            list.sort_by(|a, b| a.0.cmp(&b.0));
            for &(v, w) in list.iter() {
                targets.push(v);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Self {
            offsets,
            targets,
            weights,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    /// Neighbours of `u` with stored (unscaled) weights, sorted by id.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    /// Iterates each undirected edge once as `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&(v, _)| v > u)
                .map(move |(v, w)| (u, v, w))
        })
    }

    fn min_weight(&self) -> Option<T> {
        self.weights.iter().copied().reduce(|a, b| a.min(b))
    }

    /// Single-source shortest paths; nodes farther than `bound` are left at
    /// infinity.
    fn dijkstra(&self, src: usize, bound: T) -> Vec<T> {
        let n = self.node_count();
        let mut dist = vec![T::infinity(); n];
        let mut heap = BinaryHeap::new();
        dist[src] = T::zero();
        heap.push(HeapItem(T::zero(), src));
        while let Some(HeapItem(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if d >= bound {
                break;
            }
            for (v, w) in self.neighbors(u) {
                let nd = d + w;
                if nd < dist[v] && nd < bound {
                    dist[v] = nd;
                    heap.push(HeapItem(nd, v));
                }
            }
        }
        dist
    }

    fn reachable_from_zero(&self) -> Option<usize> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for (v, _) in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.iter().position(|s| !s)
    }
}

#[derive(PartialEq)]
struct HeapItem<T>(T, usize);

impl<T: Real> Eq for HeapItem<T> {}

impl<T: Real> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for HeapItem<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

enum Backing<T> {
    Dense(Vec<T>),
    Sparse(Mutex<HashMap<usize, Arc<Vec<T>>>>),
    Embedded(EmbeddedMetric, Option<HashGrid>),
}

struct Inner<T> {
    n: usize,
    coords: Option<Vec<Vec<T>>>,
    graph: Option<Graph<T>>,
    backing: Backing<T>,
}

/// Finite metric measure space with neighbourhood scale `h`.
#[derive(Clone)]
pub struct DiscreteMMSpace<T: Real> {
    inner: Arc<Inner<T>>,
    /// Multiplier applied to stored distances (1 unless rescaled).
    scale: T,
    measure: Arc<Vec<T>>,
    h: T,
    basepoint: Option<PointId>,
}

impl<T: Real> fmt::Debug for DiscreteMMSpace<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteMMSpace")
            .field("n", &self.inner.n)
            .field("h", &self.h)
            .field("scale", &self.scale)
            .field("basepoint", &self.basepoint)
            .field("graph", &self.inner.graph.is_some())
            .finish()
    }
}

fn check_measure<T: Real>(measure: &[T], n: usize) -> Result<()> {
    if measure.len() != n {
        return Err(Error::InvalidSpace(format!(
            "measure has {} weights for {} points",
            measure.len(),
            n
        )));
    }
    for (i, &m) in measure.iter().enumerate() {
        if !(m > T::zero()) || !m.is_finite() {
            return Err(Error::NonPositiveWeight {
                what: "measure",
                index: i,
                value: m.as_f64(),
            });
        }
    }
    Ok(())
}

fn check_h<T: Real>(h: T, min_positive: Option<T>) -> Result<()> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidSpace(format!("scale h = {h} must be positive")));
    }
    if let Some(m) = min_positive {
        // small relative slack so that h = 2·spacing on exact grids passes
        if h < T::lit(2.0) * m * (T::one() - T::lit(1e-9)) {
            return Err(Error::InvalidSpace(format!(
                "scale h = {h} is below twice the minimal distance {m}"
            )));
        }
    }
    Ok(())
}

impl<T: Real> DiscreteMMSpace<T> {
    /// Builds the shortest-path metric of a connected weighted graph.
    pub fn build_from_edges(
        n: usize,
        edges: &[(usize, usize, T)],
        measure: Vec<T>,
        h: T,
    ) -> Result<Self> {
        Self::build_from_edges_with(n, edges, measure, h, None, Storage::Auto)
    }

    /// As [`build_from_edges`](Self::build_from_edges), with optional
    /// coordinates and an explicit storage choice.
    pub fn build_from_edges_with(
        n: usize,
        edges: &[(usize, usize, T)],
        measure: Vec<T>,
        h: T,
        coords: Option<Vec<Vec<T>>>,
        storage: Storage,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpace("empty point set".into()));
        }
        for (k, &(u, v, w)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::BadPoint(u.max(v), n));
            }
            if !(w > T::zero()) || !w.is_finite() {
                return Err(Error::NonPositiveWeight {
                    what: "edge",
                    index: k,
                    value: w.as_f64(),
                });
            }
        }
        check_measure(&measure, n)?;
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::InvalidSpace("coordinate count mismatch".into()));
            }
        }
        let graph = Graph::from_edges(n, edges);
        if n > 1 {
            if let Some(u) = graph.reachable_from_zero() {
                return Err(Error::DisconnectedGraph(0, u));
            }
        }
        check_h(h, graph.min_weight())?;
        let dense = match storage {
            Storage::Dense => true,
            Storage::Sparse => false,
            Storage::Auto => n <= DENSE_LIMIT,
        };
        let backing = if dense {
            let rows: Vec<Vec<T>> = (0..n)
                .into_par_iter()
                .map(|s| graph.dijkstra(s, T::infinity()))
                .collect();
            let mut flat = Vec::with_capacity(n * n);
            for (i, row) in rows.iter().enumerate() {
                for (j, &d) in row.iter().enumerate() {
                    // symmetrize against round-off in path sums
                    let v = if j < i { flat[j * n + i] } else { d };
                    flat.push(v);
                }
            }
            Backing::Dense(flat)
        } else {
            Backing::Sparse(Mutex::new(HashMap::new()))
        };
        Ok(Self {
            inner: Arc::new(Inner {
                n,
                coords,
                graph: Some(graph),
                backing,
            }),
            scale: T::one(),
            measure: Arc::new(measure),
            h,
            basepoint: None,
        })
    }

    /// Oracle space whose metric is evaluated exactly from coordinates.
    ///
    /// There is no edge graph, so geodesic extraction is unavailable; metric
    /// and measure queries behave as for graph spaces.
    pub fn from_embedded(
        coords: Vec<Vec<T>>,
        metric: EmbeddedMetric,
        measure: Vec<T>,
        h: T,
    ) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::InvalidSpace("empty point set".into()));
        }
        check_measure(&measure, n)?;
        let grid = HashGrid::new(&coords, h.as_f64().max(1e-12));
        let min_pos = match &grid {
            Some(g) => {
                let reach = match metric {
                    EmbeddedMetric::Euclidean => h.as_f64(),
                    EmbeddedMetric::Sphere => chord(h.as_f64()),
                };
                let m = (0..n)
                    .into_par_iter()
                    .filter_map(|i| g.nearest_positive(i, reach))
                    .reduce(|| f64::INFINITY, f64::min);
                if m.is_finite() {
                    let m = match metric {
                        EmbeddedMetric::Euclidean => m,
                        EmbeddedMetric::Sphere => 2.0 * (0.5 * m).min(1.0).asin(),
                    };
                    Some(T::lit(m))
                } else {
                    None
                }
            }
            None => None,
        };
        check_h(h, min_pos)?;
        if n > 1 {
            let isolated = grid.as_ref().map_or(false, |_| min_pos.is_none());
            if isolated {
                return Err(Error::InvalidSpace(
                    "no pair of points within scale h".into(),
                ));
            }
        }
        Ok(Self {
            inner: Arc::new(Inner {
                n,
                coords: Some(coords),
                graph: None,
                backing: Backing::Embedded(metric, grid),
            }),
            scale: T::one(),
            measure: Arc::new(measure),
            h,
            basepoint: None,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    #[inline]
    pub fn h(&self) -> T {
        self.h
    }

    pub fn basepoint(&self) -> Option<PointId> {
        self.basepoint
    }

    pub fn measure(&self) -> &[T] {
        &self.measure
    }

    #[inline]
    pub fn mass(&self, p: PointId) -> T {
        self.measure[p.0]
    }

    pub fn total_mass(&self) -> T {
        self.measure.iter().copied().sum()
    }

    pub fn coords(&self) -> Option<&[Vec<T>]> {
        self.inner.coords.as_deref()
    }

    pub fn graph(&self) -> Option<&Graph<T>> {
        self.inner.graph.as_ref()
    }

    /// Multiplier between stored graph weights and distances of this space.
    pub fn distance_scale(&self) -> T {
        self.scale
    }

    pub fn embedded_metric(&self) -> Option<EmbeddedMetric> {
        match self.inner.backing {
            Backing::Embedded(m, _) => Some(m),
            _ => None,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.inner.backing, Backing::Dense(_))
    }

    pub fn check_point(&self, p: PointId) -> Result<()> {
        if p.0 < self.inner.n {
            Ok(())
        } else {
            Err(Error::BadPoint(p.0, self.inner.n))
        }
    }

    /// Copy whose distances are the stored ones times `scale`.
    pub(crate) fn with_distance_scale(&self, scale: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::InvalidSpace(format!("distance scale {scale} must be positive")));
        }
        let mut s = self.clone();
        s.scale = scale;
        Ok(s)
    }

    /// Returns a copy with a different neighbourhood scale.
    pub fn with_h(&self, h: T) -> Result<Self> {
        check_h(h, None)?;
        let mut s = self.clone();
        s.h = h;
        Ok(s)
    }

    /// Returns a copy carrying a different measure.
    pub fn with_measure(&self, measure: Vec<T>) -> Result<Self> {
        check_measure(&measure, self.n())?;
        let mut s = self.clone();
        s.measure = Arc::new(measure);
        Ok(s)
    }

    pub fn with_basepoint(&self, p: PointId) -> Result<Self> {
        self.check_point(p)?;
        let mut s = self.clone();
        s.basepoint = Some(p);
        Ok(s)
    }

    fn sparse_row(&self, i: usize) -> Arc<Vec<T>> {
        let Backing::Sparse(cache) = &self.inner.backing else {
            unreachable!("sparse_row on non-sparse backing")
        };
        if let Some(r) = cache.lock().expect("row cache poisoned").get(&i) {
            return Arc::clone(r);
        }
        let graph = self.inner.graph.as_ref().expect("sparse space has a graph");
        let row = Arc::new(graph.dijkstra(i, T::infinity()));
        let mut guard = cache.lock().expect("row cache poisoned");
        if guard.len() >= ROW_CACHE_CAP {
            guard.clear();
        }
        guard.insert(i, Arc::clone(&row));
        row
    }

    fn embedded_dist(&self, metric: EmbeddedMetric, i: usize, j: usize) -> T {
        let c = self.inner.coords.as_ref().expect("embedded space has coordinates");
        let (a, b) = (&c[i], &c[j]);
        match metric {
            EmbeddedMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (x - y) * (x - y))
                .sum::<T>()
                .sqrt(),
            EmbeddedMetric::Sphere => {
                let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                let cx = a[1] * b[2] - a[2] * b[1];
                let cy = a[2] * b[0] - a[0] * b[2];
                let cz = a[0] * b[1] - a[1] * b[0];
                (cx * cx + cy * cy + cz * cz).sqrt().atan2(dot)
            }
        }
    }

    /// Distance between two points (by index).
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> T {
        if i == j {
            return T::zero();
        }
        let raw = match &self.inner.backing {
            Backing::Dense(m) => m[i * self.inner.n + j],
            Backing::Sparse(cache) => {
                let hit = {
                    let g = cache.lock().expect("row cache poisoned");
                    g.get(&i)
                        .map(|r| r[j])
                        .or_else(|| g.get(&j).map(|r| r[i]))
                };
                match hit {
                    Some(v) => v,
                    None => self.sparse_row(i)[j],
                }
            }
            Backing::Embedded(m, _) => self.embedded_dist(*m, i, j),
        };
        raw * self.scale
    }

    #[inline]
    pub fn dist(&self, a: PointId, b: PointId) -> T {
        self.d(a.0, b.0)
    }

    /// `r_p(·) = d(p, ·)`.
    pub fn distance_field(&self, p: PointId) -> ScalarField<T> {
        let n = self.inner.n;
        let values = match &self.inner.backing {
            Backing::Dense(m) => m[p.0 * n..(p.0 + 1) * n]
                .iter()
                .map(|&d| d * self.scale)
                .collect(),
            Backing::Sparse(_) => self.sparse_row(p.0).iter().map(|&d| d * self.scale).collect(),
            Backing::Embedded(m, _) => {
                (0..n).map(|j| self.embedded_dist(*m, p.0, j) * self.scale).collect()
            }
        };
        ScalarField { values }
    }

    /// Points `y` with `d(x, y) < r`, paired with their distances and sorted by id.
    pub fn neighborhood(&self, x: PointId, r: T) -> Vec<(usize, T)> {
        let n = self.inner.n;
        if !(r > T::zero()) {
            return Vec::new();
        }
        let bound = r / self.scale;
        match &self.inner.backing {
            Backing::Dense(m) => m[x.0 * n..(x.0 + 1) * n]
                .iter()
                .enumerate()
                .filter(|(_, &d)| d < bound)
                .map(|(j, &d)| (j, d * self.scale))
                .collect(),
            Backing::Sparse(_) => {
                let g = self.inner.graph.as_ref().expect("sparse space has a graph");
                g.dijkstra(x.0, bound)
                    .into_iter()
                    .enumerate()
                    .filter(|(_, d)| *d < bound)
                    .map(|(j, d)| (j, d * self.scale))
                    .collect()
            }
            Backing::Embedded(metric, grid) => {
                let candidates: Vec<usize> = match grid {
                    Some(g) => {
                        let reach = match metric {
                            EmbeddedMetric::Euclidean => bound.as_f64(),
                            EmbeddedMetric::Sphere => chord(bound.as_f64()),
                        };
                        // widen slightly: the grid works in f64 while the
                        // metric may be evaluated in another precision
                        g.within(x.0, reach * (1.0 + 1e-9) + 1e-15)
                    }
                    None => (0..n).collect(),
                };
                candidates
                    .into_iter()
                    .map(|j| (j, self.embedded_dist(*metric, x.0, j)))
                    .filter(|(_, d)| *d < bound)
                    .map(|(j, d)| (j, d * self.scale))
                    .collect()
            }
        }
    }

    /// Open ball `B_r(x)`.
    pub fn ball(&self, x: PointId, r: T) -> Ball<T> {
        let mut nb = self.neighborhood(x, r);
        if !nb.iter().any(|&(j, _)| j == x.0) {
            nb.push((x.0, T::zero()));
            nb.sort_by_key(|&(j, _)| j);
        }
        Ball {
            center: x,
            radius: r,
            members: nb.iter().map(|&(j, _)| PointId(j)).collect(),
            distances: nb.iter().map(|&(_, d)| d).collect(),
        }
    }

    /// Largest distance from `x` to any point.
    pub fn eccentricity(&self, x: PointId) -> T {
        self.distance_field(x)
            .values
            .into_iter()
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Diameter; exact for dense storage, a two-sweep estimate otherwise
    /// (within a factor 2 and exact on trees and convex sets above the scale).
    pub fn diameter(&self) -> T {
        match &self.inner.backing {
            Backing::Dense(m) => m.iter().copied().fold(T::zero(), T::max) * self.scale,
            _ => {
                let r0 = self.distance_field(PointId(0));
                let far = argmax(&r0.values);
                self.eccentricity(PointId(far))
            }
        }
    }

    /// Rescaled and normalized space `(X, d/r, m^x_r, x)`.
    ///
    /// Distances and `h` are divided by `r`; the measure is divided by
    /// `Σ_{y ∈ B_r(x)} (1 − d(y,x)/r) m_y`.
    pub fn rescale(&self, x: PointId, r: T) -> Result<Self> {
        self.check_point(x)?;
        if !(r > T::zero()) {
            return Err(Error::InvalidSpace(format!("rescale radius {r} must be positive")));
        }
        let ball = self.ball(x, r);
        if ball.len() < 2 {
            return Err(Error::BallTooSmall {
                center: x.0,
                radius: r.as_f64(),
                needed: 2,
            });
        }
        let z: T = ball
            .iter()
            .map(|(y, d)| (T::one() - d / r) * self.mass(y))
            .sum();
        if !(z > T::zero()) {
            return Err(Error::EmptyBallNormalizer(z.as_f64()));
        }
        let measure: Vec<T> = self.measure.iter().map(|&m| m / z).collect();
        Ok(Self {
            inner: Arc::clone(&self.inner),
            scale: self.scale / r,
            measure: Arc::new(measure),
            h: self.h / r,
            basepoint: Some(x),
        })
    }

    /// Samples `samples` random triples and checks the metric axioms within `tol`.
    pub fn check_metric(&self, samples: usize, seed: u64, tol: T) -> Result<()> {
        let n = self.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let (a, b, c) = (
                rng.random_range(0..n),
                rng.random_range(0..n),
                rng.random_range(0..n),
            );
            let (ab, ba, bc, ac) = (self.d(a, b), self.d(b, a), self.d(b, c), self.d(a, c));
            if !(ab >= T::zero()) {
                return Err(Error::MetricViolation(format!("d({a},{b}) = {ab}")));
            }
            if (ab - ba).abs() > tol {
                return Err(Error::MetricViolation(format!("asymmetric pair ({a},{b})")));
            }
            if ac > ab + bc + tol {
                return Err(Error::MetricViolation(format!(
                    "triangle ({a},{b},{c}): {ac} > {ab} + {bc}"
                )));
            }
        }
        if (0..n.min(64)).any(|i| self.d(i, i) != T::zero()) {
            return Err(Error::MetricViolation("nonzero diagonal".into()));
        }
        Ok(())
    }

    /// Whether the edge `(u, v)` (stored weight `w`) is tight for shortest
    /// paths from `src`, i.e. `d(src,u) + w = d(src,v)`.
    pub(crate) fn is_tight(&self, row: &ScalarField<T>, u: usize, v: usize, w: T) -> bool {
        let lhs = row[u] + w * self.scale;
        (lhs - row[v]).abs() <= tight_slack(row[v])
    }
}

fn chord(angle: f64) -> f64 {
    2.0 * (0.5 * angle.min(std::f64::consts::PI)).sin()
}

pub(crate) fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> DiscreteMMSpace<f64> {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        DiscreteMMSpace::build_from_edges(n, &edges, vec![1.0; n], 2.0).unwrap()
    }

    /// Brute-force shortest paths by Bellman-Ford relaxation.
    fn bellman_ford(n: usize, edges: &[(usize, usize, f64)], src: usize) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; n];
        d[src] = 0.0;
        for _ in 0..n {
            for &(u, v, w) in edges {
                if d[u] + w < d[v] {
                    d[v] = d[u] + w;
                }
                if d[v] + w < d[u] {
                    d[u] = d[v] + w;
                }
            }
        }
        d
    }

    #[test]
    fn path_metric() {
        let s = path(3);
        assert_eq!(s.d(0, 2), 2.0);
        assert_eq!(s.distance_field(PointId(0)).values, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn triangle_unit_edges() {
        let s = DiscreteMMSpace::build_from_edges(
            3,
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
            vec![1.0; 3],
            2.0,
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.d(i, j), s.d(j, i));
                assert_eq!(s.d(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn star_matches_bellman_ford() {
        let edges = [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)];
        let s = DiscreteMMSpace::build_from_edges(4, &edges, vec![1.0; 4], 2.0).unwrap();
        for src in 0..4 {
            let bf = bellman_ford(4, &edges, src);
            for (j, &d) in bf.iter().enumerate() {
                assert_eq!(s.d(src, j), d);
            }
        }
        assert_eq!(s.d(1, 2), 2.0);
        assert_eq!(s.d(2, 3), 2.0);
    }

    #[test]
    fn dense_and_sparse_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 60;
        let mut edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        for _ in 0..120 {
            let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
            edges.push((u, v, rng.random_range(0.5..3.0)));
        }
        let a = DiscreteMMSpace::build_from_edges_with(n, &edges, vec![1.0; n], 6.0, None, Storage::Dense)
            .unwrap();
        let b = DiscreteMMSpace::build_from_edges_with(n, &edges, vec![1.0; n], 6.0, None, Storage::Sparse)
            .unwrap();
        for i in 0..n {
            let bf = bellman_ford(n, &edges, i);
            for j in 0..n {
                assert!((a.d(i, j) - bf[j]).abs() < 1e-12);
                assert!((b.d(i, j) - bf[j]).abs() < 1e-12);
            }
            let na = a.neighborhood(PointId(i), 2.5);
            let nb = b.neighborhood(PointId(i), 2.5);
            assert_eq!(na.len(), nb.len());
        }
    }

    #[test]
    fn rejects_bad_input() {
        let e = DiscreteMMSpace::build_from_edges(3, &[(0, 1, 1.0)], vec![1.0; 3], 2.0);
        assert!(matches!(e, Err(Error::DisconnectedGraph(_, 2))));
        let e = DiscreteMMSpace::build_from_edges(2, &[(0, 1, -1.0)], vec![1.0; 2], 2.0);
        assert!(matches!(e, Err(Error::NonPositiveWeight { what: "edge", .. })));
        let e = DiscreteMMSpace::build_from_edges(2, &[(0, 1, 1.0)], vec![1.0, 0.0], 2.0);
        assert!(matches!(e, Err(Error::NonPositiveWeight { what: "measure", .. })));
        let e = DiscreteMMSpace::build_from_edges(2, &[(0, 1, 1.0)], vec![1.0; 2], 1.0);
        assert!(matches!(e, Err(Error::InvalidSpace(_))));
    }

    #[test]
    fn ball_extremes() {
        let s = path(5);
        assert_eq!(s.ball(PointId(2), 100.0).len(), 5);
        let b = s.ball(PointId(2), 0.5);
        assert_eq!(b.members, vec![PointId(2)]);
        let b = s.ball(PointId(2), 2.0);
        assert_eq!(b.members, vec![PointId(1), PointId(2), PointId(3)]);
    }

    #[test]
    fn rescale_identity_and_halving() {
        let edges: Vec<_> = (0..4).map(|i| (i, i + 1, 0.5)).collect();
        let half = DiscreteMMSpace::build_from_edges(5, &edges, vec![1.0; 5], 1.0).unwrap();
        let r1 = half.rescale(PointId(2), 1.0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(r1.d(i, j), half.d(i, j));
            }
        }
        // normalizer = 1 + 2·(1 − 0.5) = 2
        assert!(r1.measure().iter().all(|&m| m == 0.5));
        assert_eq!(r1.basepoint(), Some(PointId(2)));

        let edges: Vec<_> = (0..4).map(|i| (i, i + 1, 0.25)).collect();
        let quarter = DiscreteMMSpace::build_from_edges(5, &edges, vec![1.0; 5], 0.5).unwrap();
        let r = quarter.rescale(PointId(2), 0.5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(r.d(i, j), 2.0 * quarter.d(i, j));
            }
        }
        assert_eq!(r.h(), 1.0);

        let s = path(5);
        let r3 = s.rescale(PointId(2), 3.0).unwrap();
        // normalizer = 1 + 2·(2/3) + 2·(1/3) = 3
        assert!((r3.mass(PointId(0)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rescale_requires_two_points() {
        let s = path(3);
        assert!(matches!(
            s.rescale(PointId(1), 0.5),
            Err(Error::BallTooSmall { .. })
        ));
    }

    #[test]
    fn embedded_sphere_distances() {
        let coords = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let s = DiscreteMMSpace::from_embedded(coords, EmbeddedMetric::Sphere, vec![1.0; 4], 4.0)
            .unwrap();
        assert!((s.d(0, 1) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((s.d(0, 2) - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(s.ball(PointId(0), 1.6).len(), 3);
    }
}
