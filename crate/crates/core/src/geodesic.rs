//! Discrete geodesics: shortest vertex paths with arc-length parametrization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{DiscreteMMSpace, PointId, ScalarField};

/// Shortest vertex path `γ` from `γ₀` to `γ₁` evaluated at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DiscreteGeodesic<T: Real> {
    pub vertices: Vec<PointId>,
    /// Arc length from `γ₀` to each vertex.
    pub cumlen: Vec<T>,
    /// Total length `d(γ₀, γ₁)`.
    pub speed: T,
}

/// Witness that `γ₀` is an approximate interior point of an extension of `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extension<T> {
    pub point: PointId,
    /// `d(p̂,γ₀) + d(γ₀,γ₁) − d(p̂,γ₁)`, in `[0, h]` for a certificate.
    pub defect: T,
}

impl<T: Real> DiscreteGeodesic<T> {
    /// Geodesic that stays at `x`.
    pub fn constant(x: PointId) -> Self {
        Self {
            vertices: vec![x],
            cumlen: vec![T::zero()],
            speed: T::zero(),
        }
    }

    /// Validates the arc-length table.
    pub fn new(vertices: Vec<PointId>, cumlen: Vec<T>) -> Result<Self> {
        if vertices.is_empty() || vertices.len() != cumlen.len() {
            return Err(Error::InvalidSpace("geodesic vertex/length mismatch".into()));
        }
        if cumlen[0] != T::zero() || cumlen.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSpace(
                "geodesic arc lengths must increase from 0".into(),
            ));
        }
        let speed = *cumlen.last().expect("nonempty");
        Ok(Self {
            vertices,
            cumlen,
            speed,
        })
    }

    #[inline]
    pub fn start(&self) -> PointId {
        self.vertices[0]
    }

    #[inline]
    pub fn end(&self) -> PointId {
        *self.vertices.last().expect("nonempty geodesic")
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Index of the vertex whose arc length is nearest `t·speed`; ties go to
    /// the smaller arc length.
    pub fn eval_index(&self, t: T) -> Result<usize> {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(Error::OutOfRange(t.as_f64()));
        }
        let target = t * self.speed;
        let k = self.cumlen.partition_point(|&c| c < target);
        if k == 0 {
            return Ok(0);
        }
        if k == self.cumlen.len() {
            return Ok(k - 1);
        }
        let below = target - self.cumlen[k - 1];
        let above = self.cumlen[k] - target;
        Ok(if above < below { k } else { k - 1 })
    }

    /// `γ_t`.
    pub fn eval(&self, t: T) -> Result<PointId> {
        Ok(self.vertices[self.eval_index(t)?])
    }

    /// `γ_t` together with its realized arc length from `γ₀`.
    pub fn eval_with_length(&self, t: T) -> Result<(PointId, T)> {
        let k = self.eval_index(t)?;
        Ok((self.vertices[k], self.cumlen[k]))
    }

    /// `γ̃_t = γ_{Tt}` rebuilt as a geodesic from `γ₀` to `γ_T`.
    pub fn restrict(&self, big_t: T, h: T) -> Result<Self> {
        if !(big_t > T::zero() && big_t <= T::one()) {
            return Err(Error::OutOfRange(big_t.as_f64()));
        }
        let length = big_t * self.speed;
        let minimum = T::lit(2.0) * h;
        if length < minimum {
            return Err(Error::TooShort {
                length: length.as_f64(),
                minimum: minimum.as_f64(),
            });
        }
        let k = self.eval_index(big_t)?;
        Ok(Self {
            vertices: self.vertices[..=k].to_vec(),
            cumlen: self.cumlen[..=k].to_vec(),
            speed: self.cumlen[k],
        })
    }

    /// Largest `|d(γ_s,γ_t) − |cumlen_s − cumlen_t||` over vertex pairs.
    pub fn defect(&self, space: &DiscreteMMSpace<T>) -> T {
        let mut worst = T::zero();
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                let d = space.dist(self.vertices[a], self.vertices[b]);
                let e = (d - (self.cumlen[b] - self.cumlen[a])).abs();
                worst = worst.max(e);
            }
        }
        worst
    }
}

fn graph_or_err<T: Real>(space: &DiscreteMMSpace<T>) -> Result<&crate::space::Graph<T>> {
    space.graph().ok_or(Error::NoGraph)
}

/// Walks back from `p` along tight edges of the shortest-path tree rooted at
/// `x`, always choosing the smallest-index predecessor.
fn trace<T: Real>(
    space: &DiscreteMMSpace<T>,
    row: &ScalarField<T>,
    x: PointId,
    p: PointId,
) -> Result<Vec<PointId>> {
    let graph = graph_or_err(space)?;
    let mut path = vec![p];
    let mut cur = p.0;
    while cur != x.0 {
        let next = graph
            .neighbors(cur)
            .filter(|&(u, w)| row[u] < row[cur] && space.is_tight(row, u, cur, w))
            .map(|(u, _)| u)
            .next()
            .ok_or_else(|| Error::SolverFailure(format!("no tight predecessor at {cur}")))?;
        path.push(PointId(next));
        cur = next;
    }
    path.reverse();
    Ok(path)
}

/// Deterministic shortest path from `x` to `p` in the underlying graph.
pub fn shortest_geodesic<T: Real>(
    space: &DiscreteMMSpace<T>,
    x: PointId,
    p: PointId,
) -> Result<DiscreteGeodesic<T>> {
    space.check_point(x)?;
    space.check_point(p)?;
    if x == p {
        return Err(Error::SamePoint(x.0));
    }
    let row = space.distance_field(x);
    let vertices = trace(space, &row, x, p)?;
    let cumlen: Vec<T> = vertices.iter().map(|&v| row[v]).collect();
    let speed = row[p];
    Ok(DiscreteGeodesic {
        vertices,
        cumlen,
        speed,
    })
}

/// All geodesics from `x` to every other point, sharing one distance field.
pub fn geodesics_from<T: Real>(
    space: &DiscreteMMSpace<T>,
    x: PointId,
    targets: &[PointId],
) -> Result<Vec<DiscreteGeodesic<T>>> {
    let row = space.distance_field(x);
    targets
        .iter()
        .map(|&p| {
            if p == x {
                return Ok(DiscreteGeodesic::constant(x));
            }
            let vertices = trace(space, &row, x, p)?;
            let cumlen = vertices.iter().map(|&v| row[v]).collect();
            Ok(DiscreteGeodesic {
                vertices,
                cumlen,
                speed: row[p],
            })
        })
        .collect()
}

/// Number of distinct shortest vertex paths from `x` to `p` (saturating).
pub fn shortest_path_count<T: Real>(
    space: &DiscreteMMSpace<T>,
    x: PointId,
    p: PointId,
) -> Result<u64> {
    let graph = graph_or_err(space)?;
    let row = space.distance_field(x);
    let target = row[p];
    let mut order: Vec<usize> = (0..space.n()).filter(|&v| row[v] <= target).collect();
    order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).expect("finite distances"));
    let mut count = vec![0u64; space.n()];
    count[x.0] = 1;
    for &v in &order {
        if v == x.0 {
            continue;
        }
        let mut c = 0u64;
        for (u, w) in graph.neighbors(v) {
            if row[u] < row[v] && space.is_tight(&row, u, v, w) {
                c = c.saturating_add(count[u]);
            }
        }
        count[v] = c;
    }
    Ok(count[p.0])
}

/// Searches for `p̂` with `d(p̂,γ₀) ≥ margin` and
/// `d(p̂,γ₁) ≥ d(p̂,γ₀) + d(γ₀,γ₁) − h`; returns the farthest such point.
pub fn is_interior_extendable<T: Real>(
    space: &DiscreteMMSpace<T>,
    gamma: &DiscreteGeodesic<T>,
    margin: T,
) -> Option<Extension<T>> {
    let r0 = space.distance_field(gamma.start());
    let r1 = space.distance_field(gamma.end());
    let h = space.h();
    let mut best: Option<(T, Extension<T>)> = None;
    for z in 0..space.n() {
        if r0[z] < margin {
            continue;
        }
        let defect = r0[z] + gamma.speed - r1[z];
        if defect <= h {
            let better = best.as_ref().map_or(true, |(d, _)| r0[z] > *d);
            if better {
                best = Some((
                    r0[z],
                    Extension {
                        point: PointId(z),
                        defect,
                    },
                ));
            }
        }
    }
    best.map(|(_, e)| e)
}

/// Checks a proposed extension point `p̂` for `γ`.
pub fn certify_extension<T: Real>(
    space: &DiscreteMMSpace<T>,
    gamma: &DiscreteGeodesic<T>,
    p_hat: PointId,
    margin: T,
) -> Option<Extension<T>> {
    let d0 = space.dist(p_hat, gamma.start());
    if d0 < margin {
        return None;
    }
    let defect = d0 + gamma.speed - space.dist(p_hat, gamma.end());
    (defect <= space.h()).then_some(Extension {
        point: p_hat,
        defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> DiscreteMMSpace<f64> {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        DiscreteMMSpace::build_from_edges(n, &edges, vec![1.0; n], 2.0).unwrap()
    }

    #[test]
    fn path_geodesic() {
        let s = line(3);
        let g = shortest_geodesic(&s, PointId(0), PointId(2)).unwrap();
        assert_eq!(g.vertices, vec![PointId(0), PointId(1), PointId(2)]);
        assert_eq!(g.speed, 2.0);
        assert_eq!(g.eval(0.0).unwrap(), PointId(0));
        assert_eq!(g.eval(1.0).unwrap(), PointId(2));
        assert_eq!(g.eval(0.5).unwrap(), PointId(1));
        assert!(matches!(g.eval(1.5), Err(Error::OutOfRange(_))));
        assert!(matches!(
            shortest_geodesic(&s, PointId(1), PointId(1)),
            Err(Error::SamePoint(1))
        ));
    }

    #[test]
    fn eval_ties_prefer_smaller() {
        let s = line(2);
        let g = shortest_geodesic(&s, PointId(0), PointId(1)).unwrap();
        assert_eq!(g.eval(0.5).unwrap(), PointId(0));
    }

    #[test]
    fn tree_leaf_to_leaf_through_root() {
        let s = DiscreteMMSpace::build_from_edges(
            3,
            &[(0, 1, 1.5), (0, 2, 2.5)],
            vec![1.0; 3],
            5.0,
        )
        .unwrap();
        let g = shortest_geodesic(&s, PointId(1), PointId(2)).unwrap();
        assert_eq!(g.vertices, vec![PointId(1), PointId(0), PointId(2)]);
        assert_eq!(g.speed, 4.0);
    }

    #[test]
    fn restrict_prefix() {
        let s = line(5);
        let g = shortest_geodesic(&s, PointId(0), PointId(4)).unwrap();
        assert_eq!(g.restrict(1.0, 1.0).unwrap(), g);
        let r = g.restrict(0.5, 1.0).unwrap();
        assert_eq!(r.vertices, vec![PointId(0), PointId(1), PointId(2)]);
        assert_eq!(r.speed, 2.0);
        assert!(matches!(g.restrict(0.25, 1.0), Err(Error::TooShort { .. })));
    }

    #[test]
    fn path_counts() {
        // 4-cycle: two shortest paths between opposite corners
        let s = DiscreteMMSpace::build_from_edges(
            4,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)],
            vec![1.0; 4],
            2.0,
        )
        .unwrap();
        assert_eq!(shortest_path_count(&s, PointId(0), PointId(2)).unwrap(), 2);
        assert_eq!(shortest_path_count(&s, PointId(0), PointId(1)).unwrap(), 1);
        let g = shortest_geodesic(&s, PointId(0), PointId(2)).unwrap();
        assert_eq!(g.vertices[1], PointId(1));
    }

    #[test]
    fn extendability_on_line() {
        let s = line(9);
        let g = shortest_geodesic(&s, PointId(4), PointId(8)).unwrap();
        let e = is_interior_extendable(&s, &g, 2.0).unwrap();
        assert_eq!(e.point, PointId(0));
        assert_eq!(e.defect, 0.0);
        let g = shortest_geodesic(&s, PointId(0), PointId(8)).unwrap();
        assert!(is_interior_extendable(&s, &g, 2.0).is_none());
    }
}
