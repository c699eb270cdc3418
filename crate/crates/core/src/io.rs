//! JSON documents for spaces, geodesics, plans and potentials.
//!
//! A space is stored as its points, edges and scale; the distance matrix is
//! recomputed on load.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{DiscreteMMSpace, EmbeddedMetric, PointId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Serialized form of a [`DiscreteMMSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDocument {
    pub points: Vec<PointRecord>,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
    pub h: f64,
    /// Exact coordinate metric; when present `edges` must be empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<EmbeddedMetric>,
    /// Multiplier on stored distances, 1 unless the space was rescaled.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

impl SpaceDocument {
    pub fn from_space<T: Real>(space: &DiscreteMMSpace<T>) -> Self {
        let coords = space.coords();
        let points = (0..space.n())
            .map(|i| PointRecord {
                id: i,
                coords: coords.map(|c| c[i].iter().map(|v| v.as_f64()).collect()),
                mass: space.mass(PointId(i)).as_f64(),
            })
            .collect();
        let edges = space
            .graph()
            .map(|g| {
                g.edges()
                    .map(|(u, v, w)| EdgeRecord { u, v, w: w.as_f64() })
                    .collect()
            })
            .unwrap_or_default();
        Self {
            points,
            edges,
            h: space.h().as_f64(),
            metric: space.embedded_metric(),
            scale: space.distance_scale().as_f64(),
            basepoint: space.basepoint().map(|p| p.0),
        }
    }

    /// Rebuilds the space. Point ids must be a permutation of `0..n`.
    pub fn to_space<T: Real>(&self) -> Result<DiscreteMMSpace<T>> {
        let n = self.points.len();
        let mut slots: Vec<Option<&PointRecord>> = vec![None; n];
        for p in &self.points {
            if p.id >= n || slots[p.id].is_some() {
                return Err(Error::InvalidSpace(format!("point ids are not a permutation of 0..{n}")));
            }
            slots[p.id] = Some(p);
        }
        let pts: Vec<&PointRecord> = slots.into_iter().flatten().collect();
        let measure: Vec<T> = pts.iter().map(|p| T::lit(p.mass)).collect();
        let coords: Option<Vec<Vec<T>>> = pts
            .iter()
            .map(|p| p.coords.as_ref().map(|c| c.iter().map(|&v| T::lit(v)).collect()))
            .collect();
        let any_coords = pts.iter().any(|p| p.coords.is_some());
        if any_coords && coords.is_none() {
            return Err(Error::InvalidSpace("coordinates given for some points only".into()));
        }
        let h = T::lit(self.h);
        // stored h is in scaled units; construction checks it in stored units
        let raw_h = T::lit(self.h / self.scale);
        let space = match self.metric {
            Some(metric) => {
                if !self.edges.is_empty() {
                    return Err(Error::InvalidSpace("exact metric spaces carry no edges".into()));
                }
                let coords = coords.ok_or_else(|| Error::InvalidSpace("exact metric needs coordinates".into()))?;
                DiscreteMMSpace::from_embedded(coords, metric, measure, raw_h)?
            }
            None => {
                let edges: Vec<(usize, usize, T)> = self.edges.iter().map(|e| (e.u, e.v, T::lit(e.w))).collect();
                DiscreteMMSpace::build_from_edges_with(n, &edges, measure, raw_h, coords, Default::default())?
            }
        };
        let mut space = space.with_distance_scale(T::lit(self.scale))?.with_h(h)?;
        if let Some(b) = self.basepoint {
            space = space.with_basepoint(PointId(b))?;
        }
        Ok(space)
    }
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::InvalidSpace(e.to_string())
}

pub fn to_json<V: Serialize>(value: &V) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(io_error)
}

pub fn from_json<V: DeserializeOwned>(text: &str) -> Result<V> {
    serde_json::from_str(text).map_err(io_error)
}

pub fn write_json<V: Serialize>(path: impl AsRef<Path>, value: &V) -> Result<()> {
    std::fs::write(path, to_json(value)? + "\n").map_err(io_error)
}

pub fn read_json<V: DeserializeOwned>(path: impl AsRef<Path>) -> Result<V> {
    from_json(&std::fs::read_to_string(path).map_err(io_error)?)
}

pub fn write_space<T: Real>(path: impl AsRef<Path>, space: &DiscreteMMSpace<T>) -> Result<()> {
    write_json(path, &SpaceDocument::from_space(space))
}

pub fn read_space<T: Real>(path: impl AsRef<Path>) -> Result<DiscreteMMSpace<T>> {
    read_json::<SpaceDocument>(path)?.to_space()
}
