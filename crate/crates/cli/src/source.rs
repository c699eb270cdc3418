//! Building and loading the space an experiment runs on.

use std::path::{Path, PathBuf};

use mmangle::spaces::{
    cone_cloud, euclidean_cloud, euclidean_grid, gaussian_weighted_cloud, sphere_cloud, star, OracleDescriptor,
    OracleSpace,
};
use mmangle::{io, PointId, Space};
use serde::{Deserialize, Serialize};

use crate::config::{GeneratorSpec, SpaceSource};
use crate::error::CliError;

/// Oracle descriptor written next to a generated space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFile {
    pub space_id: String,
    pub description: String,
    #[serde(default)]
    pub curvature: Option<(f64, f64)>,
    pub oracle: OracleDescriptor,
    /// Space JSON, relative to this file.
    pub space: PathBuf,
}

#[derive(Debug, Clone)]
pub struct LoadedSpace {
    pub id: String,
    pub space: Space,
    pub oracle: Option<OracleDescriptor>,
    pub curvature: Option<(f64, f64)>,
    pub description: String,
}

impl LoadedSpace {
    pub fn oracle_angle(&self, p: PointId, x: PointId, q: PointId) -> Option<f64> {
        self.oracle.as_ref()?.angle(&self.space, p, x, q)
    }

    fn from_oracle(id: String, o: OracleSpace<f64>) -> Self {
        Self {
            id,
            space: o.space,
            oracle: Some(o.oracle),
            curvature: o.curvature,
            description: o.description,
        }
    }
}

pub fn generate(spec: &GeneratorSpec, default_seed: u64) -> Result<OracleSpace<f64>, CliError> {
    let s = |seed: &Option<u64>| seed.unwrap_or(default_seed);
    let out = match spec {
        GeneratorSpec::EuclideanCloud { n, dim, seed, h } => euclidean_cloud(*n, *dim, s(seed), *h)?,
        GeneratorSpec::GaussianWeightedCloud { n, dim, seed, h } => gaussian_weighted_cloud(*n, *dim, s(seed), *h)?,
        GeneratorSpec::SphereCloud {
            n,
            seed,
            h,
            sampling,
            metric,
        } => sphere_cloud(*n, s(seed), *h, *sampling, *metric)?,
        GeneratorSpec::ConeCloud { alpha, n, seed, h } => cone_cloud(*alpha, *n, s(seed), *h)?,
        GeneratorSpec::Star { arms, len, step } => star(*arms, *len, *step)?,
        GeneratorSpec::EuclideanGrid {
            lo,
            hi,
            delta,
            h,
            metric,
        } => euclidean_grid(lo, hi, *delta, *h, *metric)?,
    };
    Ok(out)
}

pub fn read_oracle_file(path: &Path) -> Result<(OracleFile, Space), CliError> {
    let file: OracleFile = io::read_json(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let space_path = if file.space.is_relative() {
        path.parent().unwrap_or(Path::new(".")).join(&file.space)
    } else {
        file.space.clone()
    };
    let space = io::read_space(&space_path).map_err(|e| CliError::Config(format!("{}: {e}", space_path.display())))?;
    Ok((file, space))
}

pub fn load(source: &SpaceSource, id: &str, seed: u64) -> Result<LoadedSpace, CliError> {
    match source {
        SpaceSource::Generator(spec) => Ok(LoadedSpace::from_oracle(id.to_string(), generate(spec, seed)?)),
        SpaceSource::File { path, oracle: None } => {
            let space = io::read_space(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Ok(LoadedSpace {
                id: id.to_string(),
                space,
                oracle: None,
                curvature: None,
                description: path.display().to_string(),
            })
        }
        SpaceSource::File { path, oracle: Some(o) } => {
            let (file, _) = read_oracle_file(o)?;
            let space = io::read_space(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Ok(LoadedSpace {
                id: id.to_string(),
                space,
                oracle: Some(file.oracle),
                curvature: file.curvature,
                description: file.description,
            })
        }
    }
}

/// Writes `<stem>.json` and `<stem>.oracle.json`; returns both paths.
pub fn write_generated(o: &OracleSpace<f64>, id: &str, space_path: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    io::write_space(space_path, &o.space)?;
    let oracle_path = space_path.with_extension("oracle.json");
    let file = OracleFile {
        space_id: id.to_string(),
        description: o.description.clone(),
        curvature: o.curvature,
        oracle: o.oracle.clone(),
        space: PathBuf::from(space_path.file_name().expect("space path names a file")),
    };
    io::write_json(&oracle_path, &file)?;
    Ok((space_path.to_path_buf(), oracle_path))
}
