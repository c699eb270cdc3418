//! Experiment configuration read from JSON.

use std::path::{Path, PathBuf};

use mmangle::angles::AngleOptions;
use mmangle::spaces::{MetricKind, SphereSampling};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Space generators available to configs and `gen-space`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    EuclideanCloud {
        n: usize,
        #[serde(default = "two")]
        dim: usize,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        h: Option<f64>,
    },
    GaussianWeightedCloud {
        n: usize,
        #[serde(default = "two")]
        dim: usize,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        h: Option<f64>,
    },
    SphereCloud {
        n: usize,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        h: Option<f64>,
        #[serde(default)]
        sampling: SphereSampling,
        #[serde(default)]
        metric: MetricKind,
    },
    ConeCloud {
        alpha: f64,
        n: usize,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        h: Option<f64>,
    },
    Star {
        arms: usize,
        len: f64,
        step: f64,
    },
    EuclideanGrid {
        lo: Vec<f64>,
        hi: Vec<f64>,
        delta: f64,
        h: f64,
        #[serde(default)]
        metric: MetricKind,
    },
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSource {
    Generator(GeneratorSpec),
    /// Space JSON with an optional oracle descriptor file.
    File {
        path: PathBuf,
        #[serde(default)]
        oracle: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ThreePoints,
    TwoGeodesics,
    Cosine,
    WassersteinShrinking,
    Harmonic,
    Blowup,
    TwoVariableProbe,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ThreePoints => "three_points",
            Method::TwoGeodesics => "two_geodesics",
            Method::Cosine => "cosine",
            Method::WassersteinShrinking => "wasserstein_shrinking",
            Method::Harmonic => "harmonic",
            Method::Blowup => "blowup",
            Method::TwoVariableProbe => "two_variable_probe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub const ALL: [Method; 7] = [
        Method::ThreePoints,
        Method::TwoGeodesics,
        Method::Cosine,
        Method::WassersteinShrinking,
        Method::Harmonic,
        Method::Blowup,
        Method::TwoVariableProbe,
    ];

    /// Methods whose value is an angle in radians.
    pub fn is_angle(self) -> bool {
        !matches!(self, Method::Harmonic)
    }
}

/// Which drawn triples are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripleSampling {
    pub count: usize,
    /// Lower bound on `d(p,x)`, `d(x,q)` and `d(p,q)`.
    pub min_distance: f64,
    /// Draws before giving up.
    pub max_tries: usize,
    pub filters: DegeneracyFilters,
    /// Explicit triples; sampling is skipped when present.
    pub explicit: Option<Vec<[usize; 3]>>,
}

impl Default for TripleSampling {
    fn default() -> Self {
        Self {
            count: 20,
            min_distance: 0.3,
            max_tries: 20_000,
            filters: DegeneracyFilters::default(),
            explicit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegeneracyFilters {
    pub enabled: bool,
    /// Reject several shortest paths from `x`.
    pub branching: bool,
    /// Reject `d(p,x) + d(x,q) − d(p,q)` below this multiple of `h`.
    pub near_geodesic_factor: f64,
    /// Require both geodesics from `x` to extend beyond `x`.
    pub extendable: bool,
    /// Keep `x` at least one lip scale away from the coordinate box `[0,1]^dim`.
    pub interior_margin: bool,
}

impl Default for DegeneracyFilters {
    fn default() -> Self {
        Self {
            enabled: true,
            branching: true,
            near_geodesic_factor: 2.0,
            extendable: true,
            interior_margin: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Multiplies the space's `h` before any method runs.
    pub h_multiplier: f64,
    pub angle: AngleOptions<f64>,
    /// Representing slack for `two_geodesics` with a supplied function.
    pub slack: f64,
    /// Shrinking-ball radii, decreasing.
    pub radii: Vec<f64>,
    /// Lip scale of the Wasserstein readings as a multiple of `h`.
    pub wasserstein_scale_factor: f64,
    pub wasserstein_eps: f64,
    /// Blow-up radii, decreasing.
    pub blowup_radii: Vec<f64>,
    pub blowup_rho: f64,
    /// The `harmonic` method rescales by `d(x,p) / harmonic_pole_ratio`,
    /// placing the pole at this distance from `x`; at least 2.
    pub harmonic_pole_ratio: f64,
    pub harmonic_dim: f64,
    /// Cone constant of the two-variable probe.
    pub probe_cone: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            h_multiplier: 1.0,
            angle: AngleOptions::default(),
            slack: 0.1,
            radii: vec![0.4, 0.2, 0.1],
            wasserstein_scale_factor: 0.5,
            wasserstein_eps: 0.5,
            blowup_radii: vec![0.4, 0.2, 0.1],
            blowup_rho: 0.5,
            harmonic_pole_ratio: 2.0,
            harmonic_dim: 2.0,
            probe_cone: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub csv: String,
    pub summary: String,
    /// Scatter plot of method value against oracle, when set.
    pub svg: Option<String>,
    /// Per-radius shrinking-ball readings.
    pub shrinking_csv: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            csv: "results.csv".into(),
            summary: "summary.json".into(),
            svg: Some("scatter.svg".into()),
            shrinking_csv: "shrinking.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub space_id: String,
    pub space: SpaceSource,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub triples: TripleSampling,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_id() -> String {
    "space".into()
}

fn decreasing(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::Config(format!("{name} is empty")));
    }
    if v.iter().any(|&r| !(r > 0.0)) || v.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(CliError::Config(format!("{name} must be positive and decreasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // relative space files resolve against the config's directory
        if let SpaceSource::File { path: p, oracle } = &mut cfg.space {
            let base = path.parent().unwrap_or(Path::new("."));
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if let Some(o) = oracle {
                if o.is_relative() {
                    *o = base.join(&*o);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.methods.is_empty() {
            return Err(CliError::Config("method list is empty".into()));
        }
        let n = &self.numerics;
        let a = &n.angle;
        if !(a.tolerance > 0.0) {
            return Err(CliError::Config("tolerance must be positive".into()));
        }
        if a.eps.is_empty() || a.eps.iter().any(|&e| !(e > 0.0)) {
            return Err(CliError::Config("ε grid must be nonempty and positive".into()));
        }
        if !(a.t0 > 0.0 && a.t0 <= 1.0) || !(a.ratio > 0.0 && a.ratio < 1.0) {
            return Err(CliError::Config("t grid needs 0 < t0 ≤ 1 and 0 < ratio < 1".into()));
        }
        for (name, v) in [
            ("h_multiplier", n.h_multiplier),
            ("scale_factor", a.scale_factor),
            ("min_len_factor", a.min_len_factor),
            ("wasserstein_scale_factor", n.wasserstein_scale_factor),
            ("wasserstein_eps", n.wasserstein_eps),
            ("harmonic_dim", n.harmonic_dim),
            ("blowup_rho", n.blowup_rho),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Config(format!("{name} must be positive")));
            }
        }
        if !(n.harmonic_pole_ratio >= 2.0) {
            return Err(CliError::Config("harmonic_pole_ratio must be at least 2".into()));
        }
        if !(n.probe_cone >= 1.0) {
            return Err(CliError::Config("probe_cone must be at least 1".into()));
        }
        decreasing("radii", &n.radii)?;
        decreasing("blowup_radii", &n.blowup_radii)?;
        let f = &self.triples;
        if f.explicit.is_none() && f.count == 0 {
            return Err(CliError::Config("triple count is zero".into()));
        }
        if !(f.min_distance >= 0.0) || !(f.filters.near_geodesic_factor >= 0.0) {
            return Err(CliError::Config("filters must be non-negative".into()));
        }
        Ok(())
    }
}
