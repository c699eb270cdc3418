//! Angles on finite metric measure spaces.

pub mod angles;
pub mod blowup;
pub mod error;
pub mod geodesic;
pub mod harmonic;
pub mod io;
pub mod limit;
pub mod scalar;
pub mod space;
pub mod spaces;
pub mod wasserstein;
mod spatial;

pub use error::{Error, Result};
pub use geodesic::{DiscreteGeodesic, Extension};
pub use limit::{AngleValue, LimitEstimate};
pub use scalar::Real;
pub use space::{Ball, DiscreteMMSpace, EmbeddedMetric, PointId, ScalarField, Storage};

pub type Space = DiscreteMMSpace<f64>;
pub type Space32 = DiscreteMMSpace<f32>;
pub type Field = ScalarField<f64>;
pub type Geodesic = DiscreteGeodesic<f64>;
pub type Angle = AngleValue<f64>;
