//! Finite-sample limit estimates and angle values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest cosine overshoot that is clamped without marking the reading unreliable.
pub const CLAMP_LIMIT: f64 = 0.05;

/// Value of a one-sided limit read off a finite grid of scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LimitEstimate<T: Real> {
    pub value: T,
    /// `(scale, reading)` pairs, scale decreasing.
    pub samples: Vec<(T, T)>,
    pub lower: T,
    pub upper: T,
    pub converged: bool,
    /// Bracket width accepted as converged.
    pub tolerance: T,
}

impl<T: Real> LimitEstimate<T> {
    /// Value is the reading at the finest scale; the bracket spans the last two readings.
    pub fn from_samples(mut samples: Vec<(T, T)>, tolerance: T) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidProblem("limit with no samples".into()));
        }
        samples.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scales"));
        let last = samples[samples.len() - 1].1;
        let prev = if samples.len() > 1 {
            samples[samples.len() - 2].1
        } else {
            last
        };
        Ok(Self {
            value: last,
            lower: last.min(prev),
            upper: last.max(prev),
            converged: samples.len() > 1 && (last - prev).abs() <= tolerance,
            samples,
            tolerance,
        })
    }

    /// Explicit bracket with the midpoint as value.
    pub fn bracket(samples: Vec<(T, T)>, lower: T, upper: T, tolerance: T) -> Self {
        let (lo, hi) = if lower <= upper { (lower, upper) } else { (upper, lower) };
        Self {
            value: (lo + hi) * T::lit(0.5),
            samples,
            lower: lo,
            upper: hi,
            converged: hi - lo <= tolerance,
            tolerance,
        }
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }
}

/// An angle in `[0, π]` with the limit it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AngleValue<T: Real> {
    pub radians: T,
    pub cosine: T,
    pub estimate: LimitEstimate<T>,
    /// `max(0, |raw cosine| − 1)` before clamping.
    pub clamp: T,
    pub reliable: bool,
}

/// Clamps a raw cosine into `[−1, 1]`, snapping values within round-off of ±1.
pub fn clamp_cosine<T: Real>(raw: T) -> (T, T) {
    let snap = T::lit(64.0) * T::epsilon();
    let over = (raw.abs() - T::one()).max(T::zero());
    let c = if (raw - T::one()).abs() <= snap {
        T::one()
    } else if (raw + T::one()).abs() <= snap {
        -T::one()
    } else {
        raw.max(-T::one()).min(T::one())
    };
    (c, over)
}

impl<T: Real> AngleValue<T> {
    /// Builds the angle whose cosine is the estimate's value.
    pub fn from_cosine(estimate: LimitEstimate<T>) -> Self {
        let (cosine, clamp) = clamp_cosine(estimate.value);
        Self {
            radians: cosine.acos(),
            cosine,
            estimate,
            clamp,
            reliable: clamp <= T::lit(CLAMP_LIMIT),
        }
    }

    pub fn degrees(&self) -> T {
        self.radians.to_degrees()
    }
}

/// Geometric grid `t₀, t₀ρ, t₀ρ², …` stopping before `t·len < min_len`.
pub fn geometric_grid<T: Real>(t0: T, ratio: T, len: T, min_len: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut t = t0;
    while t * len >= min_len && out.len() < 64 {
        out.push(t);
        t = t * ratio;
    }
    out
}
