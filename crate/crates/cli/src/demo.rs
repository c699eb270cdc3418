//! Representing-function dependence on a three-edge star.
//!
//! Along the arm `γ` toward endpoint 1, both `f₁ = −L·d(1,·)` and
//! `f₂ = L·d(3,·)` represent the gradient, yet along the arm `η` toward
//! endpoint 2 they increase at opposite rates.

use mmangle::angles::{angle_two_geodesics, cosine_formula_angle, represents_gradient_defect, AngleOptions};
use mmangle::geodesic::shortest_geodesic;
use mmangle::spaces::star;
use mmangle::PointId;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub arm_length: f64,
    pub step: f64,
    pub slack: f64,
    pub angle: AngleOptions<f64>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            arm_length: 1.0,
            step: 0.05,
            slack: 0.05,
            angle: AngleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionReading {
    pub name: String,
    pub representing_defect: f64,
    pub represents: bool,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub points: usize,
    pub readings: Vec<FunctionReading>,
    /// Largest spread of angle readings among representing functions.
    pub spread: f64,
    /// Raw cosine-formula arguments between two arms at each arc length.
    pub cosine_arguments: Vec<(f64, f64)>,
    pub cosine_angle: f64,
    pub slack: f64,
}

pub fn tree_demo(cfg: &DemoConfig) -> Result<DemoReport, CliError> {
    let o = star::<f64>(3, cfg.arm_length, cfg.step)?;
    let s = &o.space;
    let (root, a1, a2, a3) = (PointId(0), PointId(1), PointId(2), PointId(3));
    let gamma = shortest_geodesic(s, root, a1)?;
    let eta = shortest_geodesic(s, root, a2)?;
    let opts = &cfg.angle;
    let scale = opts.scale(s);
    let ts = opts.t_grid(s, gamma.speed.min(eta.speed));
    let l = gamma.speed;
    let candidates = [
        ("minus_L_d_p", s.distance_field(a1).scaled(-l)),
        ("L_d_third_arm", s.distance_field(a3).scaled(l)),
    ];
    let mut readings = Vec::new();
    for (name, f) in &candidates {
        let defect = represents_gradient_defect(s, f, &gamma, &ts, scale)?;
        let represents = defect <= cfg.slack;
        let angle = angle_two_geodesics(s, &gamma, &eta, Some(f), &ts, scale, cfg.slack, opts.tolerance)
            .map(|a| a.radians)
            .unwrap_or(f64::NAN);
        readings.push(FunctionReading {
            name: name.to_string(),
            representing_defect: defect,
            represents,
            angle,
        });
    }
    let ok: Vec<f64> = readings.iter().filter(|r| r.represents).map(|r| r.angle).collect();
    let spread = match (ok.iter().copied().reduce(f64::min), ok.iter().copied().reduce(f64::max)) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let lens: Vec<f64> = ts.iter().map(|t| t * l).collect();
    let (cos_angle, _) = cosine_formula_angle(s, &gamma, &eta, &lens, opts.tolerance)?;
    Ok(DemoReport {
        points: s.n(),
        readings,
        spread,
        cosine_arguments: cos_angle.estimate.samples.clone(),
        cosine_angle: cos_angle.radians,
        slack: cfg.slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_demo_separates_readings() {
        let r = tree_demo(&DemoConfig::default()).unwrap();
        assert!(r.readings.iter().all(|f| f.represents));
        assert!((r.readings[0].angle - std::f64::consts::PI).abs() < 1e-12);
        assert!(r.readings[1].angle.abs() < 1e-12);
        assert!(r.spread > 3.0);
        assert_eq!(r.cosine_angle, std::f64::consts::PI);
    }
}
