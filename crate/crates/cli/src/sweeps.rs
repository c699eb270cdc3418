//! Harmonic-approximation and blow-up sweeps on exact Euclidean grids.

use mmangle::blowup::{
    angle_stability_across_scales, build_blowup, build_blowup_uncertified, StabilityOptions, StabilityReport,
};
use mmangle::harmonic::{bounded_poisson_g, harmonic_approximation};
use mmangle::spaces::{euclidean_grid, nearest_point, MetricKind};
use mmangle::{PointId, Space};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub delta: f64,
    /// `h = h_factor · delta`.
    pub h_factor: f64,
}

impl GridSpec {
    pub fn build(&self, delta: f64) -> Result<Space, CliError> {
        Ok(euclidean_grid::<f64>(&self.lo, &self.hi, delta, self.h_factor * delta, MetricKind::Exact)?.space)
    }
}

fn point(space: &Space, at: &[f64]) -> Result<PointId, CliError> {
    nearest_point(space, at).ok_or_else(|| CliError::Config(format!("no grid point near {at:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonicSweepConfig {
    pub grid: GridSpec,
    /// Grid spacings; the first is the base grid.
    pub deltas: Vec<f64>,
    pub center: Vec<f64>,
    /// Poles sit at `center − R e₁`.
    pub pole_distances: Vec<f64>,
    pub dim: f64,
}

impl Default for HarmonicSweepConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec {
                lo: vec![-8.2, -1.3],
                hi: vec![1.3, 1.3],
                delta: 0.04,
                h_factor: 2.5,
            },
            deltas: vec![0.04, 0.02],
            center: vec![0.0, 0.0],
            pole_distances: vec![2.0, 4.0, 8.0],
            dim: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicRow {
    #[serde(rename = "R")]
    pub r: f64,
    pub sup_deviation: f64,
    pub energy_deviation: f64,
    #[serde(rename = "C_of_G")]
    pub c_of_g: f64,
    pub residual: f64,
    pub delta: f64,
    pub points: usize,
    pub maximum_principle: bool,
    pub g_residual: f64,
}

pub fn sweep_harmonic(cfg: &HarmonicSweepConfig) -> Result<Vec<HarmonicRow>, CliError> {
    if cfg.deltas.is_empty() || cfg.pole_distances.is_empty() {
        return Err(CliError::Config("harmonic sweep needs deltas and pole distances".into()));
    }
    let mut rows = Vec::new();
    for &delta in &cfg.deltas {
        let s = cfg.grid.build(delta)?;
        let x0 = point(&s, &cfg.center)?;
        let g = bounded_poisson_g(&s, s.ball(x0, 1.0), cfg.dim)?;
        for &r in &cfg.pole_distances {
            let mut at = cfg.center.clone();
            at[0] -= r;
            let p = point(&s, &at)?;
            let a = harmonic_approximation(&s, x0, p, cfg.dim)?;
            rows.push(HarmonicRow {
                r,
                sup_deviation: a.report.sup_deviation,
                energy_deviation: a.report.energy_deviation,
                c_of_g: g.bound,
                residual: a.report.residual,
                delta,
                points: s.n(),
                maximum_principle: a.report.maximum_principle,
                g_residual: g.residual,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupSweepConfig {
    pub grid: GridSpec,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub q_hat: Vec<f64>,
    /// Non-collinear `p̂`, `q̂` for the negative control.
    pub control_p_hat: Vec<f64>,
    pub control_q_hat: Vec<f64>,
    pub radii: Vec<f64>,
    pub rho: f64,
    pub eps: f64,
    pub scale_factor: f64,
}

impl Default for BlowupSweepConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec {
                lo: vec![-2.0, -1.0],
                hi: vec![2.0, 1.0],
                delta: 0.01,
                h_factor: 2.5,
            },
            x: vec![0.0, 0.0],
            p: vec![-2.0, 0.0],
            q: vec![-1.0, -1.0],
            p_hat: vec![2.0, 0.0],
            q_hat: vec![1.0, 1.0],
            control_p_hat: vec![0.0, 1.0],
            control_q_hat: vec![1.0, -1.0],
            radii: vec![0.4, 0.2, 0.1],
            rho: 0.5,
            eps: 0.5,
            scale_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupRow {
    pub sequence: String,
    pub r_i: f64,
    pub pair_defect_p: f64,
    pub pair_defect_q: f64,
    pub avg_inner_product: f64,
    pub n_points_in_unit_ball: usize,
    pub pair_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupSweep {
    pub rows: Vec<BlowupRow>,
    pub collinear: StabilityReport<f64>,
    pub control: StabilityReport<f64>,
    pub dropped: Vec<f64>,
}

pub fn sweep_blowup(cfg: &BlowupSweepConfig) -> Result<BlowupSweep, CliError> {
    let s = cfg.grid.build(cfg.grid.delta)?;
    let at = |v: &[f64]| point(&s, v);
    let x = at(&cfg.x)?;
    let pq = (at(&cfg.p)?, at(&cfg.q)?);
    let opts = StabilityOptions {
        rho: cfg.rho,
        eps: cfg.eps,
        scale_factor: cfg.scale_factor,
    };
    let main = build_blowup(&s, x, pq, (at(&cfg.p_hat)?, at(&cfg.q_hat)?), &cfg.radii)?;
    let ctl = build_blowup_uncertified(&s, x, pq, (at(&cfg.control_p_hat)?, at(&cfg.control_q_hat)?), &cfg.radii)?;
    let collinear = angle_stability_across_scales(&main, opts)?;
    let control = angle_stability_across_scales(&ctl, opts)?;
    let mut rows = Vec::new();
    for (name, rep) in [("collinear", &collinear), ("control", &control)] {
        rows.extend(rep.rows.iter().map(|r| BlowupRow {
            sequence: name.to_string(),
            r_i: r.radius,
            pair_defect_p: r.pair_defect_p,
            pair_defect_q: r.pair_defect_q,
            avg_inner_product: r.avg_inner_product,
            n_points_in_unit_ball: r.unit_ball_points,
            pair_energy: r.pair_energy,
        }));
    }
    Ok(BlowupSweep {
        rows,
        collinear,
        control,
        dropped: main.dropped.iter().map(|d| d.0).collect(),
    })
}
