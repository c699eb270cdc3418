//! Blow-up sequences `(X, d/rᵢ, m^x_{rᵢ}, x)` with Busemann-type fields.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angles::{angle_three_points, inner_product_at, AngleOptions};
use crate::error::{Error, Result};
use crate::geodesic::{certify_extension, shortest_geodesic, Extension};
use crate::scalar::Real;
use crate::space::{Ball, DiscreteMMSpace, PointId, ScalarField};

/// Stages whose unit ball holds fewer points are dropped.
pub const MIN_STAGE_POINTS: usize = 200;

/// One rescaled space with its fields `bⁱ_z = dⁱ(z,·) − dⁱ(z,x)`.
#[derive(Debug, Clone)]
pub struct BlowupStage<T: Real> {
    pub radius: T,
    pub space: DiscreteMMSpace<T>,
    pub unit_ball: Ball<T>,
    pub b_p: ScalarField<T>,
    pub b_q: ScalarField<T>,
    pub b_p_hat: ScalarField<T>,
    pub b_q_hat: ScalarField<T>,
}

#[derive(Debug, Clone)]
pub struct BlowupSequence<T: Real> {
    pub base: DiscreteMMSpace<T>,
    pub x: PointId,
    pub p: PointId,
    pub q: PointId,
    pub p_hat: PointId,
    pub q_hat: PointId,
    /// Extension certificates for `(p, p̂)` and `(q, q̂)`; absent for controls.
    pub certificates: Option<[Extension<T>; 2]>,
    pub stages: Vec<BlowupStage<T>>,
    /// Radii whose stage was dropped, with the reason.
    pub dropped: Vec<(T, String)>,
}

/// `d(ẑ,x) + d(x,z) − d(ẑ,z) ≤ h`, read through a shortest geodesic when the
/// space has a graph.
fn certificate<T: Real>(space: &DiscreteMMSpace<T>, x: PointId, z: PointId, z_hat: PointId) -> Result<Extension<T>> {
    let found = if space.graph().is_some() {
        let gamma = shortest_geodesic(space, x, z)?;
        certify_extension(space, &gamma, z_hat, T::zero())
    } else {
        let defect = space.dist(z_hat, x) + space.dist(x, z) - space.dist(z_hat, z);
        (defect <= space.h()).then_some(Extension { point: z_hat, defect })
    };
    found.ok_or(Error::NotExtendable(z.0))
}

fn busemann<T: Real>(space: &DiscreteMMSpace<T>, z: PointId, x: PointId) -> ScalarField<T> {
    let base = space.dist(z, x);
    space.distance_field(z).map(|d| d - base)
}

/// Builds the rescaled stages for strictly decreasing `radii`. Both `p̂` and
/// `q̂` must extend the geodesics from `x` beyond `x`.
pub fn build_blowup<T: Real>(
    space: &DiscreteMMSpace<T>,
    x: PointId,
    pq: (PointId, PointId),
    hats: (PointId, PointId),
    radii: &[T],
) -> Result<BlowupSequence<T>> {
    build(space, x, pq, hats, radii, true)
}

/// Same as [`build_blowup`] without the extension certificates, for negative
/// controls with arbitrary `p̂`, `q̂`.
pub fn build_blowup_uncertified<T: Real>(
    space: &DiscreteMMSpace<T>,
    x: PointId,
    pq: (PointId, PointId),
    hats: (PointId, PointId),
    radii: &[T],
) -> Result<BlowupSequence<T>> {
    build(space, x, pq, hats, radii, false)
}

fn build<T: Real>(
    space: &DiscreteMMSpace<T>,
    x: PointId,
    (p, q): (PointId, PointId),
    (p_hat, q_hat): (PointId, PointId),
    radii: &[T],
    certify: bool,
) -> Result<BlowupSequence<T>> {
    for z in [x, p, q, p_hat, q_hat] {
        space.check_point(z)?;
    }
    if radii.is_empty() {
        return Err(Error::InvalidGrid("no blow-up radii".into()));
    }
    if radii.iter().any(|&r| !(r > T::zero())) || radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidGrid("radii must be positive and strictly decreasing".into()));
    }
    let certificates = if certify {
        Some([certificate(space, x, p, p_hat)?, certificate(space, x, q, q_hat)?])
    } else {
        None
    };
    let mut stages = Vec::new();
    let mut dropped = Vec::new();
    for &r in radii {
        let unit = space.ball(x, r);
        if unit.len() < MIN_STAGE_POINTS {
            log::warn!("blow-up stage r = {r} has {} points in its unit ball; dropped", unit.len());
            dropped.push((r, format!("{} points in unit ball", unit.len())));
            continue;
        }
        let rescaled = space.rescale(x, r)?;
        let unit_ball = rescaled.ball(x, T::one());
        stages.push(BlowupStage {
            radius: r,
            b_p: busemann(&rescaled, p, x),
            b_q: busemann(&rescaled, q, x),
            b_p_hat: busemann(&rescaled, p_hat, x),
            b_q_hat: busemann(&rescaled, q_hat, x),
            unit_ball,
            space: rescaled,
        });
    }
    Ok(BlowupSequence {
        base: space.clone(),
        x,
        p,
        q,
        p_hat,
        q_hat,
        certificates,
        stages,
        dropped,
    })
}

/// `sup_{B₁} (bⁱ_p + bⁱ_p̂)` and the same for `q`.
pub fn busemann_pair_defect<T: Real>(seq: &BlowupSequence<T>, i: usize) -> Result<(T, T)> {
    let stage = seq
        .stages
        .get(i)
        .ok_or_else(|| Error::InvalidGrid(format!("no blow-up stage {i}")))?;
    let sup = |a: &ScalarField<T>, b: &ScalarField<T>| {
        stage
            .unit_ball
            .members
            .iter()
            .map(|&y| a[y] + b[y])
            .fold(T::neg_infinity(), T::max)
    };
    let dp = sup(&stage.b_p, &stage.b_p_hat);
    let dq = sup(&stage.b_q, &stage.b_q_hat);
    // x itself lies in the ball and contributes 0
    let floor = -T::lit(1e-12);
    if dp < floor || dq < floor {
        return Err(Error::MetricViolation(format!("negative pair defect at stage {i}")));
    }
    Ok((dp, dq))
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions<T> {
    /// Averaging radius in rescaled units.
    pub rho: T,
    pub eps: T,
    /// Lip scale as a multiple of each stage's `h`.
    pub scale_factor: T,
}

impl<T: Real> Default for StabilityOptions<T> {
    fn default() -> Self {
        Self {
            rho: T::lit(0.5),
            eps: T::lit(0.5),
            scale_factor: T::lit(2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StageRow<T: Real> {
    pub radius: T,
    pub pair_defect_p: T,
    pub pair_defect_q: T,
    pub avg_inner_product: T,
    pub unit_ball_points: usize,
    /// Energy `∫_{B₁} |∇(bⁱ_p + bⁱ_p̂)|² dmⁱ` per stage, reported only.
    pub pair_energy: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StabilityReport<T: Real> {
    pub rows: Vec<StageRow<T>>,
    /// `cos ∠pxq` from the three-point angle on the base space.
    pub three_point_cosine: T,
    /// `max − min` of the averaged inner products across stages.
    pub spread: T,
    /// `|last average − three-point cosine|`.
    pub final_gap: T,
}

/// Ball-averaged `⟨∇bⁱ_p, ∇bⁱ_q⟩` over `B_ρ(x)` per stage, compared with the
/// three-point angle at `x`.
pub fn angle_stability_across_scales<T: Real>(seq: &BlowupSequence<T>, opts: StabilityOptions<T>) -> Result<StabilityReport<T>> {
    if seq.stages.is_empty() {
        return Err(Error::InvalidGrid("blow-up has no stages".into()));
    }
    let mut rows = Vec::with_capacity(seq.stages.len());
    for (i, st) in seq.stages.iter().enumerate() {
        let (dp, dq) = busemann_pair_defect(seq, i)?;
        let scale = opts.scale_factor * st.space.h();
        let inner = st.space.ball(seq.x, opts.rho);
        let parts: Vec<(T, T)> = inner
            .members
            .par_iter()
            .filter_map(|&y| {
                let (v, _) = inner_product_at(&st.space, &st.b_p, &st.b_q, y, opts.eps, scale).ok()?;
                let m = st.space.mass(y);
                Some((m * v, m))
            })
            .collect();
        let (num, den) = parts
            .iter()
            .fold((T::zero(), T::zero()), |(a, b), &(v, m)| (a + v, b + m));
        if den == T::zero() {
            return Err(Error::ZeroDenominator);
        }
        let pair = st.b_p.combine(T::one(), &st.b_p_hat, T::one());
        let members = &st.unit_ball.members;
        let lap = crate::harmonic::GraphLaplacian::new(&st.space, members, T::one())?;
        rows.push(StageRow {
            radius: st.radius,
            pair_defect_p: dp,
            pair_defect_q: dq,
            avg_inner_product: num / den,
            unit_ball_points: st.unit_ball.len(),
            pair_energy: lap.energy(&pair),
        });
    }
    let defaults = AngleOptions::<T>::default();
    let base_scale = defaults.scale(&seq.base);
    let three = angle_three_points(&seq.base, seq.p, seq.x, seq.q, &defaults.eps, base_scale, defaults.tolerance)?;
    let (lo, hi) = rows
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), r| {
            (lo.min(r.avg_inner_product), hi.max(r.avg_inner_product))
        });
    let last = rows[rows.len() - 1].avg_inner_product;
    Ok(StabilityReport {
        three_point_cosine: three.cosine,
        spread: hi - lo,
        final_gap: (last - three.cosine).abs(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{euclidean_grid, nearest_point, MetricKind};

    #[test]
    fn straight_line_has_zero_pair_defect() {
        let n = 801;
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 0.01)).collect();
        let s = DiscreteMMSpace::build_from_edges(n, &edges, vec![0.01; n], 0.02).unwrap();
        let (x, p, ph) = (PointId(400), PointId(0), PointId(800));
        let seq = build_blowup(&s, x, (p, p), (ph, ph), &[3.0, 2.0]).unwrap();
        assert_eq!(seq.stages.len(), 2);
        for i in 0..2 {
            let (dp, dq): (f64, f64) = busemann_pair_defect(&seq, i).unwrap();
            assert!(dp.abs() < 1e-12 && dq.abs() < 1e-12);
            let st = &seq.stages[i];
            assert!(st.b_p[x].abs() < 1e-15_f64);
        }
        assert!(build_blowup(&s, x, (p, p), (PointId(200), ph), &[3.0]).is_err());
        let ctl = build_blowup_uncertified(&s, x, (p, p), (PointId(200), ph), &[3.0]).unwrap();
        assert!(ctl.certificates.is_none());
        let (dp, _): (f64, f64) = busemann_pair_defect(&ctl, 0).unwrap();
        assert!((dp - 2.0).abs() < 1e-9);
        assert!(build_blowup(&s, x, (p, p), (ph, ph), &[2.0, 3.0]).is_err());
    }

    #[test]
    fn grid_axis_directions() {
        let o = euclidean_grid::<f64>(&[0.0, 0.0], &[1.0, 1.0], 0.01, 0.025, MetricKind::Exact).unwrap();
        let s = &o.space;
        let at = |a: f64, b: f64| nearest_point(s, &[a, b]).unwrap();
        let x = at(0.5, 0.5);
        let seq = build_blowup(s, x, (at(0.0, 0.5), at(0.5, 0.0)), (at(1.0, 0.5), at(0.5, 1.0)), &[0.2, 0.1]).unwrap();
        let st = &seq.stages[1];
        let c = s.coords().unwrap();
        for &y in &st.unit_ball.members {
            // b_p ≈ first coordinate offset, up to curvature r/(2d(x,p))
            let e = (c[y.0][0] - 0.5) / 0.1;
            assert!((st.b_p[y] - e).abs() < 0.11, "{} vs {e}", st.b_p[y]);
        }
        let (d0, _) = busemann_pair_defect(&seq, 0).unwrap();
        let (d1, _) = busemann_pair_defect(&seq, 1).unwrap();
        assert!(d1 < d0);
        let rep = angle_stability_across_scales(&seq, StabilityOptions::default()).unwrap();
        for r in &rep.rows {
            assert!(r.avg_inner_product.abs() < 0.05, "{r:?}");
        }
        assert!(rep.three_point_cosine.abs() < 0.05);
    }
}
