//! Pointwise angle notions built from local Lipschitz constants.
//!
//! Everything here is a finite-scale surrogate: `lip` maximizes difference
//! quotients over the open ball of radius `scale`, and the ε- and t-limits of
//! the continuous definitions are read off finite grids (see [`LimitEstimate`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{shortest_path_count, DiscreteGeodesic};
use crate::limit::{clamp_cosine, geometric_grid, AngleValue, LimitEstimate, CLAMP_LIMIT};
use crate::scalar::Real;
use crate::space::{DiscreteMMSpace, PointId, ScalarField};

/// Numeric knobs shared by the angle estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct AngleOptions<T: Real> {
    /// `lip` is evaluated at `scale_factor · h`.
    pub scale_factor: T,
    /// Positive ε values; each is used with both signs.
    pub eps: Vec<T>,
    /// First parameter of the geometric t-grid.
    pub t0: T,
    pub ratio: T,
    /// The t-grid stops once the arc length drops below `min_len_factor · h`.
    pub min_len_factor: T,
    pub tolerance: T,
}

impl<T: Real> Default for AngleOptions<T> {
    fn default() -> Self {
        Self {
            scale_factor: T::lit(2.0),
            eps: vec![T::one(), T::lit(0.5), T::lit(0.25)],
            t0: T::lit(0.5),
            ratio: T::lit(0.5),
            min_len_factor: T::lit(0.25),
            tolerance: T::lit(0.05),
        }
    }
}

impl<T: Real> AngleOptions<T> {
    pub fn scale(&self, space: &DiscreteMMSpace<T>) -> T {
        self.scale_factor * space.h()
    }

    /// Parameter grid for a geodesic of length `len`.
    pub fn t_grid(&self, space: &DiscreteMMSpace<T>, len: T) -> Vec<T> {
        geometric_grid(self.t0, self.ratio, len, self.min_len_factor * space.h())
    }
}

/// Punctured ball `B_s(x) \ {x}` with distances, reused across `lip` calls.
#[derive(Debug, Clone)]
pub struct Neighborhood<T> {
    pub center: PointId,
    pub scale: T,
    pub points: Vec<usize>,
    pub dists: Vec<T>,
}

impl<T: Real> Neighborhood<T> {
    pub fn new(space: &DiscreteMMSpace<T>, x: PointId, scale: T) -> Result<Self> {
        space.check_point(x)?;
        let (points, dists): (Vec<_>, Vec<_>) = space
            .neighborhood(x, scale)
            .into_iter()
            .filter(|&(j, _)| j != x.0)
            .unzip();
        if points.is_empty() {
            return Err(Error::EmptyNeighborhood(x.0));
        }
        Ok(Self {
            center: x,
            scale,
            points,
            dists,
        })
    }

    /// Difference quotients `(f(y) − f(x)) / d(x,y)`.
    pub fn slopes(&self, f: &ScalarField<T>) -> Vec<T> {
        let fx = f[self.center];
        self.points
            .iter()
            .zip(&self.dists)
            .map(|(&y, &d)| (f[y] - fx) / d)
            .collect()
    }

    pub fn lip(&self, f: &ScalarField<T>) -> T {
        self.slopes(f)
            .into_iter()
            .fold(T::zero(), |m, s| m.max(s.abs()))
    }
}

/// `lip(a + εb)²` from precomputed slopes.
fn lip_sq_combo<T: Real>(a: &[T], b: &[T], eps: T) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (&x, &y)| m.max((x + eps * y) * (x + eps * y)))
}

fn lip_sq<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x * x))
}

/// `F_ε = [lip(f + εg)² − lip(f)²] / (2ε)` from slopes.
pub fn f_eps_from_slopes<T: Real>(a: &[T], b: &[T], eps: T) -> T {
    (lip_sq_combo(a, b, eps) - lip_sq(a)) / (T::lit(2.0) * eps)
}

/// Local Lipschitz constant of `f` at `x` at the given scale.
pub fn lip<T: Real>(space: &DiscreteMMSpace<T>, f: &ScalarField<T>, x: PointId, scale: T) -> Result<T> {
    Ok(Neighborhood::new(space, x, scale)?.lip(f))
}

/// `lip` at each scale in `scales` (decreasing); value is the finest reading.
pub fn lip_extrapolated<T: Real>(
    space: &DiscreteMMSpace<T>,
    f: &ScalarField<T>,
    x: PointId,
    scales: &[T],
    tolerance: T,
) -> Result<LimitEstimate<T>> {
    if scales.len() < 3 {
        return Err(Error::InvalidProblem("need at least three scales".into()));
    }
    if scales.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidProblem("scales must decrease".into()));
    }
    if scales.iter().any(|&s| s < space.h()) {
        return Err(Error::InvalidProblem("scales must be at least h".into()));
    }
    let samples = scales
        .iter()
        .map(|&s| Ok((s, lip(space, f, x, s)?)))
        .collect::<Result<Vec<_>>>()?;
    LimitEstimate::from_samples(samples, tolerance)
}

/// One-sided readings of the ε-quotient at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EpsReadings<T: Real> {
    /// `(ε, F_ε, F_{−ε})` for each ε, decreasing.
    pub readings: Vec<(T, T, T)>,
    pub lip_f: T,
    pub lip_g: T,
}

impl<T: Real> EpsReadings<T> {
    pub fn compute(nb: &Neighborhood<T>, f: &ScalarField<T>, g: &ScalarField<T>, eps: &[T]) -> Self {
        let a = nb.slopes(f);
        let b = nb.slopes(g);
        let mut eps: Vec<T> = eps.to_vec();
        eps.sort_by(|x, y| y.partial_cmp(x).expect("finite ε"));
        let readings = eps
            .iter()
            .map(|&e| (e, f_eps_from_slopes(&a, &b, e), f_eps_from_slopes(&a, &b, -e)))
            .collect();
        Self {
            readings,
            lip_f: lip_sq(&a).sqrt(),
            lip_g: lip_sq(&b).sqrt(),
        }
    }

    /// Bracket `[F_{−ε_min}, F_{+ε_min}]` with the midpoint as value.
    pub fn estimate(&self, tolerance: T) -> LimitEstimate<T> {
        let &(e, plus, minus) = self.readings.last().expect("nonempty ε grid");
        let samples = self
            .readings
            .iter()
            .map(|&(e, p, m)| (e, (p + m) * T::lit(0.5)))
            .collect();
        // the continuum bracket already has width ε·lip(g)²
        let tol = tolerance + e * self.lip_g * self.lip_g;
        LimitEstimate::bracket(samples, minus, plus, tol)
    }
}

/// `∠pxq` from the ε-quotient of `lip(r_p + ε r_q)²`.
pub fn angle_three_points<T: Real>(
    space: &DiscreteMMSpace<T>,
    p: PointId,
    x: PointId,
    q: PointId,
    eps: &[T],
    scale: T,
    tolerance: T,
) -> Result<AngleValue<T>> {
    let rp = space.distance_field(p);
    let rq = if q == p { rp.clone() } else { space.distance_field(q) };
    angle_three_points_with(space, &rp, x, &rq, eps, scale, tolerance)
}

/// [`angle_three_points`] with precomputed distance fields.
pub fn angle_three_points_with<T: Real>(
    space: &DiscreteMMSpace<T>,
    rp: &ScalarField<T>,
    x: PointId,
    rq: &ScalarField<T>,
    eps: &[T],
    scale: T,
    tolerance: T,
) -> Result<AngleValue<T>> {
    if eps.is_empty() {
        return Err(Error::InvalidProblem("empty ε grid".into()));
    }
    let nb = Neighborhood::new(space, x, scale)?;
    let r = EpsReadings::compute(&nb, rp, rq, eps);
    if r.lip_f == T::zero() || r.lip_g == T::zero() {
        return Err(Error::DegenerateLip(x.0));
    }
    Ok(AngleValue::from_cosine(r.estimate(tolerance)))
}

/// Pointwise `½(F_{+ε} + F_{−ε})` and the bracket width `F_{+ε} − F_{−ε}`.
///
/// Points with an empty punctured ball get 0 in both fields.
pub fn inner_product_field<T: Real>(
    space: &DiscreteMMSpace<T>,
    f: &ScalarField<T>,
    g: &ScalarField<T>,
    eps: T,
    scale: T,
) -> (ScalarField<T>, ScalarField<T>) {
    let pairs: Vec<(T, T)> = (0..space.n())
        .into_par_iter()
        .map(|x| inner_product_at(space, f, g, PointId(x), eps, scale).unwrap_or((T::zero(), T::zero())))
        .collect();
    let (v, w): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    (ScalarField::new(v), ScalarField::new(w))
}

/// Value and bracket width of the inner-product reading at one point.
pub fn inner_product_at<T: Real>(
    space: &DiscreteMMSpace<T>,
    f: &ScalarField<T>,
    g: &ScalarField<T>,
    x: PointId,
    eps: T,
    scale: T,
) -> Result<(T, T)> {
    let nb = Neighborhood::new(space, x, scale)?;
    let a = nb.slopes(f);
    let b = nb.slopes(g);
    let plus = f_eps_from_slopes(&a, &b, eps);
    let minus = f_eps_from_slopes(&a, &b, -eps);
    Ok(((plus + minus) * T::lit(0.5), plus - minus))
}

/// Default representing function `f_γ = −d(γ₀,γ₁)·d(γ₁,·)`.
pub fn f_gamma<T: Real>(space: &DiscreteMMSpace<T>, gamma: &DiscreteGeodesic<T>) -> ScalarField<T> {
    space.distance_field(gamma.end()).scaled(-gamma.speed)
}

/// Quotients `(f(γ_t) − f(γ₀)) / t'` with `t'` the realized parameter of `γ_t`.
fn quotients<T: Real>(
    f: &ScalarField<T>,
    gamma: &DiscreteGeodesic<T>,
    t_list: &[T],
) -> Result<Vec<(T, T)>> {
    let f0 = f[gamma.start()];
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let (y, len) = gamma.eval_with_length(t)?;
        if len == T::zero() {
            continue;
        }
        let tr = len / gamma.speed;
        out.push((t, (f[y] - f0) / tr));
    }
    if out.is_empty() {
        return Err(Error::TooShort {
            length: gamma.speed.as_f64(),
            minimum: 0.0,
        });
    }
    Ok(out)
}

/// Signed defect of `f` representing `∇f` along `γ` at time 0:
/// `½lip(f)²(γ₀) + ½|γ̇|² − liminf_t (f(γ_t) − f(γ₀))/t`.
///
/// The liminf is read as the smaller of the two finest quotients.
pub fn represents_gradient_defect<T: Real>(
    space: &DiscreteMMSpace<T>,
    f: &ScalarField<T>,
    gamma: &DiscreteGeodesic<T>,
    t_list: &[T],
    scale: T,
) -> Result<T> {
    if gamma.speed == T::zero() {
        return Err(Error::ZeroSpeed);
    }
    let q = quotients(f, gamma, t_list)?;
    let lipf = lip(space, f, gamma.start(), scale)?;
    let k = q.len();
    let liminf = if k > 1 { q[k - 1].1.min(q[k - 2].1) } else { q[0].1 };
    let half = T::lit(0.5);
    Ok(half * lipf * lipf + half * gamma.speed * gamma.speed - liminf)
}

/// Angle between geodesics `γ` and `η` issuing from a common point, read from
/// `(f(η_t) − f(η₀)) / (t·|γ̇||η̇|)` with `f` representing `∇` along `γ`.
///
/// When `f` is supplied, its representing defect must not exceed `slack`.
#[allow(clippy::too_many_arguments)]
pub fn angle_two_geodesics<T: Real>(
    space: &DiscreteMMSpace<T>,
    gamma: &DiscreteGeodesic<T>,
    eta: &DiscreteGeodesic<T>,
    f: Option<&ScalarField<T>>,
    t_list: &[T],
    scale: T,
    slack: T,
    tolerance: T,
) -> Result<AngleValue<T>> {
    if gamma.start() != eta.start() {
        return Err(Error::DifferentStart(gamma.start().0, eta.start().0));
    }
    if gamma.speed == T::zero() || eta.speed == T::zero() {
        return Err(Error::ZeroSpeed);
    }
    let owned;
    let f = match f {
        Some(f) => {
            let defect = represents_gradient_defect(space, f, gamma, &represent_grid(gamma, t_list), scale)?;
            if defect > slack {
                return Err(Error::NotRepresenting {
                    defect: defect.as_f64(),
                    slack: slack.as_f64(),
                });
            }
            f
        }
        None => {
            owned = f_gamma(space, gamma);
            &owned
        }
    };
    let norm = gamma.speed * eta.speed;
    let samples = quotients(f, eta, t_list)?
        .into_iter()
        .map(|(t, v)| (t, v / norm))
        .collect();
    Ok(AngleValue::from_cosine(LimitEstimate::from_samples(samples, tolerance)?))
}

/// The representing check uses the same grid restricted to resolvable times.
fn represent_grid<T: Real>(gamma: &DiscreteGeodesic<T>, t_list: &[T]) -> Vec<T> {
    let v: Vec<T> = t_list
        .iter()
        .copied()
        .filter(|&t| gamma.eval_with_length(t).map_or(false, |(_, l)| l > T::zero()))
        .collect();
    if v.is_empty() {
        vec![T::one()]
    } else {
        v
    }
}

/// Vertex of `γ` at arc length `s` from the start, with its realized length.
fn at_length<T: Real>(gamma: &DiscreteGeodesic<T>, s: T) -> Result<(PointId, T)> {
    if gamma.speed == T::zero() {
        return Err(Error::ZeroSpeed);
    }
    gamma.eval_with_length((s / gamma.speed).min(T::one()))
}

/// Law-of-cosines argument for the comparison triangle with sides `a`, `b`, `d`.
fn comparison_cosine<T: Real>(a: T, b: T, d: T) -> T {
    (a * a + b * b - d * d) / (T::lit(2.0) * a * b)
}

/// Angle from `(2t² − d(γ_t,η_t)²) / (2t²)` with both curves at arc length `t`.
///
/// `t_list` holds arc lengths, decreasing. The realized arc lengths `a`, `b`
/// of the evaluated vertices enter the comparison triangle in place of `t`.
pub fn cosine_formula_angle<T: Real>(
    space: &DiscreteMMSpace<T>,
    gamma: &DiscreteGeodesic<T>,
    eta: &DiscreteGeodesic<T>,
    t_list: &[T],
    tolerance: T,
) -> Result<(AngleValue<T>, Vec<T>)> {
    if gamma.start() != eta.start() {
        return Err(Error::DifferentStart(gamma.start().0, eta.start().0));
    }
    let mut samples = Vec::with_capacity(t_list.len());
    let mut clamps = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let (y, a) = at_length(gamma, t)?;
        let (z, b) = at_length(eta, t)?;
        if a == T::zero() || b == T::zero() {
            continue;
        }
        let c = comparison_cosine(a, b, space.dist(y, z));
        clamps.push(clamp_cosine(c).1);
        samples.push((t, c));
    }
    let est = LimitEstimate::from_samples(samples, tolerance)?;
    Ok((AngleValue::from_cosine(est), clamps))
}

/// One reading of the two-variable comparison angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProbeReading<T: Real> {
    pub s: T,
    pub t: T,
    pub radians: T,
    pub clamp: T,
}

/// Spread of two-variable readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProbeReport<T: Real> {
    pub readings: Vec<ProbeReading<T>>,
    pub mean: T,
    pub min: T,
    pub max: T,
    pub std_dev: T,
}

/// Readings `arccos((s² + t² − d(γ_s,η_t)²) / (2st))` for pairs in the cone
/// `1/C ≤ s/t ≤ C`. No convergence is asserted.
pub fn two_variable_cosine_probe<T: Real>(
    space: &DiscreteMMSpace<T>,
    gamma: &DiscreteGeodesic<T>,
    eta: &DiscreteGeodesic<T>,
    pairs: &[(T, T)],
    c: T,
) -> Result<ProbeReport<T>> {
    if gamma.start() != eta.start() {
        return Err(Error::DifferentStart(gamma.start().0, eta.start().0));
    }
    if !(c >= T::one()) {
        return Err(Error::InvalidProblem(format!("cone constant {c} below 1")));
    }
    let mut readings = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        if !(s > T::zero() && t > T::zero()) || s / t > c || t / s > c {
            return Err(Error::ConeViolation {
                s: s.as_f64(),
                t: t.as_f64(),
                c: c.as_f64(),
            });
        }
        let (y, a) = at_length(gamma, s)?;
        let (z, b) = at_length(eta, t)?;
        if a == T::zero() || b == T::zero() {
            continue;
        }
        let (cos, clamp) = clamp_cosine(comparison_cosine(a, b, space.dist(y, z)));
        readings.push(ProbeReading {
            s,
            t,
            radians: cos.acos(),
            clamp,
        });
    }
    if readings.is_empty() {
        return Err(Error::InvalidProblem("no resolvable probe pairs".into()));
    }
    let k = T::from_usize_lossy(readings.len());
    let mean = readings.iter().map(|r| r.radians).sum::<T>() / k;
    let var = readings
        .iter()
        .map(|r| (r.radians - mean) * (r.radians - mean))
        .sum::<T>()
        / k;
    Ok(ProbeReport {
        min: readings.iter().map(|r| r.radians).fold(T::infinity(), T::min),
        max: readings.iter().map(|r| r.radians).fold(T::neg_infinity(), T::max),
        mean,
        std_dev: var.sqrt(),
        readings,
    })
}

/// Degeneracy diagnostics for a triple `(p, x, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TripleDiagnostics<T: Real> {
    /// `d(p,x) + d(x,q) − d(p,q)`.
    pub betweenness_gap: T,
    pub paths_xp: u64,
    pub paths_xq: u64,
}

impl<T: Real> TripleDiagnostics<T> {
    pub fn compute(space: &DiscreteMMSpace<T>, p: PointId, x: PointId, q: PointId) -> Result<Self> {
        Ok(Self {
            betweenness_gap: space.dist(p, x) + space.dist(x, q) - space.dist(p, q),
            paths_xp: shortest_path_count(space, x, p)?,
            paths_xq: shortest_path_count(space, x, q)?,
        })
    }

    pub fn branching(&self) -> bool {
        self.paths_xp > 1 || self.paths_xq > 1
    }

    /// Near-collinear with `x` between `p` and `q`, within `gap`.
    pub fn near_geodesic(&self, gap: T) -> bool {
        self.betweenness_gap < gap
    }
}

/// Whether a cosine reading overshot `[−1,1]` by more than the clamp limit.
pub fn unreliable_clamp<T: Real>(clamp: T) -> bool {
    clamp > T::lit(CLAMP_LIMIT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::shortest_geodesic;

    fn line(n: usize) -> DiscreteMMSpace<f64> {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        DiscreteMMSpace::build_from_edges(n, &edges, vec![1.0; n], 2.0).unwrap()
    }

    fn star(arms: usize, len: usize) -> DiscreteMMSpace<f64> {
        let mut edges = Vec::new();
        let mut next = 1;
        for _ in 0..arms {
            let mut prev = 0;
            for _ in 0..len {
                edges.push((prev, next, 1.0));
                prev = next;
                next += 1;
            }
        }
        DiscreteMMSpace::build_from_edges(next, &edges, vec![1.0; next], 2.0).unwrap()
    }

    #[test]
    fn lip_constant_and_distance() {
        let s = line(7);
        let c = ScalarField::constant(7, 3.0);
        assert_eq!(lip(&s, &c, PointId(3), 2.5).unwrap(), 0.0);
        let r = s.distance_field(PointId(0));
        assert_eq!(lip(&s, &r, PointId(3), 2.5).unwrap(), 1.0);
        assert!(matches!(lip(&s, &r, PointId(3), 0.5), Err(Error::EmptyNeighborhood(3))));
    }

    #[test]
    fn degenerate_three_point_values() {
        let s = line(21);
        let a = angle_three_points(&s, PointId(2), PointId(10), PointId(2), &[1.0, 0.5], 3.0, 0.05).unwrap();
        assert_eq!(a.radians, 0.0);
        let a = angle_three_points(&s, PointId(2), PointId(10), PointId(18), &[1.0, 0.5], 3.0, 0.05).unwrap();
        assert_eq!(a.radians, std::f64::consts::PI);
    }

    #[test]
    fn polarization_readings() {
        let s = line(21);
        let f = s.distance_field(PointId(0));
        let eps = 0.1;
        let (v, _) = inner_product_at(&s, &f, &f, PointId(10), eps, 3.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let (v, _) = inner_product_at(&s, &f, &f.scaled(-1.0), PointId(10), eps, 3.0).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn representing_defects_on_line() {
        let s = line(21);
        let g = shortest_geodesic(&s, PointId(10), PointId(18)).unwrap();
        let ts = [0.5, 0.25];
        let fg = f_gamma(&s, &g);
        let d = represents_gradient_defect(&s, &fg, &g, &ts, 3.0).unwrap();
        assert!(d.abs() < 1e-12);
        let d = represents_gradient_defect(&s, &fg.scaled(-1.0), &g, &ts, 3.0).unwrap();
        assert!((d - 2.0 * 64.0).abs() < 1e-9);
        let c = ScalarField::constant(21, 1.0);
        let d = represents_gradient_defect(&s, &c, &g, &ts, 3.0).unwrap();
        assert!((d - 32.0).abs() < 1e-12);
    }

    #[test]
    fn tree_geodesic_angles() {
        let s = star(3, 8);
        let g = shortest_geodesic(&s, PointId(0), PointId(8)).unwrap();
        let e = shortest_geodesic(&s, PointId(0), PointId(16)).unwrap();
        let ts = [0.5, 0.25];
        let a = angle_two_geodesics(&s, &g, &e, None, &ts, 3.0, 0.1, 0.05).unwrap();
        assert_eq!(a.radians, std::f64::consts::PI);
        let a = angle_two_geodesics(&s, &g, &g, None, &ts, 3.0, 0.1, 0.05).unwrap();
        assert_eq!(a.radians, 0.0);
        let (c, clamps) = cosine_formula_angle(&s, &g, &e, &[4.0, 2.0, 1.0], 0.05).unwrap();
        assert_eq!(c.radians, std::f64::consts::PI);
        assert!(c.estimate.samples.iter().all(|&(_, v)| v == -1.0));
        assert!(clamps.iter().all(|&c| c == 0.0));
        let probe = two_variable_cosine_probe(&s, &g, &e, &[(2.0, 3.0), (4.0, 2.0)], 2.0).unwrap();
        assert!(probe.readings.iter().all(|r| r.radians == std::f64::consts::PI));
        assert!(matches!(
            two_variable_cosine_probe(&s, &g, &e, &[(1.0, 4.0)], 2.0),
            Err(Error::ConeViolation { .. })
        ));
    }
}
