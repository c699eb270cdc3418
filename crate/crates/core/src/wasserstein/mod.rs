//! Exact quadratic optimal transport between measures on a finite space.
//!
//! Costs are `c(x,y) = d(x,y)²/2`. `phi` and `psi` are the maximizers of the
//! dual `Σ φ dμ + Σ ψ dν` subject to `φ(x) + ψ(y) ≤ c(x,y)`; with this sign the
//! optimal plan from `μ` represents the gradient of `−phi`. Angle formulas only
//! see inner products of potential pairs of the same sign, so they are
//! unaffected by the choice.

mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use simplex::{transport_simplex, SimplexSolution};

use crate::angles::{f_eps_from_slopes, angle_two_geodesics, Neighborhood};
use crate::error::{Error, Result};
use crate::geodesic::{geodesics_from, shortest_geodesic, DiscreteGeodesic};
use crate::limit::{AngleValue, LimitEstimate};
use crate::scalar::Real;
use crate::space::{DiscreteMMSpace, PointId, ScalarField};

/// Probability measure given by one weight per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProbMeasure<T: Real> {
    pub weights: Vec<T>,
}

impl<T: Real> ProbMeasure<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidMeasure("negative or non-finite weight".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-12).max(T::lit(32.0) * T::epsilon()) {
            return Err(Error::InvalidMeasure(format!("total mass {total} is not 1")));
        }
        Ok(Self { weights })
    }

    /// Normalizes nonnegative weights to unit mass.
    pub fn normalized(weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn dirac(n: usize, p: PointId) -> Self {
        let mut weights = vec![T::zero(); n];
        weights[p.0] = T::one();
        Self { weights }
    }

    /// Reference measure restricted to `points` and normalized.
    pub fn restricted(space: &DiscreteMMSpace<T>, points: &[PointId]) -> Result<Self> {
        let mut w = vec![T::zero(); space.n()];
        for &p in points {
            w[p.0] = space.mass(p);
        }
        Self::normalized(w)
    }

    pub fn support(&self) -> Vec<PointId> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > T::zero())
            .map(|(i, _)| PointId(i))
            .collect()
    }
}

/// Coupling stored as `(source, target, mass)` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TransportPlan<T: Real> {
    pub entries: Vec<(PointId, PointId, T)>,
    /// `Σ mass · d(i,j)²`.
    pub cost: T,
}

impl<T: Real> TransportPlan<T> {
    pub fn w2(&self) -> T {
        self.cost.max(T::zero()).sqrt()
    }

    /// Row and column marginals over `n` points.
    pub fn marginals(&self, n: usize) -> (Vec<T>, Vec<T>) {
        let mut a = vec![T::zero(); n];
        let mut b = vec![T::zero(); n];
        for &(i, j, m) in &self.entries {
            a[i.0] = a[i.0] + m;
            b[j.0] = b[j.0] + m;
        }
        (a, b)
    }

    /// Targets receiving mass from `x`.
    pub fn targets_of(&self, x: PointId) -> Vec<(PointId, T)> {
        self.entries
            .iter()
            .filter(|e| e.0 == x)
            .map(|&(_, j, m)| (j, m))
            .collect()
    }
}

/// Dual potentials on the supports of the two marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PotentialPair<T: Real> {
    pub source: Vec<PointId>,
    pub phi: Vec<T>,
    pub target: Vec<PointId>,
    pub psi: Vec<T>,
}

impl<T: Real> PotentialPair<T> {
    /// `φ(z) = min_j [c(z, y_j) − ψ_j]` on the whole space.
    pub fn phi_extended(&self, space: &DiscreteMMSpace<T>) -> ScalarField<T> {
        c_transform(space, &self.target, &self.psi)
    }

    /// `ψ(z) = min_i [c(x_i, z) − φ_i]` on the whole space.
    pub fn psi_extended(&self, space: &DiscreteMMSpace<T>) -> ScalarField<T> {
        c_transform(space, &self.source, &self.phi)
    }

    /// Largest violation of `φ(x) + ψ(y) ≤ c(x,y)` over support pairs.
    pub fn max_infeasibility(&self, space: &DiscreteMMSpace<T>) -> T {
        let mut worst = T::neg_infinity();
        for (a, &x) in self.source.iter().enumerate() {
            for (b, &y) in self.target.iter().enumerate() {
                let v = self.phi[a] + self.psi[b] - cost(space, x, y);
                worst = worst.max(v);
            }
        }
        worst
    }
}

fn cost<T: Real>(space: &DiscreteMMSpace<T>, x: PointId, y: PointId) -> T {
    let d = space.dist(x, y);
    T::lit(0.5) * d * d
}

fn c_transform<T: Real>(space: &DiscreteMMSpace<T>, pts: &[PointId], pot: &[T]) -> ScalarField<T> {
    let mut out = vec![T::infinity(); space.n()];
    for (&y, &p) in pts.iter().zip(pot) {
        let row = space.distance_field(y);
        for (o, &d) in out.iter_mut().zip(&row.values) {
            let v = T::lit(0.5) * d * d - p;
            if v < *o {
                *o = v;
            }
        }
    }
    ScalarField::new(out)
}

/// Optimal plan, potentials and certificate of one solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OtSolution<T: Real> {
    pub plan: TransportPlan<T>,
    pub potentials: PotentialPair<T>,
    /// `Σ c dπ − (Σ φ dμ + Σ ψ dν)`.
    pub gap: T,
    pub dual_value: T,
    pub iterations: usize,
}

/// Largest duality gap accepted from the simplex.
pub fn gap_tolerance<T: Real>(scale: T) -> T {
    T::lit(1e-9).max(T::lit(1e4) * T::epsilon() * (T::one() + scale.abs()))
}

/// Exact optimal transport for cost `d²/2`.
pub fn solve_ot<T: Real>(space: &DiscreteMMSpace<T>, mu: &ProbMeasure<T>, nu: &ProbMeasure<T>) -> Result<OtSolution<T>> {
    let n = space.n();
    if mu.weights.len() != n || nu.weights.len() != n {
        return Err(Error::InvalidMeasure("measure length differs from point count".into()));
    }
    let src = mu.support();
    let dst = nu.support();
    if src.is_empty() || dst.is_empty() {
        return Err(Error::InvalidMeasure("empty support".into()));
    }
    let a: Vec<T> = src.iter().map(|&p| mu.weights[p.0]).collect();
    let mut b: Vec<T> = dst.iter().map(|&p| nu.weights[p.0]).collect();
    // absorb round-off so the problem is exactly balanced
    let drift = a.iter().copied().sum::<T>() - b.iter().copied().sum::<T>();
    let last = b.len() - 1;
    b[last] = b[last] + drift;
    let k = dst.len();
    let mut c = Vec::with_capacity(src.len() * k);
    for &x in &src {
        let row = space.distance_field(x);
        c.extend(dst.iter().map(|&y| T::lit(0.5) * row[y] * row[y]));
    }
    let sol = transport_simplex(&a, &b, &c)?;
    let primal: T = sol.flows.iter().map(|&(i, j, f)| f * c[i * k + j]).sum();
    let dual: T = a.iter().zip(&sol.u).map(|(&w, &u)| w * u).sum::<T>()
        + b.iter().zip(&sol.v).map(|(&w, &v)| w * v).sum::<T>();
    let gap = primal - dual;
    if gap.abs() > gap_tolerance(primal) {
        return Err(Error::SolverFailure(format!("duality gap {gap}")));
    }
    let entries: Vec<(PointId, PointId, T)> = sol
        .flows
        .iter()
        .map(|&(i, j, f)| (src[i], dst[j], f))
        .collect();
    Ok(OtSolution {
        plan: TransportPlan {
            entries,
            cost: T::lit(2.0) * primal,
        },
        potentials: PotentialPair {
            source: src,
            phi: sol.u,
            target: dst,
            psi: sol.v,
        },
        gap,
        dual_value: dual,
        iterations: sol.iterations,
    })
}

/// Plan entries routed along deterministic shortest geodesics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DynamicalPlan<T: Real> {
    pub atoms: Vec<(DiscreteGeodesic<T>, T)>,
}

impl<T: Real> DynamicalPlan<T> {
    /// `(e_t)♯ Π` over `n` points.
    pub fn marginal(&self, n: usize, t: T) -> Result<ProbMeasure<T>> {
        let mut w = vec![T::zero(); n];
        for (g, m) in &self.atoms {
            let y = g.eval(t)?;
            w[y.0] = w[y.0] + *m;
        }
        Ok(ProbMeasure { weights: w })
    }

    /// `Σ mass · |γ̇|²`.
    pub fn action(&self) -> T {
        self.atoms.iter().map(|(g, m)| *m * g.speed * g.speed).sum()
    }

    pub fn total_mass(&self) -> T {
        self.atoms.iter().map(|(_, m)| *m).sum()
    }
}

/// Lifts a plan to geodesics, one atom per plan entry.
pub fn lift_to_dynamical_plan<T: Real>(space: &DiscreteMMSpace<T>, plan: &TransportPlan<T>) -> Result<DynamicalPlan<T>> {
    let mut by_source: BTreeMap<PointId, Vec<(PointId, T)>> = BTreeMap::new();
    for &(i, j, m) in &plan.entries {
        by_source.entry(i).or_default().push((j, m));
    }
    let mut atoms = Vec::with_capacity(plan.entries.len());
    for (x, list) in by_source {
        let targets: Vec<PointId> = list.iter().map(|e| e.0).collect();
        let geos = geodesics_from(space, x, &targets)?;
        atoms.extend(geos.into_iter().zip(list.iter().map(|e| e.1)));
    }
    Ok(DynamicalPlan { atoms })
}

/// `μ_t = (e_t)♯ Π` for the lift of `plan`.
pub fn displacement_interpolation<T: Real>(space: &DiscreteMMSpace<T>, plan: &TransportPlan<T>, t: T) -> Result<ProbMeasure<T>> {
    lift_to_dynamical_plan(space, plan)?.marginal(space.n(), t)
}

/// Defects `|W₂(μ_s, μ_t) − |s − t| W₂(μ₀, μ₁)|` along a displacement interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct W2GeodesicReport<T: Real> {
    /// `(s, t, defect)` for `s < t`.
    pub pairs: Vec<(T, T, T)>,
    pub max_defect: T,
    pub w2: T,
}

pub fn w2_geodesic_check<T: Real>(space: &DiscreteMMSpace<T>, plan: &TransportPlan<T>, t_list: &[T]) -> Result<W2GeodesicReport<T>> {
    let lift = lift_to_dynamical_plan(space, plan)?;
    let w2 = plan.w2();
    let measures = t_list
        .iter()
        .map(|&t| lift.marginal(space.n(), t))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    let mut max_defect = T::zero();
    for a in 0..t_list.len() {
        for b in 0..t_list.len() {
            let (s, t) = (t_list[a], t_list[b]);
            if !(s < t) {
                continue;
            }
            let d = solve_ot(space, &measures[a], &measures[b])?.plan.w2();
            let defect = (d - (t - s) * w2).abs();
            max_defect = max_defect.max(defect);
            pairs.push((s, t, defect));
        }
    }
    Ok(W2GeodesicReport { pairs, max_defect, w2 })
}

/// Parameters of times below this bound are checked for bounded compression.
pub const COMPRESSION_HORIZON: f64 = 0.9;

/// Largest density `μ_t / m` over `t ∈ t_list ∪ {0}` with `t ≤ 0.9`.
pub fn max_compression<T: Real>(space: &DiscreteMMSpace<T>, lift: &DynamicalPlan<T>, t_list: &[T]) -> Result<T> {
    let mut worst = T::zero();
    let horizon = T::lit(COMPRESSION_HORIZON);
    for &t in std::iter::once(&T::zero()).chain(t_list) {
        if t > horizon {
            continue;
        }
        let mt = lift.marginal(space.n(), t)?;
        for (w, &m) in mt.weights.iter().zip(space.measure()) {
            worst = worst.max(*w / m);
        }
    }
    Ok(worst)
}

/// Signed defect of `Π` representing `∇g`:
/// `½ Σ m lip(g)²(γ₀) + ½ Σ m |γ̇|² − liminf_t Σ m (g(γ_t) − g(γ₀))/t`.
pub fn plan_represents_gradient_defect<T: Real>(
    space: &DiscreteMMSpace<T>,
    lift: &DynamicalPlan<T>,
    g: &ScalarField<T>,
    t_list: &[T],
    scale: T,
    compression_bound: T,
) -> Result<T> {
    let density = max_compression(space, lift, t_list)?;
    if density > compression_bound {
        return Err(Error::CompressionViolation {
            density: density.as_f64(),
            bound: compression_bound.as_f64(),
        });
    }
    let mut sorted: Vec<T> = t_list.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite times"));
    let mut lhs = vec![T::zero(); sorted.len()];
    let mut lip_term = T::zero();
    for (gamma, m) in &lift.atoms {
        let x = gamma.start();
        let l = Neighborhood::new(space, x, scale)?.lip(g);
        lip_term = lip_term + *m * l * l;
        if gamma.speed == T::zero() {
            continue;
        }
        let mut last: Option<T> = None;
        let mut per_t = Vec::with_capacity(sorted.len());
        for &t in &sorted {
            let (y, len) = gamma.eval_with_length(t)?;
            if len > T::zero() {
                last = Some((g[y] - g[x]) / (len / gamma.speed));
            }
            per_t.push(last);
        }
        // times below the first vertex reuse the finest resolvable quotient
        let first = per_t.iter().flatten().next().copied().unwrap_or_else(|| {
            let y = gamma.vertices[1];
            (g[y] - g[x]) / (gamma.cumlen[1] / gamma.speed)
        });
        for (acc, q) in lhs.iter_mut().zip(per_t) {
            *acc = *acc + *m * q.unwrap_or(first);
        }
    }
    let k = lhs.len();
    let liminf = match k {
        0 => return Err(Error::InvalidProblem("empty time grid".into())),
        1 => lhs[0],
        _ => lhs[k - 1].min(lhs[k - 2]),
    };
    let half = T::lit(0.5);
    Ok(half * lip_term + half * lift.action() - liminf)
}

/// Integrated angle `Σ η ⟨∇φ,∇ψ⟩ / (‖lip φ‖_{L²(η)} ‖lip ψ‖_{L²(η)})`.
///
/// `ψ` is rescaled to the size of `φ` before the ε-quotient is taken, so
/// `eps` is relative.
pub fn wasserstein_angle<T: Real>(
    space: &DiscreteMMSpace<T>,
    phi: &ScalarField<T>,
    psi: &ScalarField<T>,
    eta: &ProbMeasure<T>,
    eps: T,
    scale: T,
    tolerance: T,
) -> Result<AngleValue<T>> {
    let support = eta.support();
    let mut slopes = Vec::with_capacity(support.len());
    let (mut nf, mut ng) = (T::zero(), T::zero());
    for &x in &support {
        let nb = Neighborhood::new(space, x, scale)?;
        let a = nb.slopes(phi);
        let b = nb.slopes(psi);
        let la = a.iter().fold(T::zero(), |m, &s| m.max(s.abs()));
        let lb = b.iter().fold(T::zero(), |m, &s| m.max(s.abs()));
        let w = eta.weights[x.0];
        nf = nf + w * la * la;
        ng = ng + w * lb * lb;
        slopes.push((w, a, b));
    }
    let (nf, ng) = (nf.sqrt(), ng.sqrt());
    if nf == T::zero() || ng == T::zero() {
        return Err(Error::ZeroDenominator);
    }
    let rel = nf / ng;
    let (mut plus, mut minus) = (T::zero(), T::zero());
    for (w, a, b) in &slopes {
        let b: Vec<T> = b.iter().map(|&v| v * rel).collect();
        plus = plus + *w * f_eps_from_slopes(a, &b, eps);
        minus = minus + *w * f_eps_from_slopes(a, &b, -eps);
    }
    let norm = nf * nf;
    let (lo, hi) = (minus / norm, plus / norm);
    let est = LimitEstimate::bracket(vec![(eps, (lo + hi) * T::lit(0.5))], lo, hi, tolerance + eps);
    Ok(AngleValue::from_cosine(est))
}

/// One radius of a shrinking-ball sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ShrinkingBallReading<T: Real> {
    pub radius: T,
    pub angle: AngleValue<T>,
    pub support: usize,
    /// Largest duality gap of the two solves.
    pub gap: T,
}

/// Wasserstein angle between the geodesics from the normalized ball
/// `m⌞B_R(x)` to `δ_p` and to `δ_q`, for each radius.
#[allow(clippy::too_many_arguments)]
pub fn shrinking_ball_angle<T: Real>(
    space: &DiscreteMMSpace<T>,
    p: PointId,
    q: PointId,
    x: PointId,
    radii: &[T],
    eps: T,
    scale: T,
    tolerance: T,
) -> Result<Vec<ShrinkingBallReading<T>>> {
    let n = space.n();
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let ball = space.ball(x, r);
        if ball.contains(p) || ball.contains(q) {
            return Err(Error::InvalidProblem(format!("target inside B_{r}(x)")));
        }
        let eta = ProbMeasure::restricted(space, &ball.members)?;
        let sp = solve_ot(space, &eta, &ProbMeasure::dirac(n, p))?;
        let sq = solve_ot(space, &eta, &ProbMeasure::dirac(n, q))?;
        let phi = sp.potentials.phi_extended(space);
        let psi = sq.potentials.phi_extended(space);
        let angle = wasserstein_angle(space, &phi, &psi, &eta, eps, scale, tolerance)?;
        out.push(ShrinkingBallReading {
            radius: r,
            angle,
            support: ball.len(),
            gap: sp.gap.abs().max(sq.gap.abs()),
        });
    }
    Ok(out)
}

/// Per-start-point comparison of geodesic angles with potential inner products.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PlanwiseRow<T: Real> {
    pub x: PointId,
    pub geodesic_angle: T,
    pub field_angle: T,
    pub discrepancy: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PlanwiseReport<T: Real> {
    pub rows: Vec<PlanwiseRow<T>>,
    /// Start points dropped, with the reason.
    pub excluded: Vec<(PointId, String)>,
    pub median: T,
    pub max: T,
}

/// Knobs for [`planwise_angle_validation`].
#[derive(Debug, Clone, Copy)]
pub struct PlanwiseOptions<T> {
    pub eps: T,
    pub scale: T,
    /// Accepted representing defect, relative to `|γ̇|²`.
    pub relative_slack: T,
    pub tolerance: T,
}

fn unique_target<T: Real>(plan: &TransportPlan<T>, x: PointId) -> Result<PointId> {
    let t = plan.targets_of(x);
    match t.as_slice() {
        [(y, _)] => Ok(*y),
        _ => Err(Error::NonUniqueAtom(x.0)),
    }
}

/// For each sampled start point, the geodesic angle between the two plans'
/// atoms (read with `f = −φ₁`) against `arccos(⟨∇φ₁,∇φ₂⟩ / (lip φ₁ lip φ₂))`.
pub fn planwise_angle_validation<T: Real>(
    space: &DiscreteMMSpace<T>,
    sol1: &OtSolution<T>,
    sol2: &OtSolution<T>,
    sample: &[PointId],
    t_list: &[T],
    opts: PlanwiseOptions<T>,
) -> Result<PlanwiseReport<T>> {
    let phi1 = sol1.potentials.phi_extended(space);
    let phi2 = sol2.potentials.phi_extended(space);
    let f = phi1.scaled(-T::one());
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for &x in sample {
        let attempt = (|| -> Result<PlanwiseRow<T>> {
            let y1 = unique_target(&sol1.plan, x)?;
            let y2 = unique_target(&sol2.plan, x)?;
            if y1 == x || y2 == x {
                return Err(Error::ZeroSpeed);
            }
            let g1 = shortest_geodesic(space, x, y1)?;
            let g2 = shortest_geodesic(space, x, y2)?;
            let slack = opts.relative_slack * g1.speed * g1.speed;
            let geo = angle_two_geodesics(space, &g1, &g2, Some(&f), t_list, opts.scale, slack, opts.tolerance)?;
            let nb = Neighborhood::new(space, x, opts.scale)?;
            let a = nb.slopes(&phi1);
            let b = nb.slopes(&phi2);
            let la = nb.lip(&phi1);
            let lb = nb.lip(&phi2);
            if la == T::zero() || lb == T::zero() {
                return Err(Error::DegenerateLip(x.0));
            }
            // ε relative to the ratio of gradient sizes
            let rel = la / lb;
            let b: Vec<T> = b.iter().map(|&v| v * rel).collect();
            let ip = (f_eps_from_slopes(&a, &b, opts.eps) + f_eps_from_slopes(&a, &b, -opts.eps)) * T::lit(0.5);
            let field = crate::limit::clamp_cosine(ip / (la * la)).0.acos();
            Ok(PlanwiseRow {
                x,
                geodesic_angle: geo.radians,
                field_angle: field,
                discrepancy: (geo.radians - field).abs(),
            })
        })();
        match attempt {
            Ok(r) => rows.push(r),
            Err(e) => excluded.push((x, e.to_string())),
        }
    }
    let mut d: Vec<T> = rows.iter().map(|r| r.discrepancy).collect();
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let median = if d.is_empty() { T::nan() } else { d[d.len() / 2] };
    let max = d.last().copied().unwrap_or(T::nan());
    Ok(PlanwiseReport { rows, excluded, median, max })
}
