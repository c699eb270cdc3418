//! Graph Laplacian on balls: Dirichlet and Poisson solves, harmonic
//! replacement of distance functions and Laplacian comparison readings.
//!
//! The operator is
//! `Δu(x) = c_x Σ_y w_xy (u_y − u_x)` with `w_xy = m_x m_y 1{d(x,y) ≤ h} / h²`
//! and `c_x = 2N h² / (m_x Σ_y m_y d(x,y)²)`, so that `Δ(½d(x,·)²)(x) = N`
//! at every vertex. Boundary data is imposed on the layer of ball vertices
//! within `h` of the sphere; the interior system is symmetric positive definite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space::{Ball, DiscreteMMSpace, PointId, ScalarField};

/// Largest interior size handled by the dense fallback.
pub const DIRECT_LIMIT: usize = 5000;
/// Largest accepted `max |Δu − f|` on the interior.
pub const RESIDUAL_TARGET: f64 = 1e-8;

const UNSET: usize = usize::MAX;

fn kernel_radius<T: Real>(h: T) -> T {
    h * T::lit(1.0 + 1e-9)
}

/// Kernel weights restricted to a vertex set.
#[derive(Debug, Clone)]
pub struct GraphLaplacian<T: Real> {
    vertices: Vec<PointId>,
    local: Vec<usize>,
    /// Per local vertex: `(local neighbour, w_xy, d(x,y))`.
    adj: Vec<Vec<(usize, T, T)>>,
    calibration: Vec<T>,
    mass: Vec<T>,
    second_moment: Vec<T>,
    dim: T,
    h: T,
}

impl<T: Real> GraphLaplacian<T> {
    /// Laplacian on `vertices` for a space of dimension `dim`.
    pub fn new(space: &DiscreteMMSpace<T>, vertices: &[PointId], dim: T) -> Result<Self> {
        if !(dim > T::zero()) {
            return Err(Error::InvalidProblem(format!("dimension {dim} must be positive")));
        }
        let mut vertices = vertices.to_vec();
        vertices.sort();
        vertices.dedup();
        let mut local = vec![UNSET; space.n()];
        for (k, &v) in vertices.iter().enumerate() {
            space.check_point(v)?;
            local[v.0] = k;
        }
        let h = space.h();
        let h2 = h * h;
        let r = kernel_radius(h);
        let mut adj = Vec::with_capacity(vertices.len());
        let mut calibration = Vec::with_capacity(vertices.len());
        let mut second_moment = Vec::with_capacity(vertices.len());
        let mass: Vec<T> = vertices.iter().map(|&v| space.mass(v)).collect();
        for (k, &x) in vertices.iter().enumerate() {
            let mx = mass[k];
            let mut row = Vec::new();
            let mut m2 = T::zero();
            for (j, d) in space.neighborhood(x, r) {
                let l = local[j];
                if j == x.0 || l == UNSET {
                    continue;
                }
                let my = space.measure()[j];
                row.push((l, mx * my / h2, d));
                m2 = m2 + my * d * d;
            }
            let c = if m2 > T::zero() {
                T::lit(2.0) * dim * h2 / (mx * m2)
            } else {
                T::zero()
            };
            adj.push(row);
            calibration.push(c);
            second_moment.push(m2);
        }
        Ok(Self {
            vertices,
            local,
            adj,
            calibration,
            mass,
            second_moment,
            dim,
            h,
        })
    }

    pub fn vertices(&self) -> &[PointId] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Local index of a vertex, if it belongs to the set.
    pub fn local_index(&self, p: PointId) -> Option<usize> {
        self.local.get(p.0).copied().filter(|&l| l != UNSET)
    }

    /// `w_xy` for two vertices of the set (zero outside the kernel).
    pub fn weight(&self, x: PointId, y: PointId) -> T {
        match (self.local_index(x), self.local_index(y)) {
            (Some(a), Some(b)) => self.adj[a]
                .iter()
                .find(|e| e.0 == b)
                .map_or(T::zero(), |e| e.1),
            _ => T::zero(),
        }
    }

    /// `Δu` at a vertex of the set; `u` is a global field.
    pub fn apply_at(&self, u: &ScalarField<T>, x: PointId) -> Option<T> {
        let k = self.local_index(x)?;
        let ux = u[x];
        let s: T = self.adj[k]
            .iter()
            .map(|&(l, w, _)| w * (u[self.vertices[l]] - ux))
            .sum();
        Some(self.calibration[k] * s)
    }

    /// `Δu` on every vertex of the set, in vertex order.
    pub fn apply(&self, u: &ScalarField<T>) -> Vec<T> {
        self.vertices
            .iter()
            .map(|&x| self.apply_at(u, x).expect("own vertex"))
            .collect()
    }

    /// Dirichlet energy `(N h² / M̄₂) Σ_x Σ_y w_xy (u_x − u_y)²`, normalized to
    /// approximate `∫ |∇u|² dm` over the set.
    pub fn energy(&self, u: &ScalarField<T>) -> T {
        let total: T = self.mass.iter().copied().sum();
        let mean_m2 = self
            .mass
            .iter()
            .zip(&self.second_moment)
            .map(|(&m, &s)| m * s)
            .sum::<T>()
            / total;
        if !(mean_m2 > T::zero()) {
            return T::zero();
        }
        let raw: T = self
            .adj
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let ux = u[self.vertices[k]];
                row.iter()
                    .map(|&(l, w, _)| {
                        let d = ux - u[self.vertices[l]];
                        w * d * d
                    })
                    .sum::<T>()
            })
            .sum();
        self.dim * self.h * self.h * raw / mean_m2
    }

    /// Weak reading `∫ φ dΔu / ∫ φ dm` for a nonnegative test function `φ`,
    /// using the symmetric form `−Σ_{x,y} c̄ w_xy (φ_y − φ_x)(u_y − u_x) / 2`.
    pub fn weak_reading(&self, u: &ScalarField<T>, phi: &ScalarField<T>) -> Option<T> {
        let mut num = T::zero();
        let mut den = T::zero();
        for (k, row) in self.adj.iter().enumerate() {
            let x = self.vertices[k];
            if phi[x] != T::zero() {
                den = den + phi[x] * self.mass[k];
            }
            let c = self.calibration[k] * self.mass[k];
            for &(l, w, _) in row {
                let y = self.vertices[l];
                let dp = phi[y] - phi[x];
                if dp != T::zero() {
                    num = num - T::lit(0.5) * c * w * dp * (u[y] - u[x]);
                }
            }
        }
        (den > T::zero()).then(|| num / den)
    }
}

/// Ball, boundary layer, data and right-hand side of a Dirichlet problem.
#[derive(Debug, Clone)]
pub struct DirichletProblem<T: Real> {
    pub ball: Ball<T>,
    /// Per ball member (same order as `ball.members`): on the boundary layer.
    pub boundary: Vec<bool>,
    pub data: ScalarField<T>,
    pub rhs: Option<ScalarField<T>>,
    pub dim: T,
}

impl<T: Real> DirichletProblem<T> {
    /// Boundary layer: members with `d(center, y) ≥ R − h`.
    pub fn new(
        space: &DiscreteMMSpace<T>,
        ball: Ball<T>,
        data: ScalarField<T>,
        rhs: Option<ScalarField<T>>,
        dim: T,
    ) -> Result<Self> {
        if data.len() != space.n() || rhs.as_ref().is_some_and(|f| f.len() != space.n()) {
            return Err(Error::InvalidProblem("field length differs from point count".into()));
        }
        let cut = ball.radius - space.h();
        let boundary: Vec<bool> = ball.distances.iter().map(|&d| d >= cut).collect();
        if !boundary.iter().any(|&b| b) {
            return Err(Error::InvalidProblem("empty boundary layer".into()));
        }
        if boundary.iter().all(|&b| b) {
            return Err(Error::InvalidProblem("no interior vertices".into()));
        }
        Ok(Self {
            ball,
            boundary,
            data,
            rhs,
            dim,
        })
    }

    pub fn interior(&self) -> impl Iterator<Item = PointId> + '_ {
        self.ball
            .members
            .iter()
            .zip(&self.boundary)
            .filter(|(_, &b)| !b)
            .map(|(&p, _)| p)
    }

    pub fn boundary_points(&self) -> impl Iterator<Item = PointId> + '_ {
        self.ball
            .members
            .iter()
            .zip(&self.boundary)
            .filter(|(_, &b)| b)
            .map(|(&p, _)| p)
    }
}

/// Linear solver that produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    ConjugateGradient,
    DenseCholesky,
}

#[derive(Debug, Clone)]
pub struct DirichletSolution<T: Real> {
    /// Solution on the ball, data elsewhere.
    pub u: ScalarField<T>,
    /// `max |Δu − f|` over the interior.
    pub residual: T,
    pub iterations: usize,
    pub method: SolveMethod,
    pub laplacian: GraphLaplacian<T>,
}

struct System<T> {
    /// Interior vertex → local index in the Laplacian.
    rows: Vec<usize>,
    /// Laplacian local index → interior position.
    pos: Vec<usize>,
    diag: Vec<T>,
    b: Vec<T>,
}

impl<T: Real> System<T> {
    fn build(lap: &GraphLaplacian<T>, problem: &DirichletProblem<T>) -> Result<Self> {
        let mut pos = vec![UNSET; lap.len()];
        let mut rows = Vec::new();
        for p in problem.interior() {
            let l = lap.local_index(p).expect("ball member");
            pos[l] = rows.len();
            rows.push(l);
        }
        let mut diag = Vec::with_capacity(rows.len());
        let mut b = Vec::with_capacity(rows.len());
        for &l in &rows {
            let x = lap.vertices[l];
            let c = lap.calibration[l];
            if c == T::zero() {
                return Err(Error::SingularSystem(format!("interior vertex {x} has no kernel neighbour")));
            }
            let mut dsum = T::zero();
            let mut bx = T::zero();
            for &(k, w, _) in &lap.adj[l] {
                dsum = dsum + w;
                if pos[k] == UNSET {
                    bx = bx + w * problem.data[lap.vertices[k]];
                }
            }
            if let Some(f) = &problem.rhs {
                bx = bx - f[x] / c;
            }
            diag.push(dsum);
            b.push(bx);
        }
        Ok(Self { rows, pos, diag, b })
    }

    fn matvec(&self, lap: &GraphLaplacian<T>, v: &[T], out: &mut [T]) {
        for (i, &l) in self.rows.iter().enumerate() {
            let mut s = self.diag[i] * v[i];
            for &(k, w, _) in &lap.adj[l] {
                let j = self.pos[k];
                if j != UNSET {
                    s = s - w * v[j];
                }
            }
            out[i] = s;
        }
    }

    /// `max_x |c_x (b − A v)_x|`, the residual in Laplacian units.
    fn residual(&self, lap: &GraphLaplacian<T>, v: &[T]) -> T {
        let mut av = vec![T::zero(); v.len()];
        self.matvec(lap, v, &mut av);
        self.rows
            .iter()
            .zip(self.b.iter().zip(&av))
            .map(|(&l, (&b, &a))| (lap.calibration[l] * (b - a)).abs())
            .fold(T::zero(), T::max)
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradient, stopping on the Laplacian-unit residual.
fn pcg<T: Real>(sys: &System<T>, lap: &GraphLaplacian<T>, x: &mut [T], target: T, max_iter: usize) -> (T, usize) {
    let n = x.len();
    let mut ax = vec![T::zero(); n];
    sys.matvec(lap, x, &mut ax);
    let mut r: Vec<T> = sys.b.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
    let mut z: Vec<T> = r.iter().zip(&sys.diag).map(|(&r, &d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let scaled = |r: &[T]| {
        sys.rows
            .iter()
            .zip(r)
            .map(|(&l, &v)| (lap.calibration[l] * v).abs())
            .fold(T::zero(), T::max)
    };
    for it in 0..max_iter {
        if scaled(&r) <= target {
            return (sys.residual(lap, x), it);
        }
        sys.matvec(lap, &p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / sys.diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (sys.residual(lap, x), max_iter)
}

fn dense_solve<T: Real>(sys: &System<T>, lap: &GraphLaplacian<T>) -> Result<Vec<T>> {
    let n = sys.rows.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (i, &l) in sys.rows.iter().enumerate() {
        a[(i, i)] = sys.diag[i].as_f64();
        for &(k, w, _) in &lap.adj[l] {
            let j = sys.pos[k];
            if j != UNSET {
                a[(i, j)] -= w.as_f64();
            }
        }
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("interior matrix is not positive definite".into()))?;
    let b = nalgebra::DVector::from_iterator(n, sys.b.iter().map(|v| v.as_f64()));
    Ok(chol.solve(&b).iter().map(|&v| T::lit(v)).collect())
}

/// Solves `Δu = f` on the interior with `u = data` on the boundary layer.
pub fn dirichlet_solve<T: Real>(space: &DiscreteMMSpace<T>, problem: &DirichletProblem<T>) -> Result<DirichletSolution<T>> {
    let lap = GraphLaplacian::new(space, &problem.ball.members, problem.dim)?;
    let sys = System::build(&lap, problem)?;
    let target = T::lit(RESIDUAL_TARGET);
    let mut x: Vec<T> = sys.rows.iter().map(|&l| problem.data[lap.vertices[l]]).collect();
    let max_iter = 20 * x.len() + 100;
    let (mut residual, mut iterations) = pcg(&sys, &lap, &mut x, target * T::lit(1e-2), max_iter);
    let mut method = SolveMethod::ConjugateGradient;
    if !(residual <= target) {
        if x.len() > DIRECT_LIMIT {
            return Err(Error::NoConvergence {
                residual: residual.as_f64(),
                iterations,
            });
        }
        log::warn!("conjugate gradient stalled at residual {residual}; using dense Cholesky");
        x = dense_solve(&sys, &lap)?;
        residual = sys.residual(&lap, &x);
        iterations = 1;
        method = SolveMethod::DenseCholesky;
        if !(residual <= target) {
            return Err(Error::NoConvergence {
                residual: residual.as_f64(),
                iterations,
            });
        }
    }
    let mut u = problem.data.clone();
    for (i, &l) in sys.rows.iter().enumerate() {
        u.values[lap.vertices[l].0] = x[i];
    }
    Ok(DirichletSolution {
        u,
        residual,
        iterations,
        method,
        laplacian: lap,
    })
}

/// True iff the extrema of `u` over the ball are attained on the boundary layer (within 1e−10).
pub fn maximum_principle_check<T: Real>(problem: &DirichletProblem<T>, u: &ScalarField<T>) -> bool {
    let slack = T::lit(1e-10);
    let (mut bmax, mut bmin) = (T::neg_infinity(), T::infinity());
    for p in problem.boundary_points() {
        bmax = bmax.max(u[p]);
        bmin = bmin.min(u[p]);
    }
    problem.interior().all(|p| u[p] <= bmax + slack && u[p] >= bmin - slack)
}

/// Bounded solution of `ΔG = 1` on a ball.
#[derive(Debug, Clone)]
pub struct PoissonG<T: Real> {
    /// `G` on the ball members, zero elsewhere.
    pub g: ScalarField<T>,
    /// `max G`.
    pub bound: T,
    pub residual: T,
}

/// `ΔG = 1` on the interior, `G` constant on the boundary layer, shifted so `min G = 0`.
pub fn bounded_poisson_g<T: Real>(space: &DiscreteMMSpace<T>, ball: Ball<T>, dim: T) -> Result<PoissonG<T>> {
    let n = space.n();
    let problem = DirichletProblem::new(
        space,
        ball,
        ScalarField::constant(n, T::zero()),
        Some(ScalarField::constant(n, T::one())),
        dim,
    )?;
    let sol = dirichlet_solve(space, &problem)?;
    let min = problem
        .ball
        .members
        .iter()
        .map(|&p| sol.u[p])
        .fold(T::infinity(), T::min);
    let mut g = ScalarField::constant(n, T::zero());
    let mut bound = T::zero();
    for &p in &problem.ball.members {
        let v = sol.u[p] - min;
        g.values[p.0] = v;
        bound = bound.max(v);
    }
    Ok(PoissonG {
        g,
        bound,
        residual: sol.residual,
    })
}

/// Deviation of the harmonic replacement from `b_p` on `B₁(x₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HarmonicReport<T: Real> {
    /// `d(x₀, p)`.
    pub pole_distance: T,
    pub sup_deviation: T,
    /// `(1/m(B₁)) ∫ |∇(𝐛_p − b_p)|² dm`.
    pub energy_deviation: T,
    pub residual: T,
    pub interior: usize,
    pub boundary: usize,
    pub maximum_principle: bool,
}

#[derive(Debug, Clone)]
pub struct HarmonicApproximation<T: Real> {
    /// `b_p = d(p,·) − d(p,x₀)`.
    pub busemann: ScalarField<T>,
    /// Harmonic function on `B₁(x₀)` with boundary values `b_p`.
    pub harmonic: ScalarField<T>,
    pub report: HarmonicReport<T>,
}

/// Harmonic replacement of `b_p` on the unit ball around `x₀`; needs `d(x₀,p) ≥ 2`.
pub fn harmonic_approximation<T: Real>(
    space: &DiscreteMMSpace<T>,
    x0: PointId,
    p: PointId,
    dim: T,
) -> Result<HarmonicApproximation<T>> {
    space.check_point(x0)?;
    space.check_point(p)?;
    let r = space.dist(x0, p);
    if r < T::lit(2.0 - 1e-9) {
        return Err(Error::PoleTooClose {
            pole: p.0,
            minimum: 2.0,
        });
    }
    let busemann = space.distance_field(p).map(|d| d - r);
    let ball = space.ball(x0, T::one());
    let problem = DirichletProblem::new(space, ball, busemann.clone(), None, dim)?;
    let sol = dirichlet_solve(space, &problem)?;
    let diff = sol.u.combine(T::one(), &busemann, -T::one());
    let sup = problem
        .ball
        .members
        .iter()
        .map(|&y| diff[y].abs())
        .fold(T::zero(), T::max);
    let mass: T = problem.ball.members.iter().map(|&y| space.mass(y)).sum();
    let energy = sol.laplacian.energy(&diff) / mass;
    let report = HarmonicReport {
        pole_distance: r,
        sup_deviation: sup,
        energy_deviation: energy,
        residual: sol.residual,
        interior: problem.interior().count(),
        boundary: problem.boundary_points().count(),
        maximum_principle: maximum_principle_check(&problem, &sol.u),
    };
    Ok(HarmonicApproximation {
        busemann,
        harmonic: sol.u,
        report,
    })
}

/// `σ̃_{K,N}(θ)`.
pub fn sigma_tilde(k: f64, n: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    if k > 0.0 {
        let a = theta * (k / n).sqrt();
        a / a.tan()
    } else if k == 0.0 {
        1.0
    } else {
        let a = theta * (-k / n).sqrt();
        a / a.tanh()
    }
}

/// Upper bound `(N σ̃_{K,N}(d) − 1) / d` for `Δd(x₀,·)`.
pub fn distance_laplacian_bound(k: f64, n: f64, d: f64) -> f64 {
    (n * sigma_tilde(k, n, d) - 1.0) / d
}

/// How a vertex reading of `Δd(x₀,·)` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Reading {
    /// The operator at the vertex.
    Pointwise,
    /// Weak form against the bump `(1 − d(v,·)²/ρ²)₊²`.
    Bump { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub vertex: PointId,
    pub distance: f64,
    pub reading: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub violations: usize,
    pub fraction: f64,
    pub max_excess: f64,
    pub tolerance: f64,
}

/// Compares readings of `Δd(x₀,·)` on the vertices of `test` against the
/// `σ̃_{K,N}` bound; a vertex violates when `reading > bound + tolerance`.
#[allow(clippy::too_many_arguments)]
pub fn laplacian_comparison_check<T: Real>(
    space: &DiscreteMMSpace<T>,
    x0: PointId,
    test: &Ball<T>,
    curvature: (f64, f64),
    reading: Reading,
    tolerance: f64,
) -> Result<ComparisonReport> {
    if test.contains(x0) {
        return Err(Error::InvalidProblem("test ball contains the base point".into()));
    }
    let (k, n) = curvature;
    let field = space.distance_field(x0);
    let h = space.h();
    let reach = match reading {
        Reading::Pointwise => kernel_radius(h),
        Reading::Bump { radius } => T::lit(radius) + kernel_radius(h),
    };
    let mut rows = Vec::with_capacity(test.len());
    for &v in &test.members {
        let support: Vec<PointId> = space
            .neighborhood(v, reach * T::lit(1.0 + 1e-9))
            .into_iter()
            .map(|(j, _)| PointId(j))
            .collect();
        // the kernel of every vertex used must avoid the singularity at x₀
        if support.contains(&x0) {
            continue;
        }
        let lap = GraphLaplacian::new(space, &support, T::lit(n))?;
        let (value, bound) = match reading {
            Reading::Pointwise => {
                let d = field[v].as_f64();
                (lap.apply_at(&field, v).expect("own vertex").as_f64(), distance_laplacian_bound(k, n, d))
            }
            Reading::Bump { radius } => {
                let rho = T::lit(radius);
                let dv = space.distance_field(v);
                let phi = ScalarField::from_fn(space.n(), |j| {
                    let t = (T::one() - (dv.values[j] / rho).powi(2)).max(T::zero());
                    t * t
                });
                let (mut num, mut den) = (0.0, 0.0);
                for &y in &support {
                    let w = (phi[y] * space.mass(y)).as_f64();
                    num += w * distance_laplacian_bound(k, n, field[y].as_f64());
                    den += w;
                }
                let value = lap.weak_reading(&field, &phi).ok_or(Error::ZeroDenominator)?;
                (value.as_f64(), num / den)
            }
        };
        rows.push(ComparisonRow {
            vertex: v,
            distance: field[v].as_f64(),
            reading: value,
            bound,
        });
    }
    let excess: Vec<f64> = rows.iter().map(|r| r.reading - r.bound).collect();
    let violations = excess.iter().filter(|&&e| e > tolerance).count();
    let max_excess = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fraction = if rows.is_empty() {
        0.0
    } else {
        violations as f64 / rows.len() as f64
    };
    Ok(ComparisonReport {
        rows,
        violations,
        fraction,
        max_excess,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize, step: f64) -> DiscreteMMSpace<f64> {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, step)).collect();
        DiscreteMMSpace::build_from_edges(n, &edges, vec![step; n], 2.0 * step).unwrap()
    }

    #[test]
    fn quadratic_calibration() {
        let s = path(21, 0.1);
        let lap = GraphLaplacian::new(&s, &(0..21).map(PointId).collect::<Vec<_>>(), 1.0).unwrap();
        let q = ScalarField::from_fn(21, |i| 0.5 * (i as f64 * 0.1).powi(2));
        for i in 2..19 {
            assert!((lap.apply_at(&q, PointId(i)).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_and_linear_boundary_data() {
        let s = path(41, 0.05);
        let ball = s.ball(PointId(20), 1.0 + 1e-9);
        let data = ScalarField::constant(41, 3.0);
        let p = DirichletProblem::new(&s, ball.clone(), data, None, 1.0).unwrap();
        let sol = dirichlet_solve(&s, &p).unwrap();
        assert!(sol.u.values.iter().all(|&v| (v - 3.0).abs() < 1e-10));
        let lin = ScalarField::from_fn(41, |i| i as f64 * 0.05);
        let p = DirichletProblem::new(&s, ball, lin.clone(), None, 1.0).unwrap();
        let sol = dirichlet_solve(&s, &p).unwrap();
        assert!(sol.residual <= 1e-8);
        for i in 0..41 {
            assert!((sol.u[PointId(i)] - lin[PointId(i)]).abs() < 1e-9);
        }
        assert!(maximum_principle_check(&p, &sol.u));
        let mut bumped = sol.u.clone();
        bumped.values[20] += 1.5;
        assert!(!maximum_principle_check(&p, &bumped));
    }

    #[test]
    fn poisson_parabola() {
        let n = 201;
        let s = path(n, 0.005);
        let g = bounded_poisson_g(&s, s.ball(PointId(100), 0.5 + 1e-9), 1.0).unwrap();
        // u'' = 1 with zero data on a layer of width h around ±0.5
        assert!(g.residual <= 1e-8);
        let c = g.bound;
        assert!((c - 0.125).abs() < 0.01, "{c}");
        assert!(g.g.values.iter().all(|&v| v >= 0.0 && v <= c + 1e-12));
        let two = path(2, 1.0);
        assert!(bounded_poisson_g(&two, two.ball(PointId(0), 1.5), 1.0).is_err());
    }

    #[test]
    fn line_pole_is_harmonic() {
        let n = 301;
        let s = path(n, 0.02);
        let a = harmonic_approximation(&s, PointId(250), PointId(0), 1.0).unwrap();
        assert!(a.report.sup_deviation < 1e-9);
        assert!(a.report.energy_deviation < 1e-12);
        assert!(matches!(
            harmonic_approximation(&s, PointId(250), PointId(200), 1.0),
            Err(Error::PoleTooClose { .. })
        ));
    }

    #[test]
    fn sigma_values() {
        assert_eq!(sigma_tilde(0.0, 2.0, 0.7), 1.0);
        assert!((distance_laplacian_bound(0.0, 2.0, 0.5) - 2.0).abs() < 1e-15);
        assert!((sigma_tilde(2.0, 2.0, 0.5) - 0.5 / 0.5_f64.tan()).abs() < 1e-15);
        assert!(sigma_tilde(-1.0, 2.0, 1.0) > 1.0);
    }
}
