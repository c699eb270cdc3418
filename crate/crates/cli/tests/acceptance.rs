//! Acceptance run: one PASS/FAIL line per criterion.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use mmangle::angles::{angle_three_points, f_eps_from_slopes, Neighborhood};
use mmangle::harmonic::{bounded_poisson_g, laplacian_comparison_check, Reading};
use mmangle::spaces::{
    euclidean_cloud, euclidean_grid, nearest_point, sphere_cloud, MetricKind, OracleSpace, SphereSampling,
};
use mmangle::wasserstein::{
    lift_to_dynamical_plan, plan_represents_gradient_defect, planwise_angle_validation, solve_ot, PlanwiseOptions,
    ProbMeasure,
};
use mmangle::{PointId, ScalarField, Space};
use mmangle_cli::config::{GeneratorSpec, SpaceSource, TripleSampling};
use mmangle_cli::demo::{tree_demo, DemoConfig};
use mmangle_cli::experiment::{median, COLUMNS};
use mmangle_cli::output::csv_string;
use mmangle_cli::sweeps::{sweep_blowup, sweep_harmonic, BlowupSweepConfig, HarmonicSweepConfig};
use mmangle_cli::{run, ExperimentConfig, Method};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// thresholds
const C1_MEDIAN: f64 = 0.08;
const C1_MAX: f64 = 0.2;
const C1_SECONDS: f64 = 60.0;
const C2_MEDIAN: f64 = 0.1;
const C3_MEDIAN: f64 = 0.1;
const C3_CLAMP: f64 = 0.05;
const C3_SHARE: f64 = 0.9;
const C4_MEDIAN: f64 = 0.05;
const C5_COLLINEAR: f64 = 0.02;
const C6_PROBES: usize = 10_000;
const C6_SLACK: f64 = 1e-12;
const C7_ERROR: f64 = 0.15;
const C7_INVERSION: f64 = 0.02;
const C7_GAP: f64 = 1e-9;
const C8_ERROR: f64 = 0.1;
const C9_RELATIVE: f64 = 0.05;
const C9_CONSTANT: f64 = 1e-9;
const C10_INVERSION: f64 = 0.1;
const C10_RESIDUAL: f64 = 1e-8;
const C11_STABILITY: f64 = 0.2;
const C11_RESIDUAL: f64 = 1e-8;
const C12_FRACTION: f64 = 0.02;
const C13_FINAL: f64 = 0.1;
const C13_CONTROL: f64 = 0.3;
const C14_SPREAD: f64 = 0.5;

struct Report {
    lines: Vec<(u8, bool, String)>,
}

impl Report {
    fn record(&mut self, id: u8, pass: bool, detail: String) {
        println!("{} C{id:<2} {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id, pass, detail));
    }
}

fn cloud_config(methods: Vec<Method>, triples: TripleSampling) -> ExperimentConfig {
    ExperimentConfig {
        space_id: "euclidean_cloud_3000".into(),
        space: SpaceSource::Generator(GeneratorSpec::EuclideanCloud {
            n: 3000,
            dim: 2,
            seed: Some(7),
            h: None,
        }),
        methods,
        triples,
        numerics: Default::default(),
        seed: 1,
        output: Default::default(),
    }
}

fn angle_config() -> ExperimentConfig {
    cloud_config(
        vec![Method::ThreePoints, Method::TwoGeodesics, Method::Cosine],
        TripleSampling::default(),
    )
}

fn f(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn angle_criteria(r: &mut Report) {
    let start = Instant::now();
    let out = run(&angle_config()).expect("angle run");
    let secs = start.elapsed().as_secs_f64();
    let s = &out.summary;
    let tp = &s.methods["three_points"];
    let (med, max) = (f(tp.vs_oracle.median), f(tp.vs_oracle.max));
    r.record(
        1,
        s.triples == 20 && tp.errors == 0 && med <= C1_MEDIAN && max <= C1_MAX && secs <= C1_SECONDS,
        format!(
            "three-point vs oracle on {} triples: median {med:.4} (≤ {C1_MEDIAN}), max {max:.4} (≤ {C1_MAX}), {secs:.1} s (≤ {C1_SECONDS})",
            s.triples
        ),
    );
    let two = f(s.agreement["two_geodesics"].median);
    r.record(
        2,
        s.methods["two_geodesics"].errors == 0 && two <= C2_MEDIAN,
        format!("two-geodesic vs three-point median {two:.4} (≤ {C2_MEDIAN})"),
    );
    let cos = f(s.agreement["cosine"].median);
    let share = s.cosine_clamp_ok_fraction.unwrap_or(0.0);
    r.record(
        3,
        s.methods["cosine"].errors == 0 && cos <= C3_MEDIAN && share >= C3_SHARE,
        format!("cosine vs three-point median {cos:.4} (≤ {C3_MEDIAN}); clamp ≤ {C3_CLAMP} on {:.1}% of readings (≥ {:.0}%)", 100.0 * share, 100.0 * C3_SHARE),
    );
    let mut sphere = ExperimentConfig {
        space_id: "sphere_cloud_3000".into(),
        space: SpaceSource::Generator(GeneratorSpec::SphereCloud {
            n: 3000,
            seed: Some(7),
            h: None,
            sampling: SphereSampling::Uniform,
            metric: MetricKind::Graph,
        }),
        methods: vec![Method::ThreePoints],
        ..angle_config()
    };
    sphere.output.svg = None;
    let sph = run(&sphere).expect("sphere run");
    let (se, ss) = (f(s.symmetry.median), f(sph.summary.symmetry.median));
    r.record(
        4,
        se <= C4_MEDIAN && ss <= C4_MEDIAN,
        format!("median |∠pxq − ∠qxp|: euclidean {se:.4}, sphere {ss:.4} (≤ {C4_MEDIAN})"),
    );
}

fn degenerate_values(r: &mut Report) {
    let o = euclidean_cloud::<f64>(3000, 2, 7, None).expect("cloud");
    let s = &o.space;
    let eps = [1.0, 0.5, 0.25];
    let scale = 2.0 * s.h();
    let mut same = 0.0_f64;
    for (p, x) in [(10, 200), (77, 1500), (900, 2999), (1234, 4)] {
        let a = angle_three_points(s, PointId(p), PointId(x), PointId(p), &eps, scale, 0.05).expect("∠pxp");
        same = same.max(a.radians);
    }
    let g = euclidean_grid::<f64>(&[0.0, 0.0], &[1.0, 1.0], 0.01, 0.025, MetricKind::Exact).expect("grid");
    let gs = &g.space;
    let at = |v: [f64; 2]| nearest_point(gs, &v).expect("grid point");
    let mut collinear = 0.0_f64;
    for (p, x, q) in [
        ([0.2, 0.5], [0.5, 0.5], [0.8, 0.5]),
        ([0.2, 0.2], [0.5, 0.5], [0.9, 0.9]),
        ([0.5, 0.1], [0.5, 0.4], [0.5, 0.95]),
    ] {
        let a = angle_three_points(gs, at(p), at(x), at(q), &eps, 2.0 * gs.h(), 0.05).expect("collinear");
        collinear = collinear.max((a.radians - PI).abs());
    }
    let demo = tree_demo(&DemoConfig::default()).expect("tree demo");
    let identically = demo.cosine_arguments.iter().all(|&(_, c)| (c + 1.0).abs() <= 1e-12);
    r.record(
        5,
        same == 0.0 && collinear <= C5_COLLINEAR && identically && demo.cosine_angle == PI,
        format!(
            "max ∠pxp = {same:e} (= 0); collinear |∠ − π| ≤ {collinear:.4} (≤ {C5_COLLINEAR}); tree cosine argument ≡ −1 at {} lengths, angle = π: {}",
            demo.cosine_arguments.len(),
            identically && demo.cosine_angle == PI
        ),
    );
}

fn random_field(s: &Space, rng: &mut ChaCha8Rng) -> ScalarField<f64> {
    let a = s.distance_field(PointId(rng.random_range(0..s.n())));
    let b = s.distance_field(PointId(rng.random_range(0..s.n())));
    let (ca, cb): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let noise: Vec<f64> = (0..s.n()).map(|_| rng.random_range(-0.01..0.01)).collect();
    ScalarField::from_fn(s.n(), |i| ca * a.values[i] + cb * b.values[i] + noise[i])
}

fn bracketing(r: &mut Report) {
    let o = euclidean_cloud::<f64>(1000, 2, 11, None).expect("cloud");
    let s = &o.space;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let fields: Vec<ScalarField<f64>> = (0..40).map(|_| random_field(s, &mut rng)).collect();
    let mut violations = 0;
    let mut worst = 0.0_f64;
    for _ in 0..C6_PROBES {
        let fi = rng.random_range(0..fields.len());
        let gi = rng.random_range(0..fields.len());
        let x = PointId(rng.random_range(0..s.n()));
        let nb = Neighborhood::new(s, x, 2.0 * s.h()).expect("neighbourhood");
        let a = nb.slopes(&fields[fi]);
        let b = nb.slopes(&fields[gi]);
        let e1: f64 = rng.random_range(0.01..1.0);
        let e2: f64 = rng.random_range(0.01..1.0);
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let fe = |e: f64| f_eps_from_slopes(&a, &b, e);
        for d in [fe(lo) - fe(hi), fe(-hi) - fe(-lo), fe(-lo) - fe(lo)] {
            worst = worst.max(d);
            if d > C6_SLACK {
                violations += 1;
            }
        }
    }
    r.record(
        6,
        violations == 0,
        format!("{C6_PROBES} probes: {violations} violations beyond {C6_SLACK:e} (largest excess {worst:.2e})"),
    );
}

fn shrinking_balls(r: &mut Report) {
    let cfg = cloud_config(
        vec![Method::ThreePoints, Method::WassersteinShrinking],
        TripleSampling {
            count: 8,
            min_distance: 0.5,
            ..Default::default()
        },
    );
    let out = run(&cfg).expect("shrinking run");
    let base: Vec<f64> = out
        .rows
        .iter()
        .filter(|row| row.method == "three_points")
        .map(|row| f(row.value))
        .collect();
    let radii = &cfg.numerics.radii;
    let per_radius: Vec<Vec<f64>> = radii
        .iter()
        .map(|&rad| {
            out.shrinking
                .iter()
                .filter(|w| w.radius == rad)
                .map(|w| (w.angle - base[w.triple]).abs())
                .collect()
        })
        .collect();
    let medians: Vec<f64> = per_radius.iter().map(|v| median(v.clone()).unwrap_or(f64::NAN)).collect();
    let finest = per_radius.last().cloned().unwrap_or_default();
    let fmax = finest.iter().copied().fold(0.0, f64::max);
    let fmed = medians.last().copied().unwrap_or(f64::NAN);
    // radii decrease, so errors should not grow along the list
    let rises: Vec<f64> = medians.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 0.0).collect();
    let monotone = rises.len() <= 1 && rises.iter().all(|&d| d <= C7_INVERSION);
    let gap = out.summary.max_ot_gap.unwrap_or(f64::NAN);
    let errors = out.summary.methods["wasserstein_shrinking"].errors;
    r.record(
        7,
        errors == 0 && finest.len() == out.triples.len() && fmed <= C7_ERROR && fmax <= C7_ERROR && monotone && gap <= C7_GAP,
        format!(
            "{} triples; median error by R {:?}: {:?}; at R = {}: median {fmed:.4}, max {fmax:.4} (≤ {C7_ERROR}); inversions {:?} (≤ 1 of ≤ {C7_INVERSION}); max duality gap {gap:.1e} (≤ {C7_GAP:e})",
            out.triples.len(),
            radii,
            medians.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>(),
            radii.last().unwrap(),
            rises
        ),
    );
}

fn shifted(s: &Space, src: &[PointId], v: [f64; 2]) -> ProbMeasure<f64> {
    let c = s.coords().expect("cloud coordinates");
    let mut w = vec![0.0; s.n()];
    for &x in src {
        let y = nearest_point(s, &[c[x.0][0] + v[0], c[x.0][1] + v[1]]).expect("nearest");
        w[y.0] += 1.0;
    }
    ProbMeasure::normalized(w).expect("target measure")
}

fn plan_criteria(r: &mut Report) {
    let o: OracleSpace<f64> = euclidean_cloud(5000, 2, 7, None).expect("cloud");
    let s = &o.space;
    let scale = 0.3 * s.h();
    let centre = nearest_point(s, &[0.5, 0.5]).expect("centre");
    let src = s.ball(centre, 0.18).members.clone();
    let mu = ProbMeasure::restricted(s, &src).expect("source");
    let sample: Vec<PointId> = src.iter().copied().filter(|&x| s.dist(x, centre) < 0.08).collect();
    let opts = PlanwiseOptions {
        eps: 0.5,
        scale,
        relative_slack: 0.2,
        tolerance: 0.05,
    };
    let ts = [0.5, 0.35, 0.25];
    let mut parts = Vec::new();
    let mut ok = true;
    let mut first = None;
    for (name, v1, v2, target) in [
        ("orthogonal", [0.3, 0.0], [0.0, 0.3], FRAC_PI_2),
        ("antipodal", [0.3, 0.0], [-0.3, 0.0], PI),
    ] {
        let s1 = solve_ot(s, &mu, &shifted(s, &src, v1)).expect("plan 1");
        let s2 = solve_ot(s, &mu, &shifted(s, &src, v2)).expect("plan 2");
        let rep = planwise_angle_validation(s, &s1, &s2, &sample, &ts, opts).expect("planwise");
        let geo = median(rep.rows.iter().map(|row| row.geodesic_angle).collect()).unwrap_or(f64::NAN);
        let field = median(rep.rows.iter().map(|row| row.field_angle).collect()).unwrap_or(f64::NAN);
        ok &= (geo - target).abs() <= C8_ERROR && (field - target).abs() <= C8_ERROR;
        parts.push(format!(
            "{name}: geodesic median {geo:.4}, field median {field:.4} vs {target:.4} over {} points ({} excluded)",
            rep.rows.len(),
            rep.excluded.len()
        ));
        if first.is_none() {
            first = Some(s1);
        }
    }
    r.record(8, ok, format!("{} (within {C8_ERROR})", parts.join("; ")));

    let s1 = first.expect("orthogonal plan");
    let lift = lift_to_dynamical_plan(s, &s1.plan).expect("lift");
    let action = lift.action();
    let g = s1.potentials.phi_extended(s).scaled(-1.0);
    let bound = 1e4;
    let d = plan_represents_gradient_defect(s, &lift, &g, &[0.5, 0.25], scale, bound).expect("defect −φ");
    let constant = ScalarField::constant(s.n(), 0.7);
    let dc = plan_represents_gradient_defect(s, &lift, &constant, &[0.5, 0.25], scale, bound).expect("defect const");
    r.record(
        9,
        d.abs() <= C9_RELATIVE * action && (dc - 0.5 * action).abs() <= C9_CONSTANT,
        format!(
            "g = −φ: |defect| / action = {:.4} (≤ {C9_RELATIVE}); constant g: |defect − action/2| = {:.1e} (≤ {C9_CONSTANT:e})",
            d.abs() / action,
            (dc - 0.5 * action).abs()
        ),
    );
}

fn decreasing_with_inversion(v: &[f64], slack: f64) -> bool {
    let rises: Vec<(f64, f64)> = v.windows(2).filter(|w| w[1] >= w[0]).map(|w| (w[0], w[1])).collect();
    v.iter().all(|&x| x > 0.0) && rises.len() <= 1 && rises.iter().all(|&(a, b)| b <= a * (1.0 + slack))
}

fn harmonic_criteria(r: &mut Report) {
    let cfg = HarmonicSweepConfig::default();
    let rows = sweep_harmonic(&cfg).expect("harmonic sweep");
    let base: Vec<_> = rows.iter().filter(|row| row.delta == cfg.deltas[0]).collect();
    let sup: Vec<f64> = base.iter().map(|row| row.sup_deviation).collect();
    let energy: Vec<f64> = base.iter().map(|row| row.energy_deviation).collect();
    let residual = rows.iter().map(|row| row.residual).fold(0.0, f64::max);
    let mp = rows.iter().all(|row| row.maximum_principle);
    r.record(
        10,
        base[0].points >= 10_000
            && decreasing_with_inversion(&sup, C10_INVERSION)
            && decreasing_with_inversion(&energy, C10_INVERSION)
            && residual <= C10_RESIDUAL
            && mp,
        format!(
            "{} vertices, R = {:?}: sup {:?}, energy {:?}; max residual {residual:.1e} (≤ {C10_RESIDUAL:e}); maximum principle {mp}",
            base[0].points,
            cfg.pole_distances,
            sup.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            energy.iter().map(|v| (v * 1e5).round() / 1e5).collect::<Vec<_>>()
        ),
    );

    let mut bounds = Vec::new();
    let mut ok = true;
    for &delta in &cfg.deltas {
        let s = cfg.grid.build(delta).expect("grid");
        let x0 = nearest_point(&s, &cfg.center).expect("centre");
        let ball = s.ball(x0, 1.0);
        let g = bounded_poisson_g(&s, ball.clone(), cfg.dim).expect("poisson");
        let (lo, hi) = ball
            .members
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(g.g[y]), b.max(g.g[y])));
        ok &= lo >= 0.0 && hi <= g.bound && g.residual <= C11_RESIDUAL;
        bounds.push((delta, g.bound, g.residual));
    }
    let change = (bounds[1].1 - bounds[0].1).abs() / bounds[0].1;
    r.record(
        11,
        ok && change <= C11_STABILITY,
        format!(
            "C(δ) = {}; relative change {change:.3} (≤ {C11_STABILITY}); 0 ≤ G ≤ C and residual ≤ {C11_RESIDUAL:e}: {ok}",
            bounds
                .iter()
                .map(|(d, c, res)| format!("{c:.4} at δ = {d} (residual {res:.1e})"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

fn comparison(r: &mut Report) {
    let grid = euclidean_grid::<f64>(&[0.0, 0.0], &[1.0, 1.0], 0.01, 0.025, MetricKind::Exact).expect("grid");
    let sphere = sphere_cloud::<f64>(16_000, 3, Some(0.075), SphereSampling::Fibonacci, MetricKind::Exact).expect("sphere");
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, o, base, centre, radius) in [
        ("euclidean K=0 N=2", &grid, vec![0.2, 0.2], vec![0.65, 0.6], 0.15),
        ("sphere K=1 N=2", &sphere, vec![0.0, 0.0, 1.0], vec![0.84, 0.0, 0.54], 0.3),
    ] {
        let s = &o.space;
        let h = s.h();
        let x0 = nearest_point(s, &base).expect("base");
        let ball = s.ball(nearest_point(s, &centre).expect("centre"), radius);
        let rep = laplacian_comparison_check(s, x0, &ball, o.curvature.expect("curvature"), Reading::Bump { radius: 5.0 * h }, h)
            .expect("comparison");
        ok &= rep.fraction <= C12_FRACTION && !rep.rows.is_empty();
        parts.push(format!(
            "{name}: {}/{} violate ({:.2}%), max excess {:.4}, h = {h}",
            rep.violations,
            rep.rows.len(),
            100.0 * rep.fraction,
            rep.max_excess
        ));
    }
    r.record(12, ok, format!("{} (≤ {:.0}%)", parts.join("; "), 100.0 * C12_FRACTION));
}

fn blowup(r: &mut Report) {
    let sweep = sweep_blowup(&BlowupSweepConfig::default()).expect("blow-up sweep");
    let c = &sweep.collinear.rows;
    let dec = |v: Vec<f64>| v.windows(2).all(|w| w[1] < w[0]);
    let p: Vec<f64> = c.iter().map(|row| row.pair_defect_p).collect();
    let q: Vec<f64> = c.iter().map(|row| row.pair_defect_q).collect();
    let last = p.last().copied().unwrap_or(f64::NAN).max(q.last().copied().unwrap_or(f64::NAN));
    let control = sweep
        .control
        .rows
        .iter()
        .map(|row| row.pair_defect_p.min(row.pair_defect_q))
        .fold(f64::INFINITY, f64::min);
    r.record(
        13,
        c.len() == 3 && dec(p.clone()) && dec(q.clone()) && last <= C13_FINAL && control >= C13_CONTROL,
        format!(
            "collinear defects p {:?}, q {:?}; final {last:.4} (≤ {C13_FINAL}); control minimum {control:.4} (≥ {C13_CONTROL})",
            p.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            q.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
}

fn f_dependence(r: &mut Report) {
    let demo = tree_demo(&DemoConfig::default()).expect("tree demo");
    let both = demo.readings.iter().all(|f| f.represents);
    r.record(
        14,
        both && demo.readings.len() >= 2 && demo.spread >= C14_SPREAD,
        format!(
            "{}; spread {:.4} (≥ {C14_SPREAD})",
            demo.readings
                .iter()
                .map(|f| format!("{}: defect {:.1e} ≤ {}, angle {:.4}", f.name, f.representing_defect, demo.slack, f.angle))
                .collect::<Vec<_>>()
                .join("; "),
            demo.spread
        ),
    );
}

fn determinism(r: &mut Report) {
    let cfg = angle_config();
    let a = csv_string(&COLUMNS, &run(&cfg).expect("run a").rows).expect("csv a");
    let b = csv_string(&COLUMNS, &run(&cfg).expect("run b").rows).expect("csv b");
    r.record(
        15,
        a == b && !a.is_empty(),
        format!("two runs with seed {}: {} bytes each, identical: {}", cfg.seed, a.len(), a == b),
    );
}

fn main() {
    let mut r = Report { lines: Vec::new() };
    let start = Instant::now();
    angle_criteria(&mut r);
    degenerate_values(&mut r);
    bracketing(&mut r);
    shrinking_balls(&mut r);
    plan_criteria(&mut r);
    harmonic_criteria(&mut r);
    comparison(&mut r);
    blowup(&mut r);
    f_dependence(&mut r);
    determinism(&mut r);
    r.lines.sort_by_key(|l| l.0);
    let failed: Vec<u8> = r.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    println!(
        "acceptance: {}/{} criteria pass in {:.1} s",
        r.lines.len() - failed.len(),
        r.lines.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
