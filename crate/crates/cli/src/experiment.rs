//! Batch angle computation over sampled triples.

use std::collections::BTreeMap;

use log::{info, warn};
use mmangle::angles::{
    angle_three_points, angle_two_geodesics, cosine_formula_angle, two_variable_cosine_probe, TripleDiagnostics,
};
use mmangle::blowup::{angle_stability_across_scales, build_blowup, StabilityOptions};
use mmangle::geodesic::shortest_geodesic;
use mmangle::harmonic::harmonic_approximation;
use mmangle::limit::{clamp_cosine, AngleValue, CLAMP_LIMIT};
use mmangle::spaces::OracleDescriptor;
use mmangle::wasserstein::shrinking_ball_angle;
use mmangle::{Error, Geodesic, PointId, Space};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};
use crate::error::CliError;
use crate::source::{self, LoadedSpace};

/// Duality gap accepted on every transport solve.
pub const GAP_LIMIT: f64 = 1e-9;

/// Residual accepted for harmonic replacements.
pub const RESIDUAL_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub p: PointId,
    pub x: PointId,
    pub q: PointId,
}

/// One CSV row: a triple evaluated by one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub space_id: String,
    pub p: usize,
    pub x: usize,
    pub q: usize,
    pub method: String,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub clamp: Option<f64>,
    pub flags: String,
}

pub const COLUMNS: [&str; 10] = [
    "space_id", "p", "x", "q", "method", "value", "lower", "upper", "clamp", "flags",
];

/// Shrinking-ball reading at one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkingRow {
    pub triple: usize,
    pub p: usize,
    pub x: usize,
    pub q: usize,
    pub radius: f64,
    pub angle: f64,
    pub support: usize,
    pub gap: f64,
}

/// Per-triple side results that do not fit the CSV row.
#[derive(Debug, Clone, Default)]
pub struct Extras {
    pub cosine_clamps: Vec<f64>,
    /// `|∠pxq − ∠qxp|` from the three-point notion.
    pub symmetry: Option<f64>,
    pub shrinking: Vec<ShrinkingRow>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct MethodStats {
    pub rows: usize,
    pub errors: usize,
    pub nonconverged: usize,
    pub clamped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub count: usize,
    pub median: Option<f64>,
    pub max: Option<f64>,
}

impl Agreement {
    pub fn from_diffs(mut v: Vec<f64>) -> Self {
        v.retain(|d| d.is_finite());
        v.sort_by(f64::total_cmp);
        Self {
            count: v.len(),
            median: median_sorted(&v),
            max: v.last().copied(),
        }
    }
}

pub fn median_sorted(v: &[f64]) -> Option<f64> {
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
    }
}

pub fn median(mut v: Vec<f64>) -> Option<f64> {
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub rows: usize,
    pub errors: usize,
    pub nonconverged: usize,
    pub clamped: usize,
    /// `|value − oracle|` over rows with both.
    pub vs_oracle: Agreement,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub space_id: String,
    pub description: String,
    pub points: usize,
    pub h: f64,
    pub triples: usize,
    pub requested_triples: usize,
    pub methods: BTreeMap<String, MethodSummary>,
    /// `|three_points − other|` per method.
    pub agreement: BTreeMap<String, Agreement>,
    pub symmetry: Agreement,
    /// Share of cosine-formula readings with clamp at most the clamp limit.
    pub cosine_clamp_ok_fraction: Option<f64>,
    pub max_ot_gap: Option<f64>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub space: LoadedSpace,
    pub triples: Vec<Triple>,
    pub rows: Vec<ResultRow>,
    pub shrinking: Vec<ShrinkingRow>,
    pub summary: Summary,
}

fn bbox(space: &Space) -> Option<(Vec<f64>, Vec<f64>)> {
    let c = space.coords()?;
    let dim = c.first()?.len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in c {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Some((lo, hi))
}

/// Farthest `ẑ` with `d(ẑ,x) ≥ margin` and `d(ẑ,x) + d(x,z) − d(ẑ,z) ≤ h`.
pub fn extension_point(space: &Space, x: PointId, z: PointId, margin: f64) -> Option<PointId> {
    let rx = space.distance_field(x);
    let rz = space.distance_field(z);
    let dxz = rx[z];
    (0..space.n())
        .filter(|&y| rx[PointId(y)] >= margin && rx[PointId(y)] + dxz - rz[PointId(y)] <= space.h())
        .max_by(|&a, &b| rx[PointId(a)].total_cmp(&rx[PointId(b)]).then(b.cmp(&a)))
        .map(PointId)
}

/// Draws triples with a seeded stream, applying the configured filters.
pub fn sample_triples(loaded: &LoadedSpace, cfg: &ExperimentConfig) -> Result<Vec<Triple>, CliError> {
    let space = &loaded.space;
    let n = space.n();
    if let Some(explicit) = &cfg.triples.explicit {
        return explicit
            .iter()
            .map(|&[p, x, q]| {
                for v in [p, x, q] {
                    space.check_point(PointId(v))?;
                }
                Ok(Triple {
                    p: PointId(p),
                    x: PointId(x),
                    q: PointId(q),
                })
            })
            .collect();
    }
    let t = &cfg.triples;
    let f = &t.filters;
    let scale = cfg.numerics.angle.scale(space);
    let has_graph = space.graph().is_some();
    let margin_box = (f.enabled && f.interior_margin && loaded.oracle == Some(OracleDescriptor::Euclidean))
        .then(|| bbox(space))
        .flatten();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(t.count);
    let mut tries = 0;
    while out.len() < t.count && tries < t.max_tries {
        tries += 1;
        let (p, x, q) = (
            PointId(rng.random_range(0..n)),
            PointId(rng.random_range(0..n)),
            PointId(rng.random_range(0..n)),
        );
        let m = t.min_distance;
        if p == x || x == q || space.dist(p, x) < m || space.dist(x, q) < m || space.dist(p, q) < m {
            continue;
        }
        if !f.enabled {
            out.push(Triple { p, x, q });
            continue;
        }
        if let Some((lo, hi)) = &margin_box {
            let c = &space.coords().expect("box implies coordinates")[x.0];
            if c.iter().enumerate().any(|(k, &v)| v < lo[k] + scale || v > hi[k] - scale) {
                continue;
            }
        }
        let gap = space.dist(p, x) + space.dist(x, q) - space.dist(p, q);
        if gap < f.near_geodesic_factor * space.h() {
            continue;
        }
        if has_graph && f.branching && TripleDiagnostics::compute(space, p, x, q)?.branching() {
            continue;
        }
        if f.extendable
            && (extension_point(space, x, p, scale).is_none() || extension_point(space, x, q, scale).is_none())
        {
            continue;
        }
        out.push(Triple { p, x, q });
    }
    if out.len() < t.count {
        warn!("kept {} of {} requested triples after {tries} draws", out.len(), t.count);
    }
    Ok(out)
}

fn error_flag(e: &Error) -> String {
    let dbg = format!("{e:?}");
    let name: String = dbg.chars().take_while(|c| c.is_alphanumeric()).collect();
    format!("error:{name}")
}

fn angle_bounds(a: &AngleValue<f64>) -> (f64, f64) {
    let lo = clamp_cosine(a.estimate.upper).0.acos();
    let hi = clamp_cosine(a.estimate.lower).0.acos();
    (lo, hi)
}

struct RowBuilder<'a> {
    id: &'a str,
    t: Triple,
}

impl RowBuilder<'_> {
    fn row(&self, m: Method) -> ResultRow {
        ResultRow {
            space_id: self.id.to_string(),
            p: self.t.p.0,
            x: self.t.x.0,
            q: self.t.q.0,
            method: m.name().to_string(),
            value: None,
            lower: None,
            upper: None,
            clamp: None,
            flags: String::new(),
        }
    }

    fn angle(&self, m: Method, a: &AngleValue<f64>, extra: &[&str]) -> ResultRow {
        let (lo, hi) = angle_bounds(a);
        let mut flags: Vec<&str> = Vec::new();
        if a.clamp > 0.0 {
            flags.push("clamped");
        }
        if a.clamp > CLAMP_LIMIT {
            flags.push("unreliable");
        }
        if !a.estimate.converged {
            flags.push("nonconverged");
        }
        flags.extend_from_slice(extra);
        ResultRow {
            value: Some(a.radians),
            lower: Some(lo),
            upper: Some(hi),
            clamp: Some(a.clamp),
            flags: flags.join(";"),
            ..self.row(m)
        }
    }

    fn error(&self, m: Method, e: &Error, extra: &[&str]) -> ResultRow {
        let mut flags = vec![error_flag(e)];
        flags.extend(extra.iter().map(|s| s.to_string()));
        ResultRow {
            flags: flags.join(";"),
            ..self.row(m)
        }
    }
}

fn check_angle(row: &ResultRow, out: &mut Vec<String>) {
    if let Some(v) = row.value {
        if !(0.0..=std::f64::consts::PI).contains(&v) {
            out.push(format!("{} at ({},{},{}) outside [0, π]: {v}", row.method, row.p, row.x, row.q));
        }
    }
}

fn evaluate(loaded: &LoadedSpace, cfg: &ExperimentConfig, index: usize, t: Triple) -> (Vec<ResultRow>, Extras) {
    let s = &loaded.space;
    let nm = &cfg.numerics;
    let opts = &nm.angle;
    let scale = opts.scale(s);
    let b = RowBuilder { id: &loaded.id, t };
    let mut extras = Extras::default();
    let degenerate = TripleDiagnostics::compute(s, t.p, t.x, t.q)
        .map(|d| d.branching() || d.near_geodesic(s.h()))
        .unwrap_or(false);
    let tags: &[&str] = if degenerate { &["degenerate"] } else { &[] };
    let geodesics: Result<(Geodesic, Geodesic), Error> =
        shortest_geodesic(s, t.x, t.p).and_then(|g| Ok((g, shortest_geodesic(s, t.x, t.q)?)));
    let grid = |g: &Geodesic, e: &Geodesic| opts.t_grid(s, g.speed.min(e.speed));
    let mut rows = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let row = match m {
            Method::ThreePoints => match angle_three_points(s, t.p, t.x, t.q, &opts.eps, scale, opts.tolerance) {
                Ok(a) => {
                    if let Ok(r) = angle_three_points(s, t.q, t.x, t.p, &opts.eps, scale, opts.tolerance) {
                        extras.symmetry = Some((a.radians - r.radians).abs());
                    }
                    b.angle(m, &a, tags)
                }
                Err(e) => b.error(m, &e, tags),
            },
            Method::TwoGeodesics => {
                let r = geodesics.clone().and_then(|(g, e)| {
                    angle_two_geodesics(s, &g, &e, None, &grid(&g, &e), scale, nm.slack, opts.tolerance)
                });
                match r {
                    Ok(a) => b.angle(m, &a, tags),
                    Err(e) => b.error(m, &e, tags),
                }
            }
            Method::Cosine => {
                let r = geodesics.clone().and_then(|(g, e)| {
                    let len = g.speed.min(e.speed);
                    let lens: Vec<f64> = grid(&g, &e).iter().map(|t| t * len).collect();
                    cosine_formula_angle(s, &g, &e, &lens, opts.tolerance)
                });
                match r {
                    Ok((a, clamps)) => {
                        extras.cosine_clamps = clamps;
                        b.angle(m, &a, tags)
                    }
                    Err(e) => b.error(m, &e, tags),
                }
            }
            Method::WassersteinShrinking => {
                let wscale = nm.wasserstein_scale_factor * s.h();
                match shrinking_ball_angle(s, t.p, t.q, t.x, &nm.radii, nm.wasserstein_eps, wscale, opts.tolerance) {
                    Ok(readings) => {
                        for r in &readings {
                            if r.gap > GAP_LIMIT {
                                extras
                                    .violations
                                    .push(format!("OT duality gap {} at radius {} for triple {index}", r.gap, r.radius));
                            }
                            extras.shrinking.push(ShrinkingRow {
                                triple: index,
                                p: t.p.0,
                                x: t.x.0,
                                q: t.q.0,
                                radius: r.radius,
                                angle: r.angle.radians,
                                support: r.support,
                                gap: r.gap,
                            });
                        }
                        let last = readings.last().expect("radii are nonempty");
                        b.angle(m, &last.angle, tags)
                    }
                    Err(e) => b.error(m, &e, tags),
                }
            }
            Method::Harmonic => {
                let r = s
                    .rescale(t.x, s.dist(t.x, t.p) / nm.harmonic_pole_ratio)
                    .and_then(|rs| harmonic_approximation(&rs, t.x, t.p, nm.harmonic_dim));
                match r {
                    Ok(h) => {
                        let rep = &h.report;
                        if rep.residual > RESIDUAL_LIMIT {
                            extras
                                .violations
                                .push(format!("harmonic residual {} for triple {index}", rep.residual));
                        }
                        if !rep.maximum_principle {
                            extras.violations.push(format!("maximum principle fails for triple {index}"));
                        }
                        let mut flags = vec!["diagnostic"];
                        flags.extend_from_slice(tags);
                        ResultRow {
                            value: Some(rep.sup_deviation),
                            lower: Some(rep.energy_deviation),
                            upper: None,
                            flags: flags.join(";"),
                            ..b.row(m)
                        }
                    }
                    Err(e) => b.error(m, &e, tags),
                }
            }
            Method::Blowup => {
                let margin = nm.blowup_radii[0];
                let hats = extension_point(s, t.x, t.p, margin).zip(extension_point(s, t.x, t.q, margin));
                let r = hats
                    .ok_or(Error::NotExtendable(t.p.0))
                    .and_then(|(ph, qh)| build_blowup(s, t.x, (t.p, t.q), (ph, qh), &nm.blowup_radii))
                    .and_then(|seq| {
                        let dropped = !seq.dropped.is_empty();
                        let opts = StabilityOptions {
                            rho: nm.blowup_rho,
                            ..Default::default()
                        };
                        angle_stability_across_scales(&seq, opts).map(|rep| (rep, dropped))
                    });
                match r {
                    Ok((rep, dropped)) => {
                        let ang = |c: f64| clamp_cosine(c).0.acos();
                        let angles: Vec<f64> = rep.rows.iter().map(|r| ang(r.avg_inner_product)).collect();
                        let last = rep.rows.last().expect("stages are nonempty").avg_inner_product;
                        let mut flags: Vec<&str> = Vec::new();
                        if clamp_cosine(last).1 > 0.0 {
                            flags.push("clamped");
                        }
                        if dropped {
                            flags.push("stages_dropped");
                        }
                        flags.extend_from_slice(tags);
                        ResultRow {
                            value: Some(ang(last)),
                            lower: angles.iter().copied().reduce(f64::min),
                            upper: angles.iter().copied().reduce(f64::max),
                            clamp: Some(clamp_cosine(last).1),
                            flags: flags.join(";"),
                            ..b.row(m)
                        }
                    }
                    Err(e) => b.error(m, &e, tags),
                }
            }
            Method::TwoVariableProbe => {
                let r = geodesics.clone().and_then(|(g, e)| {
                    let len = g.speed.min(e.speed);
                    let lens: Vec<f64> = grid(&g, &e).iter().map(|t| t * len).collect();
                    let pairs: Vec<(f64, f64)> = lens
                        .iter()
                        .flat_map(|&a| lens.iter().map(move |&c| (a, c)))
                        .filter(|&(a, c)| a.max(c) / a.min(c) <= nm.probe_cone)
                        .collect();
                    two_variable_cosine_probe(s, &g, &e, &pairs, nm.probe_cone)
                });
                match r {
                    Ok(rep) => {
                        let clamp = rep.readings.iter().map(|r| r.clamp).fold(0.0, f64::max);
                        let mut flags: Vec<&str> = Vec::new();
                        if clamp > 0.0 {
                            flags.push("clamped");
                        }
                        flags.extend_from_slice(tags);
                        ResultRow {
                            value: Some(rep.mean),
                            lower: Some(rep.min),
                            upper: Some(rep.max),
                            clamp: Some(clamp),
                            flags: flags.join(";"),
                            ..b.row(m)
                        }
                    }
                    Err(e) => b.error(m, &e, tags),
                }
            }
        };
        if m.is_angle() {
            check_angle(&row, &mut extras.violations);
        }
        rows.push(row);
    }
    (rows, extras)
}

fn has_flag(row: &ResultRow, flag: &str) -> bool {
    row.flags.split(';').any(|f| f == flag)
}

pub fn summarize(loaded: &LoadedSpace, cfg: &ExperimentConfig, triples: &[Triple], rows: &[ResultRow], extras: &[Extras]) -> Summary {
    let mut methods = BTreeMap::new();
    for &m in &cfg.methods {
        let mine: Vec<&ResultRow> = rows.iter().filter(|r| r.method == m.name()).collect();
        let diffs = if m.is_angle() {
            mine.iter()
                .filter_map(|r| {
                    let o = loaded.oracle_angle(PointId(r.p), PointId(r.x), PointId(r.q))?;
                    Some((r.value? - o).abs())
                })
                .collect()
        } else {
            Vec::new()
        };
        methods.insert(
            m.name().to_string(),
            MethodSummary {
                rows: mine.len(),
                errors: mine.iter().filter(|r| r.flags.contains("error:")).count(),
                nonconverged: mine.iter().filter(|r| has_flag(r, "nonconverged")).count(),
                clamped: mine.iter().filter(|r| has_flag(r, "clamped")).count(),
                vs_oracle: Agreement::from_diffs(diffs),
            },
        );
    }
    let k = cfg.methods.len();
    let mut agreement = BTreeMap::new();
    if let Some(base) = cfg.methods.iter().position(|&m| m == Method::ThreePoints) {
        for (j, &m) in cfg.methods.iter().enumerate() {
            if j == base || !m.is_angle() {
                continue;
            }
            let diffs = rows
                .chunks(k)
                .filter_map(|c| Some((c[base].value? - c[j].value?).abs()))
                .collect();
            agreement.insert(m.name().to_string(), Agreement::from_diffs(diffs));
        }
    }
    let clamps: Vec<f64> = extras.iter().flat_map(|e| e.cosine_clamps.iter().copied()).collect();
    let gaps: Vec<f64> = extras.iter().flat_map(|e| e.shrinking.iter().map(|r| r.gap)).collect();
    Summary {
        space_id: loaded.id.clone(),
        description: loaded.description.clone(),
        points: loaded.space.n(),
        h: loaded.space.h(),
        triples: triples.len(),
        requested_triples: cfg.triples.explicit.as_ref().map_or(cfg.triples.count, Vec::len),
        methods,
        agreement,
        symmetry: Agreement::from_diffs(extras.iter().filter_map(|e| e.symmetry).collect()),
        cosine_clamp_ok_fraction: (!clamps.is_empty())
            .then(|| clamps.iter().filter(|&&c| c <= CLAMP_LIMIT).count() as f64 / clamps.len() as f64),
        max_ot_gap: gaps.iter().copied().reduce(f64::max),
        violations: extras.iter().flat_map(|e| e.violations.iter().cloned()).collect(),
    }
}

/// Loads the space, samples triples and evaluates every method.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let mut loaded = source::load(&cfg.space, &cfg.space_id, cfg.seed)?;
    if cfg.numerics.h_multiplier != 1.0 {
        loaded.space = loaded.space.with_h(loaded.space.h() * cfg.numerics.h_multiplier)?;
    }
    info!("space {} with {} points, h = {}", loaded.id, loaded.space.n(), loaded.space.h());
    let triples = sample_triples(&loaded, cfg)?;
    let results: Vec<(Vec<ResultRow>, Extras)> = triples
        .par_iter()
        .enumerate()
        .map(|(i, &t)| evaluate(&loaded, cfg, i, t))
        .collect();
    let (rows, extras): (Vec<Vec<ResultRow>>, Vec<Extras>) = results.into_iter().unzip();
    let rows: Vec<ResultRow> = rows.into_iter().flatten().collect();
    let summary = summarize(&loaded, cfg, &triples, &rows, &extras);
    let shrinking = extras.into_iter().flat_map(|e| e.shrinking).collect();
    Ok(RunOutcome {
        space: loaded,
        triples,
        rows,
        shrinking,
        summary,
    })
}
