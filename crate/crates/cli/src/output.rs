//! CSV, JSON and SVG artifacts.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;
use crate::experiment::RunOutcome;

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV text with a header even when `rows` is empty.
pub fn csv_string<R: Serialize>(header: &[&str], rows: &[R]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::Io(e.into()))?;
    f.write_all(b"\n")?;
    Ok(())
}

const PALETTE: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

/// Scatter of method values against oracle angles, both on `[0, π]`.
pub fn scatter_svg(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (480.0, 480.0, 50.0);
    let pi = std::f64::consts::PI;
    let sx = |v: f64| pad + v / pi * (w - 2.0 * pad);
    let sy = |v: f64| h - pad - v / pi * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
        sx(0.0),
        sy(0.0),
        sx(pi),
        sy(pi)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    for (k, label) in [(0.0, "0"), (0.5, "π/2"), (1.0, "π")] {
        let v = k * pi;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#, sx(v), h - pad + 18.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{label}</text>"#, pad - 6.0, sy(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">oracle angle</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">method angle</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        for &(o, v) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}" fill-opacity="0.7"/>"#, sx(o), sy(v));
        }
        let y = pad + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="4" fill="{c}"/>"#, pad + 12.0, y - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{name}</text>"#, pad + 22.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the results CSV, shrinking-ball CSV, summary and plot.
pub fn write_run(out: &RunOutcome, dir: &Path, cfg: &crate::config::OutputPaths) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(&cfg.csv), csv_string(&crate::experiment::COLUMNS, &out.rows)?)?;
    if !out.shrinking.is_empty() {
        write_csv(&dir.join(&cfg.shrinking_csv), &out.shrinking)?;
    }
    write_json(&dir.join(&cfg.summary), &out.summary)?;
    if let (Some(svg), Some(_)) = (&cfg.svg, &out.space.oracle) {
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for r in &out.rows {
            let Some(v) = r.value else { continue };
            if r.method == "harmonic" {
                continue;
            }
            let Some(o) = out.space.oracle_angle(mmangle::PointId(r.p), mmangle::PointId(r.x), mmangle::PointId(r.q))
            else {
                continue;
            };
            match series.iter_mut().find(|(n, _)| *n == r.method) {
                Some((_, pts)) => pts.push((o, v)),
                None => series.push((r.method.clone(), vec![(o, v)])),
            }
        }
        std::fs::write(dir.join(svg), scatter_svg(&series))?;
    }
    Ok(())
}
