//! Error table of a results CSV against an oracle.

use std::collections::BTreeMap;
use std::path::Path;

use mmangle::spaces::OracleDescriptor;
use mmangle::{PointId, Space};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::experiment::{median, ResultRow, COLUMNS};
use crate::source::read_oracle_file;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: String,
    pub rows: usize,
    pub compared: usize,
    pub median_abs_error: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub clamped: usize,
    pub max_clamp: Option<f64>,
    pub nonconverged: usize,
    pub errors: usize,
}

/// Parses a results CSV; the header must match the result columns exactly.
pub fn read_results(text: &str) -> Result<Vec<ResultRow>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(CliError::SchemaMismatch(format!(
            "expected columns {:?}, found {:?}",
            COLUMNS, header
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::SchemaMismatch(e.to_string())))
        .collect()
}

/// Per-method median and max absolute error against the oracle, in method order of appearance.
pub fn compare_rows(rows: &[ResultRow], space: &Space, oracle: &OracleDescriptor) -> Result<Vec<CompareRow>, CliError> {
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, (CompareRow, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        for v in [r.p, r.x, r.q] {
            space
                .check_point(PointId(v))
                .map_err(|e| CliError::SchemaMismatch(e.to_string()))?;
        }
        if !acc.contains_key(&r.method) {
            order.push(r.method.clone());
        }
        let (c, errs) = acc.entry(r.method.clone()).or_insert_with(|| {
            (
                CompareRow {
                    method: r.method.clone(),
                    ..Default::default()
                },
                Vec::new(),
            )
        });
        c.rows += 1;
        let flags: Vec<&str> = r.flags.split(';').collect();
        if flags.contains(&"clamped") {
            c.clamped += 1;
        }
        if flags.contains(&"nonconverged") {
            c.nonconverged += 1;
        }
        if flags.iter().any(|f| f.starts_with("error:")) {
            c.errors += 1;
        }
        if let Some(cl) = r.clamp {
            c.max_clamp = Some(c.max_clamp.map_or(cl, |m: f64| m.max(cl)));
        }
        if flags.contains(&"diagnostic") {
            continue;
        }
        if let (Some(v), Some(o)) = (r.value, oracle.angle(space, PointId(r.p), PointId(r.x), PointId(r.q))) {
            errs.push((v - o).abs());
        }
    }
    Ok(order
        .into_iter()
        .map(|m| {
            let (mut c, errs) = acc.remove(&m).expect("method recorded");
            c.compared = errs.len();
            c.max_abs_error = errs.iter().copied().reduce(f64::max);
            c.median_abs_error = median(errs);
            c
        })
        .collect())
}

pub fn compare_files(results: &Path, oracle: &Path) -> Result<Vec<CompareRow>, CliError> {
    let text = std::fs::read_to_string(results)?;
    let rows = read_results(&text)?;
    let (file, space) = read_oracle_file(oracle)?;
    compare_rows(&rows, &space, &file.oracle)
}
