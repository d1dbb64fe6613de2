//! Column-wise comparison of two numeric CSV artifacts.

use std::collections::BTreeMap;

use serde::Serialize;

use super::artifacts::SCHEMA_VERSION;
use crate::error::{Error, Result};

/// Default tolerance plus per-column overrides, written `0.05` or
/// `0.05,x=0.01,z=0.02`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceSpec {
    pub default: f64,
    pub columns: BTreeMap<String, f64>,
}

impl ToleranceSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut default = None;
        let mut columns = BTreeMap::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = match part.split_once('=') {
                Some((n, v)) => (Some(n.trim()), v.trim()),
                None => (None, part),
            };
            let tol: f64 = value.parse().map_err(|_| Error::InvalidArgument(format!("bad tolerance `{part}`")))?;
            if !(tol >= 0.0) {
                return Err(Error::InvalidArgument(format!("tolerance must be ≥ 0 in `{part}`")));
            }
            match name {
                Some(n) => {
                    columns.insert(n.to_string(), tol);
                }
                None if default.is_none() => default = Some(tol),
                None => return Err(Error::InvalidArgument("more than one default tolerance".into())),
            }
        }
        Ok(ToleranceSpec { default: default.unwrap_or(0.0), columns })
    }

    fn for_column(&self, name: &str) -> f64 {
        self.columns.get(name).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnReport {
    pub column: String,
    pub max_abs_deviation: f64,
    pub mean_abs_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub rows: usize,
    pub columns: Vec<ColumnReport>,
    pub pass: bool,
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn parse_csv(text: &str, label: &str) -> Result<Csv> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{label}: empty file")))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Schema(format!("{label}: row {} has {} cells, header has {}", i + 1, cells.len(), header.len())));
        }
        let row = cells
            .iter()
            .map(|c| {
                let c = c.trim();
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse::<f64>().map_err(|_| Error::Schema(format!("{label}: row {} has non-numeric cell `{c}`", i + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Csv { header, rows })
}

/// Compares two CSV texts with identical column sets and row counts. Empty
/// cells compare equal only to empty cells.
pub fn compare_csv(a: &str, b: &str, tol: &ToleranceSpec) -> Result<CompareReport> {
    let (ca, cb) = (parse_csv(a, "first")?, parse_csv(b, "second")?);
    let mut sa = ca.header.clone();
    let mut sb = cb.header.clone();
    sa.sort();
    sb.sort();
    if sa != sb {
        return Err(Error::Schema(format!("column sets differ: [{}] vs [{}]", ca.header.join(","), cb.header.join(","))));
    }
    if sa.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Schema("duplicate column names".into()));
    }
    if ca.rows.len() != cb.rows.len() {
        return Err(Error::Schema(format!("row counts differ: {} vs {}", ca.rows.len(), cb.rows.len())));
    }
    for name in tol.columns.keys() {
        if !ca.header.contains(name) {
            return Err(Error::Schema(format!("tolerance given for unknown column `{name}`")));
        }
    }
    let mut columns = Vec::with_capacity(ca.header.len());
    for (ia, name) in ca.header.iter().enumerate() {
        let ib = cb.header.iter().position(|h| h == name).expect("same column set");
        let mut max = 0.0f64;
        let mut sum = 0.0;
        for (ra, rb) in ca.rows.iter().zip(&cb.rows) {
            let (x, y) = (ra[ia], rb[ib]);
            let d = if x.is_nan() && y.is_nan() { 0.0 } else { (x - y).abs() };
            // NaN on one side only counts as an infinite deviation
            let d = if d.is_nan() { f64::INFINITY } else { d };
            max = max.max(d);
            sum += d;
        }
        let n = ca.rows.len().max(1) as f64;
        let tolerance = tol.for_column(name);
        columns.push(ColumnReport {
            column: name.clone(),
            max_abs_deviation: max,
            mean_abs_deviation: sum / n,
            tolerance,
            pass: max <= tolerance,
        });
    }
    let pass = columns.iter().all(|c| c.pass);
    Ok(CompareReport { schema_version: SCHEMA_VERSION, rows: ca.rows.len(), columns, pass })
}
