use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A row-major table of finite numeric features with unique names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::contract(format!("duplicate feature name {dup:?}")));
        }
        let m = feature_names.len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::contract(format!(
                    "row {r} has {} values, expected {m}",
                    row.len()
                )));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::domain(format!("row {r}, column {c} is not finite")));
            }
        }
        Ok(Dataset {
            feature_names,
            rows,
        })
    }

    /// A dataset with generated names `x0, x1, ...`.
    pub fn from_rows(n_features: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        Dataset::new((0..n_features).map(|i| format!("x{i}")).collect(), rows)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// Loads a CSV file with a header row. Errors name the path and the
    /// 1-based data row and column of a bad cell.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        Self::read_csv(file, &path.display().to_string())
    }

    pub fn read_csv(reader: impl Read, source: &str) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = csv
            .headers()
            .map_err(|e| Error::parse(source, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect::<Vec<_>>();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(Error::parse(source, "missing header row"));
        }
        let mut rows = Vec::new();
        for (r, record) in csv.records().enumerate() {
            let record = record.map_err(|e| Error::parse(source, e.to_string()))?;
            let line = record.position().map_or(r + 2, |p| p.line() as usize);
            let at = |c: usize| format!("{source}: row {}, column {} (line {line})", r + 1, c + 1);
            if record.len() != header.len() {
                return Err(Error::parse(
                    at(record.len().min(header.len())),
                    format!("expected {} cells, found {}", header.len(), record.len()),
                ));
            }
            let row = record
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        return Err(Error::parse(at(c), "missing value"));
                    }
                    match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(v),
                        _ => Err(Error::parse(
                            at(c),
                            format!("{cell:?} is not a finite number"),
                        )),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::domain(format!("{source}: dataset has no rows")));
        }
        Dataset::new(header, rows).map_err(|e| Error::parse(source, e.to_string()))
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let io = |e: csv::Error| Error::domain(format!("failed to write CSV: {e}"));
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(&self.feature_names).map_err(io)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(|v| v.to_string()))
                .map_err(io)?;
        }
        csv.flush()
            .map_err(|e| Error::domain(format!("failed to write CSV: {e}")))
    }
}
