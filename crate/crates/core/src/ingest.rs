//! Tabular data pipeline: CSV loading, integer coding of categorical
//! columns, pooled z-scoring, splitting into two groups, and sampling each
//! group through a fixed random permutation.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Kept in the raw table (e.g. for group splitting) but not a feature.
    Ignore,
}

/// One column of the schema. For categorical columns `categories` holds the
/// fitted order; category `categories[i]` is coded as `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

fn default_missing() -> Vec<String> {
    vec![String::new(), "?".to_string()]
}

/// Column kinds in file order plus the tokens treated as missing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<ColumnSchema>,
    #[serde(default = "default_missing")]
    pub missing: Vec<String>,
}

impl TableSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let f = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::usage(format!("no column named {name:?}")))
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.kind != ColumnKind::Ignore)
            .map(|c| c.name.clone())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRow {
    /// 1-based line number in the source file.
    pub line: u64,
    pub cells: Vec<String>,
}

/// Rows that passed arity, numeric and missing-value checks.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<RawRow>,
    pub dropped_missing: usize,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = &str> {
        self.rows.iter().map(move |r| r.cells[idx].as_str())
    }
}

/// Reads a headered, comma-separated UTF-8 file. Rows containing a missing
/// token are dropped and counted; any other malformed row is an error naming
/// its line.
pub fn load_csv(path: &Path, schema: &TableSchema) -> Result<RawTable> {
    let file = File::open(path)?;
    load_csv_from(file, path, schema)
}

fn data_err(path: &Path, line: u64, message: String) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        line,
        message,
    }
}

pub(crate) fn load_csv_from<R: Read>(reader: R, path: &Path, schema: &TableSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(RawTable {
            headers: Vec::new(),
            rows: Vec::new(),
            dropped_missing: 0,
        });
    }
    let expected: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    if headers != expected {
        return Err(data_err(
            path,
            1,
            format!("header {headers:?} does not match schema columns {expected:?}"),
        ));
    }

    let mut rows = Vec::new();
    let mut dropped = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != headers.len() {
            return Err(data_err(
                path,
                line,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        if rec.iter().any(|cell| schema.missing.iter().any(|m| m == cell)) {
            dropped += 1;
            continue;
        }
        for (cell, col) in rec.iter().zip(&schema.columns) {
            if col.kind == ColumnKind::Numeric && cell.parse::<f64>().is_err() {
                return Err(data_err(
                    path,
                    line,
                    format!("column {:?}: {cell:?} is not a number", col.name),
                ));
            }
        }
        rows.push(RawRow {
            line,
            cells: rec.iter().map(str::to_string).collect(),
        });
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} rows with missing values", path.display());
    }
    Ok(RawTable {
        headers,
        rows,
        dropped_missing: dropped,
    })
}

/// Fits category orders (first appearance in row order) for every
/// categorical column and returns the schema with `categories` filled in.
pub fn fit_categories(table: &RawTable, schema: &TableSchema) -> TableSchema {
    let mut fitted = schema.clone();
    for (idx, col) in fitted.columns.iter_mut().enumerate() {
        if col.kind != ColumnKind::Categorical {
            continue;
        }
        let mut seen: Vec<String> = Vec::new();
        let mut index: HashMap<&str, ()> = HashMap::new();
        for cell in table.column(idx) {
            if index.insert(cell, ()).is_none() {
                seen.push(cell.to_string());
            }
        }
        col.categories = Some(seen);
    }
    fitted
}

/// Feature matrix (non-ignored columns, schema order) under a fitted schema.
/// Categories absent from the fitted order are an error.
pub fn transform(table: &RawTable, fitted: &TableSchema) -> Result<Vec<Vec<f64>>> {
    let codes: Vec<Option<HashMap<&str, f64>>> = fitted
        .columns
        .iter()
        .map(|c| match (c.kind, &c.categories) {
            (ColumnKind::Categorical, Some(cats)) => Ok(Some(
                cats.iter()
                    .enumerate()
                    .map(|(i, s)| (s.as_str(), (i + 1) as f64))
                    .collect(),
            )),
            (ColumnKind::Categorical, None) => Err(Error::usage(format!(
                "categorical column {:?} has not been fitted",
                c.name
            ))),
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;

    table
        .rows
        .iter()
        .map(|row| {
            let mut out = Vec::with_capacity(row.cells.len());
            for ((cell, col), code) in row.cells.iter().zip(&fitted.columns).zip(&codes) {
                match col.kind {
                    ColumnKind::Ignore => {}
                    ColumnKind::Numeric => out.push(cell.parse::<f64>().map_err(|_| {
                        Error::usage(format!("column {:?}: {cell:?} is not a number", col.name))
                    })?),
                    ColumnKind::Categorical => {
                        let v = code.as_ref().and_then(|m| m.get(cell.as_str())).ok_or_else(|| {
                            Error::UnseenCategory {
                                column: col.name.clone(),
                                value: cell.clone(),
                            }
                        })?;
                        out.push(*v);
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

/// Codes each category as `1..=K` in order of first appearance and passes
/// numeric columns through unchanged.
pub fn encode_categoricals(table: &RawTable, schema: &TableSchema) -> Result<(Vec<Vec<f64>>, TableSchema)> {
    let fitted = fit_categories(table, schema);
    let m = transform(table, &fitted)?;
    Ok((m, fitted))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
}

/// Z-scores every column with its population mean and standard deviation.
/// Constant columns become all zeros.
pub fn standardize(rows: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<FeatureStats>)> {
    if rows.len() < 2 {
        return Err(Error::usage(format!("standardizing needs >= 2 rows, got {}", rows.len())));
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::Shape {
            expected: d,
            found: r.len(),
        });
    }
    let n = rows.len() as f64;
    let stats: Vec<FeatureStats> = (0..d)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            FeatureStats {
                mean,
                std: var.sqrt(),
            }
        })
        .collect();
    let out = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&stats)
                .map(|(v, s)| if s.std > 0.0 { (v - s.mean) / s.std } else { 0.0 })
                .collect()
        })
        .collect();
    Ok((out, stats))
}

/// Row indices for which `predicate(cell)` holds, and the rest. Both sides
/// must be non-empty.
pub fn split_groups(
    table: &RawTable,
    schema: &TableSchema,
    column: &str,
    predicate: impl Fn(&str) -> bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let idx = schema.column_index(column)?;
    let (first, second): (Vec<usize>, Vec<usize>) =
        (0..table.len()).partition(|&i| predicate(&table.rows[i].cells[idx]));
    if first.is_empty() || second.is_empty() {
        return Err(Error::usage(format!(
            "splitting on {column:?} gives groups of sizes {} and {}; both must be non-empty",
            first.len(),
            second.len()
        )));
    }
    Ok((first, second))
}

/// Draws a group's points in the order of one random permutation; each point
/// is returned at most once.
#[derive(Clone, Debug)]
pub struct PermutationSampler {
    group: usize,
    rows: Vec<Vec<f64>>,
    order: Vec<usize>,
    cursor: usize,
}

impl PermutationSampler {
    pub fn new<R: Rng + ?Sized>(group: usize, rows: Vec<Vec<f64>>, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(rng);
        PermutationSampler {
            group,
            rows,
            order,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.order.len() - self.cursor
    }

    /// The draw's position in the sampler becomes the element index.
    pub fn next_sample(&mut self) -> Result<Element> {
        let pos = *self.order.get(self.cursor).ok_or(Error::Exhausted { drawn: self.cursor })?;
        let e = Element::new(self.group, self.cursor, self.rows[pos].clone());
        self.cursor += 1;
        Ok(e)
    }

    /// Source row of the `k`-th draw.
    pub fn source_row(&self, k: usize) -> Option<usize> {
        self.order.get(k).copied()
    }
}

const MATRIX_MAGIC: &[u8; 8] = b"XGMATRX1";

/// Column-major binary dump: 8-byte magic `XGMATRX1`, row count and column
/// count as little-endian u64, then each column's values as little-endian
/// f64.
pub fn write_matrix_bin(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for j in 0..cols {
        for r in rows {
            w.write_all(&r[j].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_bin(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |msg: &str| data_err(path, 0, msg.to_string());
    if bytes.len() < 24 || &bytes[..8] != MATRIX_MAGIC {
        return Err(bad("not a matrix dump"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let d = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 24 + 8 * n * d {
        return Err(bad("truncated matrix dump"));
    }
    let mut rows = vec![vec![0.0; d]; n];
    for (k, chunk) in bytes[24..].chunks_exact(8).enumerate() {
        rows[k % n][k / n] = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    Ok(rows)
}

pub fn write_matrix_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Both groups of a prepared dataset, standardized on the pooled rows.
#[derive(Clone, Debug)]
pub struct PreparedDataset {
    pub feature_names: Vec<String>,
    pub stats: Vec<FeatureStats>,
    pub groups: [Vec<Vec<f64>>; 2],
    pub dropped_missing: usize,
    pub source: PathBuf,
}

/// load → encode → standardize (pooled) → split on `group_column`, rows whose
/// value is in `first_group_values` forming the first group.
pub fn prepare_dataset(
    path: &Path,
    schema: &TableSchema,
    group_column: &str,
    first_group_values: &[String],
) -> Result<PreparedDataset> {
    let table = load_csv(path, schema)?;
    let (encoded, fitted) = encode_categoricals(&table, schema)?;
    let (z, stats) = standardize(&encoded)?;
    let (a, b) = split_groups(&table, schema, group_column, |v| {
        first_group_values.iter().any(|g| g == v)
    })?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| z[i].clone()).collect::<Vec<_>>();
    Ok(PreparedDataset {
        feature_names: fitted.feature_names(),
        stats,
        groups: [pick(&a), pick(&b)],
        dropped_missing: table.dropped_missing,
        source: path.to_path_buf(),
    })
}
