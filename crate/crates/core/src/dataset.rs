//! Tabular ingestion and preprocessing.
//!
//! The pipeline runs in this order:
//!
//! 1. [`load_csv`] reads an RFC-4180 file into a [`RawTable`] of optional strings.
//! 2. [`standardize_columns`] lowercases and trims header names.
//! 3. [`drop_sparse_columns`] removes columns below a non-null fraction.
//! 4. [`apply_selection_criteria`] filters rows by the inclusion/exclusion rules.
//! 5. [`impute_missing`] fills numerical gaps with the median, categorical gaps with the mode.
//! 6. [`encode_and_normalize`] produces the immutable [`Dataset`].
//!
//! [`generate_synthetic`] builds datasets with planted informative features for testing.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod presets;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row} has {found} cells, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("file has no header row")]
    MissingHeader,
    #[error("every column was dropped by the non-null threshold {0}")]
    AllColumnsDropped(f64),
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("column `{0}` does not exist")]
    UnknownColumn(String),
    #[error("column `{0}` has no non-missing values")]
    EntirelyMissing(String),
    #[error("missing value remains in column `{column}` at row {row}")]
    MissingValue { column: String, row: usize },
    #[error("target column `{column}` has {found} distinct values, expected 2")]
    TargetNotBinary { column: String, found: usize },
    #[error("positive label `{label}` not found in target column `{column}`")]
    UnknownPositiveLabel { column: String, label: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numerical,
    Categorical,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    /// Number of distinct categories; zero for numerical columns.
    pub cardinality: usize,
    pub non_null_fraction: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl ColumnMeta {
    pub fn is_categorical(&self) -> bool {
        self.kind == ColumnKind::Categorical
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Pre-encoding staging table: header metadata plus a row-major grid of
/// optional string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<ColumnMeta>,
    cells: Vec<Vec<Option<String>>>,
}

impl RawTable {
    /// Builds a table and scans every column for kind, cardinality and range.
    pub fn new(names: Vec<String>, cells: Vec<Vec<Option<String>>>) -> Result<Self> {
        for (row, r) in cells.iter().enumerate() {
            if r.len() != names.len() {
                return Err(DatasetError::RaggedRow {
                    row,
                    expected: names.len(),
                    found: r.len(),
                });
            }
        }
        let columns = names
            .into_iter()
            .enumerate()
            .map(|(j, name)| scan_column(name, cells.iter().map(|r| r[j].as_deref())))
            .collect();
        Ok(Self { columns, cells })
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Option<String>>] {
        &self.cells
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))
    }

    pub fn cell(&self, row: usize, column: usize) -> Option<&str> {
        self.cells[row][column].as_deref()
    }
}

fn scan_column<'a>(name: String, values: impl Iterator<Item = Option<&'a str>>) -> ColumnMeta {
    let mut total = 0usize;
    let mut present = 0usize;
    let mut numeric = true;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut distinct: HashMap<&str, ()> = HashMap::new();
    for v in values {
        total += 1;
        let Some(v) = v else { continue };
        present += 1;
        distinct.insert(v, ());
        match parse_number(v) {
            Some(x) if numeric => {
                min = min.min(x);
                max = max.max(x);
            }
            Some(_) => {}
            None => numeric = false,
        }
    }
    let non_null_fraction = if total == 0 {
        0.0
    } else {
        present as f64 / total as f64
    };
    let (kind, cardinality, min, max) = if numeric {
        let range = (present > 0).then_some((min, max));
        (ColumnKind::Numerical, 0, range.map(|r| r.0), range.map(|r| r.1))
    } else {
        (ColumnKind::Categorical, distinct.len(), None, None)
    };
    ColumnMeta {
        name,
        kind,
        cardinality,
        non_null_fraction,
        min,
        max,
    }
}

/// Reads a comma-delimited UTF-8 file with a header row. Empty cells become
/// missing values; ragged rows are rejected with their zero-based data-row index.
pub fn load_csv(path: impl AsRef<Path>) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv(reader: impl std::io::Read) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(DatasetError::MissingHeader);
    }
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    let mut cells = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(DatasetError::RaggedRow {
                row,
                expected: names.len(),
                found: record.len(),
            });
        }
        cells.push(
            record
                .iter()
                .map(|c| (!c.is_empty()).then(|| c.to_string()))
                .collect(),
        );
    }
    RawTable::new(names, cells)
}

/// Lowercases and trims one column name.
pub fn standardize_name(name: &str) -> String {
    name.trim().to_lowercase()
}

/// Lowercases and trims every header name. Names that collide after
/// standardization get `_2`, `_3`, ... suffixes in encounter order.
pub fn standardize_columns(table: RawTable) -> RawTable {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut taken: std::collections::HashSet<String> = std::collections::HashSet::new();
    let mut columns = table.columns;
    for col in &mut columns {
        let base = standardize_name(&col.name);
        let name = if taken.contains(&base) {
            let counter = seen.entry(base.clone()).or_insert(1);
            loop {
                *counter += 1;
                let candidate = format!("{base}_{counter}");
                if !taken.contains(&candidate) {
                    break candidate;
                }
            }
        } else {
            base
        };
        taken.insert(name.clone());
        col.name = name;
    }
    RawTable {
        columns,
        cells: table.cells,
    }
}

/// Removes columns whose non-null fraction is below `min_non_null`.
/// Returns the surviving table and the names of the dropped columns.
pub fn drop_sparse_columns(table: RawTable, min_non_null: f64) -> Result<(RawTable, Vec<String>)> {
    if !(0.0..=1.0).contains(&min_non_null) {
        return Err(DatasetError::InvalidThreshold(min_non_null));
    }
    let keep: Vec<bool> = table
        .columns
        .iter()
        .map(|c| c.non_null_fraction >= min_non_null)
        .collect();
    if !keep.iter().any(|&k| k) {
        return Err(DatasetError::AllColumnsDropped(min_non_null));
    }
    let dropped = table
        .columns
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| !k)
        .map(|(c, _)| c.name.clone())
        .collect();
    let columns = table
        .columns
        .into_iter()
        .zip(&keep)
        .filter_map(|(c, &k)| k.then_some(c))
        .collect();
    let cells = table
        .cells
        .into_iter()
        .map(|row| {
            row.into_iter()
                .zip(&keep)
                .filter_map(|(c, &k)| k.then_some(c))
                .collect()
        })
        .collect();
    Ok((RawTable { columns, cells }, dropped))
}

/// Inclusion/exclusion rules applied row by row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionCriteria {
    pub target_column: String,
    /// At least one of these must be non-missing.
    #[serde(default)]
    pub required_any_of: Vec<String>,
    /// Each must parse as a number >= 0.
    #[serde(default)]
    pub non_negative_columns: Vec<String>,
    /// Each must be non-missing.
    #[serde(default)]
    pub required_columns: Vec<String>,
}

impl SelectionCriteria {
    pub fn for_target(target: impl Into<String>) -> Self {
        Self {
            target_column: target.into(),
            ..Self::default()
        }
    }

    /// Lowercases and trims every referenced name so criteria match a
    /// standardized table.
    pub fn standardized(&self) -> Self {
        let fix = |v: &[String]| v.iter().map(|s| standardize_name(s)).collect();
        Self {
            target_column: standardize_name(&self.target_column),
            required_any_of: fix(&self.required_any_of),
            non_negative_columns: fix(&self.non_negative_columns),
            required_columns: fix(&self.required_columns),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionAudit {
    pub rows_in: usize,
    pub rows_out: usize,
}

/// Keeps rows with a non-missing target, at least one non-missing value among
/// `required_any_of`, non-negative numbers in `non_negative_columns` and every
/// `required_columns` cell present.
pub fn apply_selection_criteria(
    table: RawTable,
    criteria: &SelectionCriteria,
) -> Result<(RawTable, SelectionAudit)> {
    let target = table.require_column(&criteria.target_column)?;
    let lookup = |names: &[String]| -> Result<Vec<usize>> {
        names.iter().map(|n| table.require_column(n)).collect()
    };
    let any_of = lookup(&criteria.required_any_of)?;
    let non_negative = lookup(&criteria.non_negative_columns)?;
    let required = lookup(&criteria.required_columns)?;

    let rows_in = table.n_rows();
    let keep_row = |row: &Vec<Option<String>>| {
        row[target].is_some()
            && (any_of.is_empty() || any_of.iter().any(|&j| row[j].is_some()))
            && non_negative.iter().all(|&j| {
                row[j]
                    .as_deref()
                    .and_then(parse_number)
                    .is_some_and(|v| v >= 0.0)
            })
            && required.iter().all(|&j| row[j].is_some())
    };
    let names = table.names();
    let cells: Vec<_> = table.cells.into_iter().filter(keep_row).collect();
    let rows_out = cells.len();
    let table = RawTable::new(names, cells)?;
    Ok((table, SelectionAudit { rows_in, rows_out }))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Fills gaps column by column: numerical columns get their median, categorical
/// columns their mode (ties go to the lexicographically smallest value).
/// `skip` names columns (usually the target) left untouched.
pub fn impute_missing(table: RawTable, skip: &[&str]) -> Result<RawTable> {
    let mut fills: Vec<Option<String>> = Vec::with_capacity(table.n_columns());
    for (j, col) in table.columns.iter().enumerate() {
        if skip.contains(&col.name.as_str()) || col.non_null_fraction >= 1.0 {
            fills.push(None);
            continue;
        }
        let present = table.cells.iter().filter_map(|r| r[j].as_deref());
        let fill = match col.kind {
            ColumnKind::Numerical => {
                let mut values: Vec<f64> = present.filter_map(parse_number).collect();
                if values.is_empty() {
                    return Err(DatasetError::EntirelyMissing(col.name.clone()));
                }
                format_number(median(&mut values))
            }
            _ => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for v in present {
                    *counts.entry(v).or_default() += 1;
                }
                let mut best: Option<(&str, usize)> = None;
                for (v, c) in counts {
                    if best.is_none_or(|(_, bc)| c > bc) {
                        best = Some((v, c));
                    }
                }
                best.ok_or_else(|| DatasetError::EntirelyMissing(col.name.clone()))?
                    .0
                    .to_string()
            }
        };
        fills.push(Some(fill));
    }
    let names = table.names();
    let cells = table
        .cells
        .into_iter()
        .map(|row| {
            row.into_iter()
                .zip(&fills)
                .map(|(cell, fill)| match (cell, fill) {
                    (None, Some(f)) => Some(f.clone()),
                    (cell, _) => cell,
                })
                .collect()
        })
        .collect();
    RawTable::new(names, cells)
}

fn format_number(v: f64) -> String {
    // Shortest representation that parses back to the same f64.
    format!("{v}")
}

/// Immutable numeric dataset: a feature matrix with per-column metadata and a
/// binary target. Numerical columns lie in [0, 1]; categorical columns hold
/// integer codes in `[0, cardinality)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Array2<f64>,
    meta: Vec<ColumnMeta>,
    y: Vec<u8>,
    target_name: String,
    class_labels: [String; 2],
    row_ids: Vec<usize>,
}

impl Dataset {
    /// Validates every invariant before constructing.
    pub fn new(
        x: Array2<f64>,
        meta: Vec<ColumnMeta>,
        y: Vec<u8>,
        target_name: impl Into<String>,
        class_labels: [String; 2],
    ) -> Result<Self> {
        let row_ids = (0..x.nrows()).collect();
        let ds = Self {
            x,
            meta,
            y,
            target_name: target_name.into(),
            class_labels,
            row_ids,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DatasetError::Invalid(m));
        if self.x.ncols() != self.meta.len() {
            return bad(format!(
                "{} columns but {} metadata entries",
                self.x.ncols(),
                self.meta.len()
            ));
        }
        if self.x.nrows() != self.y.len() || self.row_ids.len() != self.y.len() {
            return bad(format!("{} rows but {} labels", self.x.nrows(), self.y.len()));
        }
        if let Some(v) = self.y.iter().find(|&&v| v > 1) {
            return bad(format!("label {v} is not binary"));
        }
        for (j, m) in self.meta.iter().enumerate() {
            let col = self.x.column(j);
            match m.kind {
                ColumnKind::Numerical => {
                    if let Some(v) = col.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        return bad(format!("numerical column `{}` holds {v}", m.name));
                    }
                }
                ColumnKind::Categorical => {
                    if m.cardinality == 0 {
                        return bad(format!("categorical column `{}` has cardinality 0", m.name));
                    }
                    if let Some(v) = col
                        .iter()
                        .find(|v| v.fract() != 0.0 || **v < 0.0 || **v >= m.cardinality as f64)
                    {
                        return bad(format!("categorical column `{}` holds code {v}", m.name));
                    }
                }
                ColumnKind::Target => {
                    return bad(format!("feature column `{}` is marked as target", m.name))
                }
            }
        }
        Ok(())
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn meta(&self) -> &[ColumnMeta] {
        &self.meta
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.meta.iter().map(|m| m.name.clone()).collect()
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn class_labels(&self) -> &[String; 2] {
        &self.class_labels
    }

    /// Original row positions of each row, preserved through subsetting.
    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn positive_count(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.positive_count();
        pos > 0 && pos < self.y.len()
    }

    /// Subset of rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            meta: self.meta.clone(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            target_name: self.target_name.clone(),
            class_labels: self.class_labels.clone(),
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Subset of feature columns in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(1), columns),
            meta: columns.iter().map(|&j| self.meta[j].clone()).collect(),
            y: self.y.clone(),
            target_name: self.target_name.clone(),
            class_labels: self.class_labels.clone(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Same rows, metadata and labels with a replacement feature matrix of
    /// identical shape. The invariants are re-checked.
    pub fn with_features(&self, x: Array2<f64>) -> Result<Dataset> {
        if x.dim() != self.x.dim() {
            return Err(DatasetError::Invalid(format!(
                "replacement matrix is {:?}, dataset is {:?}",
                x.dim(),
                self.x.dim()
            )));
        }
        let ds = Dataset {
            x,
            ..self.clone()
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Returns a copy with one extra feature column appended.
    pub fn with_extra_column(&self, meta: ColumnMeta, values: &[f64]) -> Result<Dataset> {
        let mut x = Array2::zeros((self.n_rows(), self.n_features() + 1));
        x.slice_mut(ndarray::s![.., ..self.n_features()])
            .assign(&self.x);
        for (i, v) in values.iter().enumerate() {
            x[[i, self.n_features()]] = *v;
        }
        let mut all_meta = self.meta.clone();
        all_meta.push(meta);
        let ds = Dataset {
            x,
            meta: all_meta,
            y: self.y.clone(),
            target_name: self.target_name.clone(),
            class_labels: self.class_labels.clone(),
            row_ids: self.row_ids.clone(),
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Feature matrix with categorical codes rescaled to `code / (cardinality - 1)`
    /// so every column lies in [0, 1]. This is what the linear, tree, PCA and
    /// transformer paths consume.
    pub fn dense_view(&self) -> Array2<f64> {
        let mut out = self.x.clone();
        for (j, m) in self.meta.iter().enumerate() {
            if m.is_categorical() {
                let scale = if m.cardinality > 1 {
                    1.0 / (m.cardinality - 1) as f64
                } else {
                    0.0
                };
                out.column_mut(j).mapv_inplace(|v| v * scale);
            }
        }
        out
    }

    /// Writes the dataset as CSV: numerical values in shortest round-trip form,
    /// categorical codes as `c<code>` labels, and the target as its class label.
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.feature_names();
        header.push(self.target_name.clone());
        w.write_record(&header)?;
        for (i, row) in self.x.rows().into_iter().enumerate() {
            let mut record: Vec<String> = row
                .iter()
                .zip(&self.meta)
                .map(|(v, m)| {
                    if m.is_categorical() {
                        format!("c{}", *v as usize)
                    } else {
                        format_number(*v)
                    }
                })
                .collect();
            record.push(self.class_labels[self.y[i] as usize].clone());
            w.write_record(&record)?;
        }
        w.flush().map_err(|source| DatasetError::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Encodes categorical columns by first-appearance order, min-max scales
/// numerical columns to [0, 1] (constant columns become 0) and extracts the
/// target. `positive_label` picks the class mapped to 1; when absent the
/// lexicographically larger label is positive.
pub fn encode_and_normalize(
    table: &RawTable,
    target: &str,
    positive_label: Option<&str>,
) -> Result<Dataset> {
    let t = table.require_column(target)?;
    for (row, r) in table.cells.iter().enumerate() {
        if let Some(j) = r.iter().position(Option::is_none) {
            return Err(DatasetError::MissingValue {
                column: table.columns[j].name.clone(),
                row,
            });
        }
    }
    let cell = |i: usize, j: usize| table.cells[i][j].as_deref().unwrap_or_default();

    let mut labels: Vec<&str> = Vec::new();
    for i in 0..table.n_rows() {
        let v = cell(i, t);
        if !labels.contains(&v) {
            labels.push(v);
        }
    }
    if labels.len() != 2 {
        return Err(DatasetError::TargetNotBinary {
            column: target.to_string(),
            found: labels.len(),
        });
    }
    labels.sort_unstable();
    let positive = match positive_label {
        Some(p) if labels.contains(&p) => p,
        Some(p) => {
            return Err(DatasetError::UnknownPositiveLabel {
                column: target.to_string(),
                label: p.to_string(),
            })
        }
        None => labels[1],
    };
    let negative = if labels[0] == positive { labels[1] } else { labels[0] };
    let y: Vec<u8> = (0..table.n_rows())
        .map(|i| u8::from(cell(i, t) == positive))
        .collect();

    let features: Vec<usize> = (0..table.n_columns()).filter(|&j| j != t).collect();
    let mut x = Array2::zeros((table.n_rows(), features.len()));
    let mut meta = Vec::with_capacity(features.len());
    for (out_j, &j) in features.iter().enumerate() {
        let col = &table.columns[j];
        match col.kind {
            ColumnKind::Numerical => {
                let values: Vec<f64> = (0..table.n_rows())
                    .map(|i| parse_number(cell(i, j)).unwrap_or_default())
                    .collect();
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = hi - lo;
                for (i, v) in values.iter().enumerate() {
                    x[[i, out_j]] = if range > 0.0 {
                        ((v - lo) / range).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                }
                meta.push(ColumnMeta {
                    min: Some(lo),
                    max: Some(hi),
                    non_null_fraction: 1.0,
                    ..col.clone()
                });
            }
            _ => {
                let mut codes: HashMap<&str, usize> = HashMap::new();
                for i in 0..table.n_rows() {
                    let next = codes.len();
                    let code = *codes.entry(cell(i, j)).or_insert(next);
                    x[[i, out_j]] = code as f64;
                }
                meta.push(ColumnMeta {
                    kind: ColumnKind::Categorical,
                    cardinality: codes.len(),
                    non_null_fraction: 1.0,
                    min: None,
                    max: None,
                    name: col.name.clone(),
                });
            }
        }
    }
    Dataset::new(
        x,
        meta,
        y,
        table.columns[t].name.clone(),
        [negative.to_string(), positive.to_string()],
    )
}

/// Row and column bookkeeping for a full preprocessing run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessAudit {
    pub rows_in: usize,
    pub rows_out: usize,
    pub columns_dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessOptions {
    pub criteria: SelectionCriteria,
    #[serde(default = "default_min_non_null")]
    pub min_non_null: f64,
    #[serde(default)]
    pub positive_label: Option<String>,
}

fn default_min_non_null() -> f64 {
    0.01
}

/// Runs the whole preprocessing chain on a loaded table.
pub fn preprocess(table: RawTable, options: &PreprocessOptions) -> Result<(Dataset, PreprocessAudit)> {
    let criteria = options.criteria.standardized();
    let table = standardize_columns(table);
    let rows_in = table.n_rows();
    let (table, columns_dropped) = drop_sparse_columns(table, options.min_non_null)?;
    let (table, selection) = apply_selection_criteria(table, &criteria)?;
    let table = impute_missing(table, &[criteria.target_column.as_str()])?;
    let dataset = encode_and_normalize(
        &table,
        &criteria.target_column,
        options.positive_label.as_deref(),
    )?;
    Ok((
        dataset,
        PreprocessAudit {
            rows_in,
            rows_out: selection.rows_out,
            columns_dropped,
        },
    ))
}

/// Parameters for a synthetic dataset with planted informative features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_numerical: usize,
    #[serde(default)]
    pub n_categorical: usize,
    pub n_informative: usize,
    /// Planted feature indices; drawn from the seed when empty.
    #[serde(default)]
    pub informative_indices: Vec<usize>,
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn n_features(&self) -> usize {
        self.n_numerical + self.n_categorical
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(DatasetError::InvalidSynthSpec(m));
        let n = self.n_features();
        if n == 0 || self.n_rows == 0 {
            return err("need at least one row and one feature".into());
        }
        if self.n_informative == 0 || self.n_informative > n {
            return err(format!(
                "n_informative {} must be in 1..={n}",
                self.n_informative
            ));
        }
        if !self.informative_indices.is_empty() {
            if self.informative_indices.len() != self.n_informative {
                return err("informative_indices length differs from n_informative".into());
            }
            let mut sorted = self.informative_indices.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != self.n_informative || sorted.iter().any(|&j| j >= n) {
                return err("informative_indices must be distinct and in range".into());
            }
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return err(format!("noise_level {} must be >= 0", self.noise_level));
        }
        Ok(())
    }

    /// Cardinality of categorical column `c` (counted among categoricals).
    pub fn categorical_cardinality(c: usize) -> usize {
        3 + c % 3
    }
}

/// Generates a dataset whose label is a thresholded linear combination of the
/// planted columns plus Gaussian noise. Numerical columns come first, then
/// categorical ones. Returns the dataset and the sorted planted indices.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    let n = spec.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut informative = if spec.informative_indices.is_empty() {
        sample(&mut rng, n, spec.n_informative).into_vec()
    } else {
        spec.informative_indices.clone()
    };
    informative.sort_unstable();

    let weights: Vec<f64> = informative
        .iter()
        .map(|_| {
            let magnitude = rng.random_range(0.5..1.5);
            if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();

    let mut meta = Vec::with_capacity(n);
    for j in 0..n {
        let (kind, cardinality) = if j < spec.n_numerical {
            (ColumnKind::Numerical, 0)
        } else {
            (
                ColumnKind::Categorical,
                SynthSpec::categorical_cardinality(j - spec.n_numerical),
            )
        };
        meta.push(ColumnMeta {
            name: format!("x{j:02}"),
            kind,
            cardinality,
            non_null_fraction: 1.0,
            min: (kind == ColumnKind::Numerical).then_some(0.0),
            max: (kind == ColumnKind::Numerical).then_some(1.0),
        });
    }

    // Variance of each planted column on the [0, 1] scale, so the signal has
    // unit variance and `noise_level` is relative to it.
    let variance = |j: usize| {
        let c = meta[j].cardinality as f64;
        if meta[j].is_categorical() {
            if c > 1.0 {
                (c + 1.0) / (12.0 * (c - 1.0))
            } else {
                0.0
            }
        } else {
            1.0 / 12.0
        }
    };
    let signal_sd = informative
        .iter()
        .zip(&weights)
        .map(|(&j, w)| w * w * variance(j))
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);

    let mut x = Array2::zeros((spec.n_rows, n));
    let mut y = Vec::with_capacity(spec.n_rows);
    for i in 0..spec.n_rows {
        for (j, m) in meta.iter().enumerate() {
            x[[i, j]] = if m.is_categorical() {
                rng.random_range(0..m.cardinality) as f64
            } else {
                rng.random::<f64>()
            };
        }
        let mut s = 0.0;
        for (&j, w) in informative.iter().zip(&weights) {
            let m = &meta[j];
            let v = if m.is_categorical() {
                if m.cardinality > 1 {
                    x[[i, j]] / (m.cardinality - 1) as f64
                } else {
                    0.0
                }
            } else {
                x[[i, j]]
            };
            s += w * (v - 0.5);
        }
        let noise: f64 = rng.sample(StandardNormal);
        y.push(u8::from(s / signal_sd + spec.noise_level * noise > 0.0));
    }
    let ds = Dataset::new(x, meta, y, "target", ["0".to_string(), "1".to_string()])?;
    Ok((ds, informative))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(csv: &str) -> RawTable {
        read_csv(csv.as_bytes()).unwrap()
    }

    fn column(t: &RawTable, j: usize) -> Vec<Option<String>> {
        t.rows().iter().map(|r| r[j].clone()).collect()
    }

    #[test]
    fn minimal_file_parses() {
        let t = table("A,B\n1,2\n");
        assert_eq!(t.n_columns(), 2);
        assert_eq!(t.n_rows(), 1);
        assert_eq!(t.cell(0, 1), Some("2"));
    }

    #[test]
    fn empty_cell_is_missing() {
        let t = table("a,b\n,2\n");
        assert_eq!(t.cell(0, 0), None);
        assert_eq!(t.columns()[0].non_null_fraction, 0.0);
    }

    #[test]
    fn quoted_cells_follow_rfc4180() {
        let t = table("a,b\n\"x, y\",\"say \"\"hi\"\"\"\n");
        assert_eq!(t.cell(0, 0), Some("x, y"));
        assert_eq!(t.cell(0, 1), Some("say \"hi\""));
    }

    #[test]
    fn ragged_row_names_its_index() {
        let err = read_csv("a,b\n1,2\n1,2,3\n".as_bytes()).unwrap_err();
        match err {
            DatasetError::RaggedRow { row, expected, found } => {
                assert_eq!((row, expected, found), (1, 2, 3));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv"),
            Err(DatasetError::Io { .. })
        ));
    }

    #[test]
    fn standardize_examples() {
        let t = standardize_columns(table(" Patient Age ,age,Age,age \n1,2,3,4\n"));
        assert_eq!(t.names(), vec!["patient age", "age", "age_2", "age_3"]);
    }

    #[test]
    fn standardize_suffix_avoids_existing_names() {
        let t = standardize_columns(table("age_2,Age,age\n1,2,3\n"));
        assert_eq!(t.names(), vec!["age_2", "age", "age_3"]);
    }

    #[test]
    fn standardize_is_idempotent() {
        let once = standardize_columns(table(" A ,a,B\n1,2,3\n"));
        let twice = standardize_columns(once.clone());
        assert_eq!(once, twice);
    }

    #[test]
    fn sparse_column_dropped_at_one_percent() {
        let mut csv = String::from("sparse,full\n");
        for i in 0..1000 {
            if i < 5 {
                csv.push_str("1,1\n");
            } else {
                csv.push_str(",1\n");
            }
        }
        let (t, dropped) = drop_sparse_columns(table(&csv), 0.01).unwrap();
        assert_eq!(t.names(), vec!["full"]);
        assert_eq!(dropped, vec!["sparse"]);
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let t = table("a,b\n,1\n,2\n");
        let (out, dropped) = drop_sparse_columns(t.clone(), 0.0).unwrap();
        assert_eq!(out, t);
        assert!(dropped.is_empty());
    }

    #[test]
    fn dropping_all_columns_is_an_error() {
        let t = table("a,b\n,\n");
        assert!(matches!(
            drop_sparse_columns(t, 0.5),
            Err(DatasetError::AllColumnsDropped(_))
        ));
        assert!(matches!(
            drop_sparse_columns(table("a\n1\n"), 1.5),
            Err(DatasetError::InvalidThreshold(_))
        ));
    }

    #[test]
    fn selection_criteria_rules() {
        let t = table(
            "target,cause_a,cause_b,prior,est\n\
             1,1,,0,1\n\
             ,1,,0,1\n\
             0,,,0,1\n\
             1,,1,-1,1\n\
             0,,1,2,\n\
             0,,1,3,0\n",
        );
        let criteria = SelectionCriteria {
            target_column: "target".into(),
            required_any_of: vec!["cause_a".into(), "cause_b".into()],
            non_negative_columns: vec!["prior".into()],
            required_columns: vec!["est".into()],
        };
        let (out, audit) = apply_selection_criteria(t, &criteria).unwrap();
        assert_eq!(audit, SelectionAudit { rows_in: 6, rows_out: 2 });
        assert_eq!(column(&out, 3), vec![Some("0".into()), Some("3".into())]);
    }

    #[test]
    fn vacuous_criteria_preserve_table() {
        let t = table("t,a\n1,x\n0,\n");
        let (out, audit) = apply_selection_criteria(t.clone(), &SelectionCriteria::for_target("t")).unwrap();
        assert_eq!(out, t);
        assert_eq!(audit.rows_in, audit.rows_out);
    }

    #[test]
    fn criteria_with_absent_column_fail() {
        let t = table("t,a\n1,x\n");
        let mut c = SelectionCriteria::for_target("t");
        c.required_columns.push("nope".into());
        assert!(matches!(
            apply_selection_criteria(t, &c),
            Err(DatasetError::UnknownColumn(name)) if name == "nope"
        ));
    }

    #[test]
    fn impute_numerical_median() {
        let t = impute_missing(table("n,k\n1,a\n,a\n3,a\n"), &[]).unwrap();
        assert_eq!(
            column(&t, 0),
            vec![Some("1".into()), Some("2".into()), Some("3".into())]
        );
    }

    #[test]
    fn impute_categorical_mode_and_tie_break() {
        let t = impute_missing(table("c,k\na,1\na,1\n,1\n"), &[]).unwrap();
        assert_eq!(column(&t, 0)[2].as_deref(), Some("a"));
        let t = impute_missing(table("c,k\nb,1\na,1\n,1\n"), &[]).unwrap();
        assert_eq!(column(&t, 0)[2].as_deref(), Some("a"));
    }

    #[test]
    fn impute_rejects_entirely_missing_column() {
        assert!(matches!(
            impute_missing(table("a,b\n,1\n,2\n"), &[]),
            Err(DatasetError::EntirelyMissing(_))
        ));
    }

    #[test]
    fn impute_skips_named_columns() {
        let t = impute_missing(table("t,a\n,1\n1,\n"), &["t"]).unwrap();
        assert_eq!(t.cell(0, 0), None);
        assert_eq!(t.cell(1, 1), Some("1"));
    }

    #[test]
    fn encode_examples() {
        let t = table("n,c,k,t\n2,x,5,yes\n4,y,5,no\n6,x,5,yes\n");
        let ds = encode_and_normalize(&t, "t", None).unwrap();
        assert_eq!(ds.x().column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(ds.x().column(1).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(ds.x().column(2).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(ds.meta()[1].cardinality, 2);
        assert_eq!(ds.y(), &[1, 0, 1]);
        assert_eq!(ds.class_labels(), &["no".to_string(), "yes".to_string()]);
    }

    #[test]
    fn encode_honours_positive_label() {
        let t = table("a,t\n1,yes\n2,no\n");
        let ds = encode_and_normalize(&t, "t", Some("no")).unwrap();
        assert_eq!(ds.y(), &[0, 1]);
        assert!(encode_and_normalize(&t, "t", Some("maybe")).is_err());
    }

    #[test]
    fn non_binary_target_rejected() {
        let t = table("a,t\n1,x\n2,y\n3,z\n");
        assert!(matches!(
            encode_and_normalize(&t, "t", None),
            Err(DatasetError::TargetNotBinary { found: 3, .. })
        ));
    }

    #[test]
    fn full_preprocess_reports_audit() {
        let t = table(
            "Target ,Cause,Empty,Age\n\
             1,a,,30\n\
             0,,,\n\
             0,b,,40\n\
             ,a,,50\n",
        );
        let options = PreprocessOptions {
            criteria: SelectionCriteria {
                target_column: "target".into(),
                required_any_of: vec!["cause".into()],
                ..SelectionCriteria::default()
            },
            min_non_null: 0.01,
            positive_label: None,
        };
        let (ds, audit) = preprocess(t, &options).unwrap();
        assert_eq!(audit.rows_in, 4);
        assert_eq!(audit.rows_out, 2);
        assert_eq!(audit.columns_dropped, vec!["empty"]);
        assert_eq!(ds.feature_names(), vec!["cause", "age"]);
        assert_eq!(ds.x().column(1).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn synthetic_single_feature_noiseless_is_threshold_rule() {
        let spec = SynthSpec {
            n_rows: 500,
            n_numerical: 3,
            n_categorical: 0,
            n_informative: 1,
            informative_indices: vec![1],
            noise_level: 0.0,
            seed: 7,
        };
        let (ds, planted) = generate_synthetic(&spec).unwrap();
        assert_eq!(planted, vec![1]);
        let col = ds.x().column(1);
        let above: Vec<u8> = col.iter().map(|&v| u8::from(v > 0.5)).collect();
        let below: Vec<u8> = above.iter().map(|v| 1 - v).collect();
        assert!(ds.y() == above.as_slice() || ds.y() == below.as_slice());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SynthSpec {
            n_rows: 200,
            n_numerical: 5,
            n_categorical: 3,
            n_informative: 3,
            informative_indices: vec![],
            noise_level: 0.2,
            seed: 11,
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a.0).unwrap();
        let back: Dataset = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a.0);
    }

    #[test]
    fn synthetic_spec_validation() {
        let mut spec = SynthSpec {
            n_rows: 10,
            n_numerical: 2,
            n_categorical: 0,
            n_informative: 3,
            informative_indices: vec![],
            noise_level: 0.0,
            seed: 0,
        };
        assert!(generate_synthetic(&spec).is_err());
        spec.n_informative = 2;
        spec.informative_indices = vec![1, 1];
        assert!(generate_synthetic(&spec).is_err());
        spec.informative_indices = vec![0, 5];
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_structure() {
        let spec = SynthSpec {
            n_rows: 50,
            n_numerical: 3,
            n_categorical: 2,
            n_informative: 2,
            informative_indices: vec![],
            noise_level: 0.1,
            seed: 3,
        };
        let (ds, _) = generate_synthetic(&spec).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let raw = read_csv(buf.as_slice()).unwrap();
        assert_eq!(raw.n_rows(), 50);
        assert_eq!(raw.columns()[3].kind, ColumnKind::Categorical);
        // Numerical cells survive the text round trip bit-exactly.
        for i in 0..50 {
            let v: f64 = raw.cell(i, 0).unwrap().parse().unwrap();
            assert_eq!(v.to_bits(), ds.x()[[i, 0]].to_bits());
        }
    }
}
