//! Tabular data model: CSV ingestion, one-hot encoding, standardization,
//! per-feature ranges, and the proper/calibration split.
//!
//! A [`TabularDataset`] is an immutable row-major matrix with named, typed
//! columns. Categorical columns are loaded as level indices and expanded to
//! indicator columns by [`encode_onehot`]; every downstream module sees only
//! numeric features.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

/// How a column's values are to be interpreted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    /// Ordinary real-valued feature.
    Continuous,
    /// Raw categorical column; values are indices into `levels` (sorted
    /// lexicographically). Must be one-hot encoded before modeling.
    Categorical { levels: Vec<String> },
    /// 0/1 indicator produced by one-hot encoding `source` at `level`.
    OneHot { source: String, level: String },
}

/// A named column with its kind and, once computed, its training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// `[a, b]` over the training split; `None` until stamped.
    pub range: Option<(f64, f64)>,
}

impl FeatureColumn {
    pub fn continuous(name: &str) -> Self {
        Self { name: name.to_string(), kind: ColumnKind::Continuous, range: None }
    }
}

/// Immutable numeric table with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    pub name: String,
    pub columns: Vec<FeatureColumn>,
    values: Mat,
}

impl TabularDataset {
    /// Builds a dataset, validating shape, finiteness, and name uniqueness.
    pub fn new(name: &str, columns: Vec<FeatureColumn>, values: Mat) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Data(format!("dataset '{name}' has no columns")));
        }
        if values.cols() != columns.len() {
            return Err(Error::Data(format!(
                "dataset '{name}': {} columns declared but rows have {} entries",
                columns.len(),
                values.cols()
            )));
        }
        for (i, v) in values.values().iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "dataset '{name}': non-finite value at row {}, column '{}'",
                    i / values.cols(),
                    columns[i % values.cols()].name
                )));
            }
        }
        let mut names: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Data(format!("dataset '{name}': duplicate column names")));
        }
        Ok(Self { name: name.to_string(), columns, values })
    }

    /// Convenience constructor for all-continuous data given row vectors.
    pub fn from_rows(name: &str, column_names: &[&str], rows: &[Vec<f64>]) -> Result<Self> {
        let columns = column_names.iter().map(|n| FeatureColumn::continuous(n)).collect();
        Self::new(name, columns, Mat::from_rows(rows)?)
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    /// Number of features d.
    pub fn dims(&self) -> usize {
        self.values.cols()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values.get(row, col)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        self.values.row(row)
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.values.column(col)
    }

    pub fn matrix(&self) -> &Mat {
        &self.values
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// New dataset containing the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.dims());
        for &r in idx {
            data.extend_from_slice(self.values.row(r));
        }
        Self {
            name: self.name.clone(),
            columns: self.columns.clone(),
            values: Mat::new(data, self.dims()).expect("same width"),
        }
    }

    /// New dataset containing the given columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let columns = idx.iter().map(|&c| self.columns[c].clone()).collect();
        let mut data = Vec::with_capacity(self.rows() * idx.len());
        for r in 0..self.rows() {
            for &c in idx {
                data.push(self.values.get(r, c));
            }
        }
        Self {
            name: self.name.clone(),
            columns,
            values: Mat::new(data, idx.len()).expect("consistent width"),
        }
    }

    /// Row-wise concatenation. Schemas (names and kinds) must match.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.columns.len() != other.columns.len()
            || self
                .columns
                .iter()
                .zip(&other.columns)
                .any(|(a, b)| a.name != b.name || a.kind != b.kind)
        {
            return Err(Error::Data(format!(
                "cannot stack '{}' and '{}': column schemas differ",
                self.name, other.name
            )));
        }
        let mut data = self.values.values().to_vec();
        data.extend_from_slice(other.values.values());
        Ok(Self {
            name: self.name.clone(),
            columns: self.columns.clone(),
            values: Mat::new(data, self.dims())?,
        })
    }

    /// Copy of the dataset with per-column ranges stamped on the schema.
    pub fn with_ranges(&self, ranges: &[(f64, f64)]) -> Self {
        let mut out = self.clone();
        for (c, r) in out.columns.iter_mut().zip(ranges) {
            c.range = Some(*r);
        }
        out
    }
}

/// Optional per-column kind hints for [`load_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindHint {
    Continuous,
    Categorical,
}

/// Reads a CSV file (UTF-8, comma-separated, mandatory header row).
///
/// Columns where every cell parses as a finite number become continuous;
/// anything else becomes categorical with lexicographically sorted levels,
/// stored as level indices. `hints` can force a numeric-looking column to be
/// treated as categorical (or insist a column is continuous, turning stray
/// text into an error). Malformed input is reported with its row and column.
pub fn load_csv(path: &Path, hints: Option<&BTreeMap<String, KindHint>>) -> Result<TabularDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> =
        reader.headers().map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
    if headers.is_empty() {
        return Err(Error::Csv(format!("{}: empty file", path.display())));
    }

    let mut cells: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            Error::Csv(format!("{}: data row {}: {e}", path.display(), i + 1))
        })?;
        let row: Vec<String> = record.iter().map(str::to_string).collect();
        for (j, cell) in row.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::Csv(format!(
                    "{}: missing cell at data row {}, column '{}'",
                    path.display(),
                    i + 1,
                    headers[j]
                )));
            }
        }
        cells.push(row);
    }
    if cells.is_empty() {
        return Err(Error::Csv(format!("{}: no data rows", path.display())));
    }

    let parse = |cell: &str| -> Option<f64> {
        cell.parse::<f64>().ok().filter(|v| v.is_finite())
    };

    let mut columns = Vec::with_capacity(headers.len());
    let mut parsed: Vec<Vec<f64>> = Vec::with_capacity(headers.len());
    for (j, name) in headers.iter().enumerate() {
        let hint = hints.and_then(|h| h.get(name)).copied();
        let numeric = hint != Some(KindHint::Categorical)
            && cells.iter().all(|row| parse(&row[j]).is_some());
        if numeric {
            parsed.push(cells.iter().map(|row| parse(&row[j]).unwrap()).collect());
            columns.push(FeatureColumn::continuous(name));
        } else {
            if hint == Some(KindHint::Continuous) {
                let bad = cells.iter().position(|row| parse(&row[j]).is_none()).unwrap();
                return Err(Error::Csv(format!(
                    "{}: non-numeric cell '{}' at data row {}, continuous column '{}'",
                    path.display(),
                    cells[bad][j],
                    bad + 1,
                    name
                )));
            }
            let mut levels: Vec<String> = cells.iter().map(|row| row[j].clone()).collect();
            levels.sort_unstable();
            levels.dedup();
            let index: BTreeMap<&str, usize> =
                levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
            parsed.push(cells.iter().map(|row| index[row[j].as_str()] as f64).collect());
            columns.push(FeatureColumn {
                name: name.clone(),
                kind: ColumnKind::Categorical { levels },
                range: None,
            });
        }
    }

    let rows = cells.len();
    let mut data = Vec::with_capacity(rows * headers.len());
    for r in 0..rows {
        for col in &parsed {
            data.push(col[r]);
        }
    }
    TabularDataset::new(
        path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset"),
        columns,
        Mat::new(data, headers.len())?,
    )
}

/// Counts of categorical values that had no indicator column to light up.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EncodingReport {
    /// Per source column: how many cells held a level absent from the
    /// template (each maps to an all-zeros indicator block).
    pub unseen_by_column: BTreeMap<String, usize>,
}

impl EncodingReport {
    pub fn unseen_total(&self) -> usize {
        self.unseen_by_column.values().sum()
    }
}

/// Expands categorical columns into one 0/1 indicator column per level.
///
/// Without a `template`, levels come from `ds` itself (the training split).
/// With a `template` (the training dataset's encoded schema), `ds` is encoded
/// against the training levels: a level unseen in training becomes an
/// all-zeros indicator block and is counted in the report rather than
/// rejected. Continuous columns pass through; already-encoded data is
/// returned unchanged.
pub fn encode_onehot(
    ds: &TabularDataset,
    template: Option<&[FeatureColumn]>,
) -> Result<(TabularDataset, EncodingReport)> {
    let mut report = EncodingReport::default();
    let plan_levels = |source: &str, own: &[String]| -> Result<Vec<String>> {
        match template {
            None => Ok(own.to_vec()),
            Some(cols) => {
                let levels: Vec<String> = cols
                    .iter()
                    .filter_map(|c| match &c.kind {
                        ColumnKind::OneHot { source: s, level } if s == source => {
                            Some(level.clone())
                        }
                        _ => None,
                    })
                    .collect();
                if levels.is_empty() {
                    return Err(Error::Data(format!(
                        "template has no indicator columns for categorical column '{source}'"
                    )));
                }
                Ok(levels)
            }
        }
    };

    let mut out_columns: Vec<FeatureColumn> = Vec::new();
    // For each output column: (source column, Some(level index scheme)).
    enum Fill {
        Copy(usize),
        Indicator { source_col: usize, level: String },
    }
    let mut fills: Vec<Fill> = Vec::new();
    for (j, col) in ds.columns.iter().enumerate() {
        match &col.kind {
            ColumnKind::Continuous | ColumnKind::OneHot { .. } => {
                out_columns.push(col.clone());
                fills.push(Fill::Copy(j));
            }
            ColumnKind::Categorical { levels } => {
                for level in plan_levels(&col.name, levels)? {
                    out_columns.push(FeatureColumn {
                        name: format!("{}={}", col.name, level),
                        kind: ColumnKind::OneHot { source: col.name.clone(), level: level.clone() },
                        range: Some((0.0, 1.0)),
                    });
                    fills.push(Fill::Indicator { source_col: j, level });
                }
            }
        }
    }

    let mut data = Vec::with_capacity(ds.rows() * out_columns.len());
    for r in 0..ds.rows() {
        let mut unseen_this_row: Vec<&str> = Vec::new();
        for fill in &fills {
            match fill {
                Fill::Copy(j) => data.push(ds.value(r, *j)),
                Fill::Indicator { source_col, level } => {
                    let levels = match &ds.columns[*source_col].kind {
                        ColumnKind::Categorical { levels } => levels,
                        _ => unreachable!("indicator fills only come from categorical columns"),
                    };
                    let cell_level = &levels[ds.value(r, *source_col) as usize];
                    data.push(if cell_level == level { 1.0 } else { 0.0 });
                    if template.is_some()
                        && !plan_contains(&fills, *source_col, cell_level)
                        && !unseen_this_row.contains(&ds.columns[*source_col].name.as_str())
                    {
                        unseen_this_row.push(&ds.columns[*source_col].name);
                    }
                }
            }
        }
        for name in unseen_this_row {
            *report.unseen_by_column.entry(name.to_string()).or_insert(0) += 1;
        }
    }

    fn plan_contains(fills: &[Fill], source_col: usize, level: &str) -> bool {
        fills.iter().any(|f| match f {
            Fill::Indicator { source_col: s, level: l } => *s == source_col && l == level,
            _ => false,
        })
    }

    let encoded = TabularDataset::new(&ds.name, out_columns, Mat::new(data, fills.len())?)?;
    Ok((encoded, report))
}

/// Per-feature standardization statistics fitted on a training split.
/// Zero-variance features are dropped (not scaled) and recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    /// Indices (into the fitted dataset's columns) of retained features.
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    /// Population standard deviations of the retained features; all > 0.
    pub stds: Vec<f64>,
    /// Names of dropped zero-variance features.
    pub dropped: Vec<String>,
}

/// Population standard deviation (n denominator), the convention used for
/// standardization so that a two-point column {0, 2} maps to {-1, +1}.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = crate::stats::mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Standardizes to zero mean and unit variance per feature.
///
/// With `params = None`, statistics are fitted on `ds` and constant columns
/// are dropped with a record; otherwise the given parameters are applied
/// (selecting the same retained columns). Returns the transformed dataset
/// and the parameters used.
pub fn standardize(
    ds: &TabularDataset,
    params: Option<&StandardizationParams>,
) -> Result<(TabularDataset, StandardizationParams)> {
    let params = match params {
        Some(p) => p.clone(),
        None => {
            let mut kept = Vec::new();
            let mut means = Vec::new();
            let mut stds = Vec::new();
            let mut dropped = Vec::new();
            for j in 0..ds.dims() {
                let col = ds.column(j);
                let sd = population_std(&col);
                if sd > 0.0 {
                    kept.push(j);
                    means.push(crate::stats::mean(&col));
                    stds.push(sd);
                } else {
                    dropped.push(ds.columns[j].name.clone());
                }
            }
            if kept.is_empty() {
                return Err(Error::Data(format!(
                    "dataset '{}': every feature has zero variance",
                    ds.name
                )));
            }
            StandardizationParams { kept, means, stds, dropped }
        }
    };

    let mut data = Vec::with_capacity(ds.rows() * params.kept.len());
    for r in 0..ds.rows() {
        let row = ds.row(r);
        for (k, &j) in params.kept.iter().enumerate() {
            data.push((row[j] - params.means[k]) / params.stds[k]);
        }
    }
    let columns: Vec<FeatureColumn> = params
        .kept
        .iter()
        .map(|&j| FeatureColumn { range: None, ..ds.columns[j].clone() })
        .collect();
    let out = TabularDataset::new(&ds.name, columns, Mat::new(data, params.kept.len())?)?;
    Ok((out, params))
}

/// Per-feature `[min, max]` over the dataset's rows.
pub fn feature_ranges(ds: &TabularDataset) -> Result<Vec<(f64, f64)>> {
    if ds.rows() == 0 {
        return Err(Error::Data(format!("dataset '{}' is empty", ds.name)));
    }
    Ok((0..ds.dims())
        .map(|j| {
            let col = ds.column(j);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect())
}

/// Seeded split specification for [`split_proper_calibration`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of rows assigned to the proper training set, in (0, 1).
    pub proper_fraction: f64,
    pub seed: u64,
}

/// Random disjoint row partition: `floor(n * f)` proper rows, the rest
/// calibration. Returns sorted index sets; deterministic per seed.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.proper_fraction > 0.0 && spec.proper_fraction < 1.0) {
        return Err(Error::Config(format!(
            "proper_fraction must lie in (0, 1), got {}",
            spec.proper_fraction
        )));
    }
    let n_proper = (n as f64 * spec.proper_fraction).floor() as usize;
    if n_proper == 0 || n_proper == n {
        return Err(Error::Config(format!(
            "proper_fraction {} leaves an empty partition for n = {n}",
            spec.proper_fraction
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    perm.shuffle(&mut rng);
    let mut proper = perm[..n_proper].to_vec();
    let mut cal = perm[n_proper..].to_vec();
    proper.sort_unstable();
    cal.sort_unstable();
    Ok((proper, cal))
}

/// Splits a dataset into disjoint proper-training and calibration subsets.
pub fn split_proper_calibration(
    ds: &TabularDataset,
    spec: &SplitSpec,
) -> Result<(TabularDataset, TabularDataset)> {
    if ds.rows() < 4 {
        return Err(Error::Data(format!(
            "dataset '{}' has {} rows; need at least 4 to split",
            ds.name,
            ds.rows()
        )));
    }
    let (proper, cal) = split_indices(ds.rows(), spec)?;
    Ok((ds.select_rows(&proper), ds.select_rows(&cal)))
}
