//! Streaming data model: feature columns arriving one at a time, sparse
//! buffers with known-entry masks, class labels, masking utilities, and
//! CSV I/O.
//!
//! The instance set is fixed (N rows); the feature space grows as columns
//! arrive. A cell is exactly one of known(real) or missing.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::seeds;

/// An N×D feature table where each cell is either a known finite value or
/// missing. `data` holds NaN at missing cells; `mask` is the source of truth.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    data: Array2<f64>,
    mask: Array2<bool>,
}

impl PartialEq for FeatureTable {
    /// Tables are equal when their masks agree and every known cell agrees;
    /// the NaN placeholders at missing cells do not participate.
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask
            && self
                .data
                .iter()
                .zip(other.data.iter())
                .zip(self.mask.iter())
                .all(|((a, b), &known)| !known || a == b)
    }
}

impl FeatureTable {
    /// Build a fully-known table from dense values.
    pub fn dense(data: Array2<f64>) -> Self {
        let mask = Array2::from_elem(data.dim(), true);
        Self { data, mask }
    }

    /// Build a table from values plus an explicit known-entry mask.
    pub fn with_mask(data: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if data.dim() != mask.dim() {
            return Err(Error::DimensionMismatch(format!(
                "data {:?} vs mask {:?}",
                data.dim(),
                mask.dim()
            )));
        }
        let mut data = data;
        for (cell, &known) in data.iter_mut().zip(mask.iter()) {
            if !known {
                *cell = f64::NAN;
            }
        }
        Ok(Self { data, mask })
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_known(&self, row: usize, col: usize) -> bool {
        self.mask[[row, col]]
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.mask[[row, col]].then(|| self.data[[row, col]])
    }

    /// True when every cell is known.
    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&k| k)
    }

    pub fn known_count(&self) -> usize {
        self.mask.iter().filter(|&&k| k).count()
    }

    /// Loss rate of column `col`: 1 - |known| / N.
    pub fn loss_rate(&self, col: usize) -> f64 {
        let known = self.mask.column(col).iter().filter(|&&k| k).count();
        1.0 - known as f64 / self.n_rows() as f64
    }

    /// Overall loss rate across all cells.
    pub fn overall_loss_rate(&self) -> f64 {
        1.0 - self.known_count() as f64 / (self.n_rows() * self.n_cols()) as f64
    }

    /// Extract column `col` as a streaming feature column.
    pub fn column(&self, col: usize) -> FeatureColumn {
        let values = (0..self.n_rows()).map(|r| self.get(r, col)).collect();
        FeatureColumn { index: col, values }
    }

    /// Iterate columns in arrival order.
    pub fn columns(&self) -> impl Iterator<Item = FeatureColumn> + '_ {
        (0..self.n_cols()).map(|c| self.column(c))
    }

    /// Dense values of a fully-known table.
    pub fn to_dense(&self) -> Result<Array2<f64>> {
        if !self.is_complete() {
            return Err(Error::InvalidData(
                "table has missing entries; complete it first".into(),
            ));
        }
        Ok(self.data.clone())
    }
}

/// One streaming feature: its ordinal position in the stream and N
/// observations, each known or missing.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub index: usize,
    pub values: Vec<Option<f64>>,
}

impl FeatureColumn {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn known_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn loss_rate(&self) -> f64 {
        1.0 - self.known_count() as f64 / self.n_rows() as f64
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| v.is_some())
    }

    /// Dense values; only valid when the column is complete.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|v| {
                v.ok_or_else(|| {
                    Error::InvalidData(format!("column {} has missing entries", self.index))
                })
            })
            .collect()
    }
}

/// A block of up to L consecutive streaming columns awaiting completion.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBuffer {
    columns: Vec<FeatureColumn>,
}

impl FeatureBuffer {
    pub fn new(columns: Vec<FeatureColumn>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidData("buffer must hold at least one column".into()));
        }
        let n = columns[0].n_rows();
        if n == 0 {
            return Err(Error::InvalidData("columns must have at least one row".into()));
        }
        if columns.iter().any(|c| c.n_rows() != n) {
            return Err(Error::DimensionMismatch(
                "all buffered columns must have the same row count".into(),
            ));
        }
        Ok(Self { columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.columns[col].values[row]
    }

    /// Iterate known entries as (row, local column, value) triples.
    pub fn known_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.columns.iter().enumerate().flat_map(|(j, col)| {
            col.values
                .iter()
                .enumerate()
                .filter_map(move |(n, v)| v.map(|x| (n, j, x)))
        })
    }

    pub fn known_count(&self) -> usize {
        self.columns.iter().map(|c| c.known_count()).sum()
    }

    pub fn missing_count(&self) -> usize {
        self.n_rows() * self.n_cols() - self.known_count()
    }
}

/// Complete class labels for the N instances, encoded as 0-based codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    class_count: usize,
}

impl LabelVector {
    /// Labels must form a dense code set {0, ..., k-1} with k >= 2.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidData("label vector is empty".into()));
        }
        let distinct: BTreeSet<usize> = labels.iter().copied().collect();
        let class_count = distinct.len();
        if class_count < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 distinct classes, got {class_count}"
            )));
        }
        if *distinct.iter().next_back().unwrap() != class_count - 1 {
            return Err(Error::InvalidData(
                "label codes must be dense 0..class_count-1".into(),
            ));
        }
        Ok(Self { labels, class_count })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Integer codes as a numeric column, for correlation against features.
    pub fn as_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&c| c as f64).collect()
    }

    /// Restrict to a subset of instances, keeping the original codes.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let labels: Vec<usize> = rows.iter().map(|&r| self.labels[r]).collect();
        Self::new(labels)
    }
}

/// Parse a feature/label CSV: comma-separated, optional header row
/// (auto-detected when a non-label cell of the first row is non-numeric),
/// last column is the label. Cells equal to `missing_token` or empty are
/// missing. Labels are re-encoded to 0-based codes in first-appearance order.
pub fn load_csv(path: &Path, missing_token: &str) -> Result<(FeatureTable, LabelVector)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        })?;

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 1,
            msg: e.to_string(),
        })?;
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(Error::InvalidData(format!("{}: file has no rows", path.display())));
    }

    let width = rows[0].len();
    if width < 2 {
        return Err(Error::InvalidData(
            "need at least one feature column plus a label column".into(),
        ));
    }
    for (i, rec) in rows.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Parse {
                row: i + 1,
                msg: format!("ragged row: expected {} columns, got {}", width, rec.len()),
            });
        }
    }

    let is_missing = |cell: &str| cell.is_empty() || cell == missing_token;
    let parse_feature = |cell: &str| -> Option<f64> {
        cell.parse::<f64>().ok().filter(|v| v.is_finite())
    };

    // A first row with a non-numeric, non-missing feature cell can only be a header.
    let has_header = rows[0]
        .iter()
        .take(width - 1)
        .any(|cell| !is_missing(cell) && parse_feature(cell).is_none());
    let data_rows = &rows[has_header as usize..];
    if data_rows.is_empty() {
        return Err(Error::InvalidData(format!(
            "{}: file has a header but no data rows",
            path.display()
        )));
    }

    let n = data_rows.len();
    let d = width - 1;
    let mut data = Array2::from_elem((n, d), f64::NAN);
    let mut mask = Array2::from_elem((n, d), false);
    let mut label_names: Vec<String> = Vec::new();
    let mut labels: Vec<usize> = Vec::with_capacity(n);

    for (r, rec) in data_rows.iter().enumerate() {
        let file_row = r + 1 + has_header as usize;
        for (c, cell) in rec.iter().take(d).enumerate() {
            if is_missing(cell) {
                continue;
            }
            match parse_feature(cell) {
                Some(v) => {
                    data[[r, c]] = v;
                    mask[[r, c]] = true;
                }
                None => {
                    return Err(Error::Parse {
                        row: file_row,
                        msg: format!("column {}: {:?} is not a finite number or the missing token", c + 1, cell),
                    })
                }
            }
        }
        let label_cell = rec.get(d).unwrap_or("");
        if is_missing(label_cell) {
            return Err(Error::Parse {
                row: file_row,
                msg: "label column has a missing value; labels must be complete".into(),
            });
        }
        let code = match label_names.iter().position(|l| l == label_cell) {
            Some(idx) => idx,
            None => {
                label_names.push(label_cell.to_string());
                label_names.len() - 1
            }
        };
        labels.push(code);
    }

    let labels = LabelVector::new(labels)?;
    Ok((FeatureTable { data, mask }, labels))
}

/// Write a table plus labels as CSV, "NA" for missing cells, labels last.
pub fn save_csv(table: &FeatureTable, labels: &LabelVector, path: &Path) -> Result<()> {
    if labels.len() != table.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            table.n_rows()
        )));
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    })?;
    let mut record: Vec<String> = Vec::with_capacity(table.n_cols() + 1);
    for r in 0..table.n_rows() {
        record.clear();
        for c in 0..table.n_cols() {
            record.push(match table.get(r, c) {
                Some(v) => v.to_string(),
                None => "NA".to_string(),
            });
        }
        record.push(labels.get(r).to_string());
        writer.write_record(record.iter()).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        })?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Mark ⌊ζ·N·D⌋ uniformly random cells of a fully-known table as missing.
///
/// Never leaves a column with zero known entries: draws that would are
/// rejected and resampled. Deterministic for a fixed seed.
pub fn inject_missing(table: &FeatureTable, zeta: f64, seed: u64) -> Result<FeatureTable> {
    if !(0.0..1.0).contains(&zeta) {
        return Err(Error::InvalidConfig(format!(
            "loss rate zeta must be in [0, 1), got {zeta}"
        )));
    }
    if !table.is_complete() {
        return Err(Error::InvalidData(
            "inject_missing needs a fully-known table".into(),
        ));
    }
    let (n, d) = (table.n_rows(), table.n_cols());
    let total = n * d;
    let m = (zeta * total as f64).floor() as usize;
    if m == 0 {
        return Ok(table.clone());
    }
    // Each column can lose at most n-1 entries.
    if m > d * (n - 1) {
        return Err(Error::InvalidConfig(format!(
            "cannot mark {m} of {total} cells missing while keeping every column non-empty"
        )));
    }

    let mut rng = seeds::rng(seed, "mask", 0);
    const MAX_DRAWS: usize = 10_000;
    for _ in 0..MAX_DRAWS {
        let picks = sample(&mut rng, total, m);
        let mut per_column_known = vec![n; d];
        for idx in picks.iter() {
            per_column_known[idx % d] -= 1;
        }
        if per_column_known.iter().any(|&k| k == 0) {
            continue;
        }
        let mut mask = Array2::from_elem((n, d), true);
        for idx in picks.iter() {
            mask[[idx / d, idx % d]] = false;
        }
        return FeatureTable::with_mask(table.data.clone(), mask);
    }
    Err(Error::InvalidData(format!(
        "gave up masking after {MAX_DRAWS} draws: every draw emptied a column"
    )))
}

/// Yield consecutive groups of at most `buffer_len` columns in arrival order.
/// The final group may be shorter.
pub fn stream_columns(
    table: &FeatureTable,
    buffer_len: usize,
) -> impl Iterator<Item = FeatureBuffer> + '_ {
    assert!(buffer_len >= 1, "buffer_len must be at least 1");
    let d = table.n_cols();
    (0..d).step_by(buffer_len).map(move |start| {
        let end = (start + buffer_len).min(d);
        let columns = (start..end).map(|c| table.column(c)).collect();
        FeatureBuffer::new(columns).expect("non-empty group of equal-length columns")
    })
}

/// Group an arbitrary column stream into buffers of at most `buffer_len`.
pub fn buffer_stream<I>(columns: I, buffer_len: usize) -> impl Iterator<Item = FeatureBuffer>
where
    I: IntoIterator<Item = FeatureColumn>,
{
    assert!(buffer_len >= 1, "buffer_len must be at least 1");
    let mut iter = columns.into_iter();
    std::iter::from_fn(move || {
        let group: Vec<FeatureColumn> = iter.by_ref().take(buffer_len).collect();
        if group.is_empty() {
            None
        } else {
            Some(FeatureBuffer::new(group).expect("equal-length columns"))
        }
    })
}
