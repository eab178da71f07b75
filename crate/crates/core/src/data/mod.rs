//! Tabular datasets with per-row demographic attributes, seeded splitting,
//! standardization, CSV ingestion and a synthetic generator.

mod csv;
mod synthetic;

pub use self::csv::{load_csv, read_csv, write_csv, CsvSchema};
pub use self::synthetic::{
    generate_synthetic, AxisSpec, CategoryEffect, GroupCount, InteractionTerm, SyntheticSpec,
};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

/// A demographic axis and its declared category set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub categories: Vec<String>,
}

impl Axis {
    pub fn new(name: impl Into<String>, categories: Vec<String>) -> Self {
        Self {
            name: name.into(),
            categories,
        }
    }

    pub fn category_index(&self, value: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == value)
    }
}

/// Feature matrix, binary labels and per-row categorical attributes.
///
/// Attributes are stored as indices into each axis's category list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    feature_names: Vec<String>,
    labels: Vec<u8>,
    axes: Vec<Axis>,
    attributes: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        feature_names: Vec<String>,
        labels: Vec<u8>,
        axes: Vec<Axis>,
        attributes: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n || attributes.len() != n {
            return Err(Error::Validation(format!(
                "row counts disagree: features {n}, labels {}, attributes {}",
                labels.len(),
                attributes.len()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::Validation(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.cols()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::Row {
                row: i,
                message: format!("label {} is not 0 or 1", labels[i]),
            });
        }
        for (i, row) in attributes.iter().enumerate() {
            if row.len() != axes.len() {
                return Err(Error::Row {
                    row: i,
                    message: format!("{} attribute values for {} axes", row.len(), axes.len()),
                });
            }
            for (k, &v) in row.iter().enumerate() {
                if v >= axes[k].categories.len() {
                    return Err(Error::Row {
                        row: i,
                        message: format!("attribute index {v} outside axis `{}`", axes[k].name),
                    });
                }
            }
        }
        Ok(Self {
            features,
            feature_names,
            labels,
            axes,
            attributes,
        })
    }

    /// Same rows with a different feature matrix (standardization, encoding).
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        if features.rows() != self.len() || features.cols() != self.dim() {
            return Err(Error::InvalidArgument("feature matrix shape changed".into()));
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.feature_names.clone(),
            labels,
            self.axes.clone(),
            self.attributes.clone(),
        )
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of feature columns.
    #[inline]
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    pub fn attribute(&self, row: usize, axis: usize) -> &str {
        &self.axes[axis].categories[self.attributes[row][axis]]
    }

    /// Values of the given axes for one row, in the order given.
    pub fn attribute_tuple(&self, row: usize, axes: &[usize]) -> Vec<String> {
        axes.iter()
            .map(|&k| self.attribute(row, k).to_string())
            .collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            feature_names: self.feature_names.clone(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            axes: self.axes.clone(),
            attributes: indices.iter().map(|&i| self.attributes[i].clone()).collect(),
        }
    }
}

/// Seeded three-way split: test first, then validation out of the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub seed: u64,
    pub test_fraction: f64,
    pub val_fraction_of_remainder: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            test_fraction: 0.30,
            val_fraction_of_remainder: 0.30,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("test_fraction", self.test_fraction),
            ("val_fraction_of_remainder", self.val_fraction_of_remainder),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie strictly in (0, 1), got {f}"
                )));
            }
        }
        Ok(())
    }

    /// Partition sizes `(train, val, test)` for `n` rows.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let test = round_half_up(n as f64 * self.test_fraction);
        let rest = n - test.min(n);
        let val = round_half_up(rest as f64 * self.val_fraction_of_remainder).min(rest);
        (rest - val, val, test.min(n))
    }
}

// The epsilon absorbs representation error such as 5 * 0.3 = 1.4999999999999998.
fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

/// Row indices of each partition, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub indices: SplitIndices,
}

pub const MIN_SPLIT_ROWS: usize = 10;

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let (n_train, n_val, n_test) = spec.sizes(n);
    if n < MIN_SPLIT_ROWS || n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InvalidArgument(format!(
            "{n} rows cannot be split into non-empty train/val/test partitions \
             (need at least {MIN_SPLIT_ROWS})"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(spec.seed));
    let mut test = perm[..n_test].to_vec();
    let mut val = perm[n_test..n_test + n_val].to_vec();
    let mut train = perm[n_test + n_val..].to_vec();
    test.sort_unstable();
    val.sort_unstable();
    train.sort_unstable();
    Ok(SplitIndices { train, val, test })
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let indices = split_indices(ds.len(), spec)?;
    Ok(Split {
        train: ds.select(&indices.train),
        val: ds.select(&indices.val),
        test: ds.select(&indices.test),
        indices,
    })
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Result<Self> {
        let n = train.len();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "standardization needs at least 2 training rows".into(),
            ));
        }
        let x = train.features();
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                let c = x.get(i, j) - mean[j];
                var[j] += c * c;
            }
        }
        let std = var.into_iter().map(|v| (v / n as f64).sqrt()).collect();
        Ok(Self { mean, std })
    }

    /// Shift by the mean; scale by the std unless it is zero.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.mean.len() {
            return Err(Error::InvalidArgument(format!(
                "dataset has {} columns, standardizer has {}",
                ds.dim(),
                self.mean.len()
            )));
        }
        let mut x = ds.features().clone();
        for i in 0..x.rows() {
            for (j, v) in x.row_mut(i).iter_mut().enumerate() {
                *v -= self.mean[j];
                if self.std[j] > 0.0 {
                    *v /= self.std[j];
                }
            }
        }
        ds.with_features(x)
    }
}

/// Standardize `train` and every dataset in `others` with train statistics.
/// The returned list starts with the standardized train set.
pub fn standardize(train: &Dataset, others: &[&Dataset]) -> Result<(Vec<Dataset>, Standardizer)> {
    let st = Standardizer::fit(train)?;
    let mut out = Vec::with_capacity(others.len() + 1);
    out.push(st.apply(train)?);
    for ds in others {
        out.push(st.apply(ds)?);
    }
    Ok((out, st))
}
