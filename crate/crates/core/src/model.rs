//! Problem data: training instances, the label space with its word
//! embeddings, and the learned projections.

use std::collections::HashSet;
use std::fmt;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg;

/// Training instances `X` (n×d) with their seen-label indicators `Y` (n×Lˢ).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Array2<f64>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Array2<f64>) -> Self {
        Self { features, labels }
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn label_count(&self) -> usize {
        self.labels.ncols()
    }

    /// Restricts the dataset to a subset of label columns, keeping only the
    /// rows that still have both a positive and a negative label.
    pub fn select_labels(&self, columns: &[usize]) -> Dataset {
        let labels = self.labels.select(Axis(1), columns);
        let keep: Vec<usize> = labels
            .outer_iter()
            .enumerate()
            .filter(|(_, row)| row.iter().any(|&v| v == 1.0) && row.iter().any(|&v| v == 0.0))
            .map(|(i, _)| i)
            .collect();
        Dataset {
            features: self.features.select(Axis(0), &keep),
            labels: labels.select(Axis(0), &keep),
        }
    }
}

/// Ordered label names with their embeddings. Seen labels come first
/// (indices `0..seen_count`), unseen labels after.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpace {
    pub names: Vec<String>,
    pub seen_count: usize,
    /// L×m word-embedding matrix, rows in label order.
    pub embeddings: Array2<f64>,
    /// Set when `embeddings` went through [`normalize_rows`].
    pub normalized: bool,
}

impl LabelSpace {
    pub fn new(names: Vec<String>, seen_count: usize, embeddings: Array2<f64>) -> Self {
        Self {
            names,
            seen_count,
            embeddings,
            normalized: false,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.embeddings = normalize_rows(self.embeddings.view());
        self.normalized = true;
        self
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn unseen_count(&self) -> usize {
        self.len().saturating_sub(self.seen_count)
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn seen_embeddings(&self) -> ArrayView2<'_, f64> {
        self.embeddings.slice(s![..self.seen_count, ..])
    }

    pub fn unseen_embeddings(&self) -> ArrayView2<'_, f64> {
        self.embeddings.slice(s![self.seen_count.., ..])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Builds a new label space from a list of label indices, of which the
    /// first `seen_count` become the seen labels.
    pub fn reorder(&self, order: &[usize], seen_count: usize) -> LabelSpace {
        LabelSpace {
            names: order.iter().map(|&i| self.names[i].clone()).collect(),
            seen_count,
            embeddings: self.embeddings.select(Axis(0), order),
            normalized: self.normalized,
        }
    }
}

/// Learned projections: `W` (d×r), the threshold column `W0` (d), and the
/// orthonormal embedding projection `U` (m×r).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w: Array2<f64>,
    pub w0: Array1<f64>,
    pub u: Array2<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub r: usize,
}

impl ModelParams {
    pub fn zeros(d: usize, m: usize, r: usize) -> Self {
        Self {
            w: Array2::zeros((d, r)),
            w0: Array1::zeros(d),
            u: Array2::zeros((m, r)),
            beta: 1.0,
            gamma: 0.0,
            lambda: 0.0,
            r,
        }
    }

    pub fn d(&self) -> usize {
        self.w.nrows()
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    /// Frobenius norm of `UᵀU − I`.
    pub fn orthonormality_error(&self) -> f64 {
        linalg::orthonormality_error(self.u.view())
    }

    pub fn check(&self) -> Result<()> {
        if self.w.dim() != (self.d(), self.r) || self.u.ncols() != self.r {
            return Err(Error::arg(format!(
                "W is {:?} and U is {:?} but r = {}",
                self.w.dim(),
                self.u.dim(),
                self.r
            )));
        }
        if self.w0.len() != self.d() {
            return Err(Error::shape("W0", self.d(), self.w0.len()));
        }
        if self.r > self.m() {
            return Err(Error::arg(format!("r = {} exceeds embedding dimension {}", self.r, self.m())));
        }
        Ok(())
    }
}

/// Divides every nonzero row by its Euclidean norm; zero rows pass through.
pub fn normalize_rows(matrix: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = matrix.to_owned();
    for mut row in out.outer_iter_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoInstances,
    RowCountMismatch { features: usize, labels: usize },
    NonFinite { what: &'static str, row: usize, col: usize },
    NonBinaryLabel { row: usize, col: usize, value: f64 },
    EmptyPositiveSet { row: usize },
    EmptyNegativeSet { row: usize },
    SeenCountMismatch { label_columns: usize, seen_count: usize },
    EmbeddingRowMismatch { names: usize, rows: usize },
    NoSeenLabels,
    DuplicateLabel(String),
    NotNormalized { label: usize, norm: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoInstances => write!(f, "dataset has no instances"),
            Violation::RowCountMismatch { features, labels } => {
                write!(f, "row count mismatch: {features} feature rows, {labels} label rows")
            }
            Violation::NonFinite { what, row, col } => {
                write!(f, "non-finite {what} value at ({row}, {col})")
            }
            Violation::NonBinaryLabel { row, col, value } => {
                write!(f, "label entry ({row}, {col}) = {value} is not 0 or 1")
            }
            Violation::EmptyPositiveSet { row } => write!(f, "instance with empty positive set (row {row})"),
            Violation::EmptyNegativeSet { row } => write!(f, "instance with empty negative set (row {row})"),
            Violation::SeenCountMismatch { label_columns, seen_count } => write!(
                f,
                "seen count mismatch: labels have {label_columns} columns, label space declares {seen_count} seen"
            ),
            Violation::EmbeddingRowMismatch { names, rows } => {
                write!(f, "{names} label names but {rows} embedding rows")
            }
            Violation::NoSeenLabels => write!(f, "label space has no seen labels"),
            Violation::DuplicateLabel(name) => write!(f, "duplicate label name {name:?}"),
            Violation::NotNormalized { label, norm } => {
                write!(f, "embedding row {label} has norm {norm} after normalization")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    ZeroEmbedding { label: usize },
    ZeroFeatureRow { row: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ZeroEmbedding { label } => write!(f, "label {label} has an all-zero embedding"),
            Warning::ZeroFeatureRow { row } => write!(f, "instance {row} has an all-zero feature vector"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<Warning>> {
        if self.violations.is_empty() {
            Ok(self.warnings)
        } else {
            Err(Error::Validation(self.violations))
        }
    }
}

pub fn validate(dataset: &Dataset, labels: &LabelSpace) -> ValidationReport {
    let mut report = ValidationReport::default();
    let v = &mut report.violations;

    let (n, ls) = dataset.labels.dim();
    if dataset.features.nrows() == 0 && n == 0 {
        v.push(Violation::NoInstances);
    }
    if dataset.features.nrows() != n {
        v.push(Violation::RowCountMismatch {
            features: dataset.features.nrows(),
            labels: n,
        });
    }
    for ((row, col), &x) in dataset.features.indexed_iter() {
        if !x.is_finite() {
            v.push(Violation::NonFinite { what: "feature", row, col });
        }
    }
    for (row, y) in dataset.labels.outer_iter().enumerate() {
        let mut binary = true;
        for (col, &value) in y.iter().enumerate() {
            if value != 0.0 && value != 1.0 {
                v.push(Violation::NonBinaryLabel { row, col, value });
                binary = false;
            }
        }
        if binary {
            if !y.iter().any(|&x| x == 1.0) {
                v.push(Violation::EmptyPositiveSet { row });
            }
            if !y.iter().any(|&x| x == 0.0) {
                v.push(Violation::EmptyNegativeSet { row });
            }
        }
    }
    if labels.seen_count == 0 {
        v.push(Violation::NoSeenLabels);
    }
    if labels.seen_count != ls {
        v.push(Violation::SeenCountMismatch {
            label_columns: ls,
            seen_count: labels.seen_count,
        });
    }
    if labels.names.len() != labels.embeddings.nrows() {
        v.push(Violation::EmbeddingRowMismatch {
            names: labels.names.len(),
            rows: labels.embeddings.nrows(),
        });
    }
    let mut seen = HashSet::new();
    for name in &labels.names {
        if !seen.insert(name.as_str()) {
            v.push(Violation::DuplicateLabel(name.clone()));
        }
    }
    for ((row, col), &x) in labels.embeddings.indexed_iter() {
        if !x.is_finite() {
            v.push(Violation::NonFinite { what: "embedding", row, col });
        }
    }
    for (label, row) in labels.embeddings.outer_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            report.warnings.push(Warning::ZeroEmbedding { label });
        } else if labels.normalized && (norm - 1.0).abs() > 1e-9 {
            report.violations.push(Violation::NotNormalized { label, norm });
        }
    }
    for (row, x) in dataset.features.outer_iter().enumerate() {
        if x.iter().all(|&v| v == 0.0) {
            report.warnings.push(Warning::ZeroFeatureRow { row });
        }
    }
    report
}
