//! Dense data matrix container and the column-level primitives the rest of
//! the crate is built on: centering, covariance with divisor `n`, column
//! selection and column permutation.
//!
//! Storage is `nalgebra::DMatrix`, which is column-major, so extracting a
//! variable (a column) is a contiguous slice.

use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `n x p` observations-by-variables matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    col_labels: Option<Vec<String>>,
    centered: bool,
    means: Option<Vec<f64>>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>, col_labels: Option<Vec<String>>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 || p < 1 {
            return Err(Error::TooSmall {
                rows: n,
                cols: p,
                min: 2,
            });
        }
        for col in 0..p {
            for row in 0..n {
                if !values[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        if let Some(labels) = &col_labels {
            if labels.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: format!("{p} column labels"),
                    found: labels.len().to_string(),
                });
            }
        }
        Ok(Self {
            values,
            col_labels,
            centered: false,
            means: None,
        })
    }

    /// Build a matrix from row-major data.
    pub fn from_rows(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", n * p),
                found: data.len().to_string(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, p, data), None)
    }

    /// Wrap a matrix whose columns the caller declares to be mean zero.
    /// No check is made; use this for data centered elsewhere or for
    /// hand-built cases that should be analysed as-is.
    pub fn assume_centered(values: DMatrix<f64>) -> Result<Self> {
        let mut m = Self::new(values, None)?;
        m.centered = true;
        Ok(m)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} column labels", self.ncols()),
                found: labels.len().to_string(),
            });
        }
        self.col_labels = Some(labels);
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn col_labels(&self) -> Option<&[String]> {
        self.col_labels.as_deref()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Column means removed by [`center_columns`], if this matrix came from it.
    pub fn column_means(&self) -> Option<&[f64]> {
        self.means.as_deref()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.nrows();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    pub(crate) fn require_centered(&self) -> Result<()> {
        if self.centered {
            Ok(())
        } else {
            Err(Error::NotCentered)
        }
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn transpose(&self) -> Result<Self> {
        Self::new(self.values.transpose(), None)
    }
}

/// Sorted, duplicate-free set of 0-based column indices below `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnIndexSet(Vec<usize>);

impl ColumnIndexSet {
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidIndexSet(format!("duplicate index {}", w[0])));
        }
        if let Some(&last) = indices.last() {
            if last >= p {
                return Err(Error::IndexOutOfRange { index: last, p });
            }
        }
        Ok(Self(indices))
    }

    /// `{0, .., p-1}`.
    pub fn full(p: usize) -> Self {
        Self((0..p).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn min(&self) -> Option<usize> {
        self.0.first().copied()
    }
}

impl Deref for ColumnIndexSet {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// Sample covariance `S = XᵀX / n` of a centered data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    values: DMatrix<f64>,
    divisor: usize,
}

impl CovarianceMatrix {
    /// Wrap an explicit symmetric matrix (e.g. a population covariance).
    pub fn from_symmetric(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", values.nrows(), values.ncols()),
            });
        }
        let p = values.nrows();
        for i in 0..p {
            for j in 0..i {
                let (a, b) = (values[(i, j)], values[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::DimensionMismatch {
                        expected: "symmetric matrix".into(),
                        found: format!("asymmetry at ({i}, {j})"),
                    });
                }
            }
        }
        Ok(Self { values, divisor: 0 })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of observations used as the divisor (0 when built from an
    /// explicit matrix).
    pub fn divisor(&self) -> usize {
        self.divisor
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.values.trace()
    }
}

/// Column permutation. Position `j` of the permuted matrix holds column
/// `order[j]` of the original.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let len = order.len();
        let mut seen = vec![false; len];
        for &o in &order {
            if o >= len {
                return Err(Error::InvalidPermutation {
                    len,
                    reason: format!("{o} out of range"),
                });
            }
            if std::mem::replace(&mut seen[o], true) {
                return Err(Error::InvalidPermutation {
                    len,
                    reason: format!("{o} repeated"),
                });
            }
        }
        Ok(Self(order))
    }

    pub fn identity(len: usize) -> Self {
        Self((0..len).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &o)| i == o)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (pos, &o) in self.0.iter().enumerate() {
            inv[o] = pos;
        }
        Self(inv)
    }

    /// `self` applied after `first`: column `j` of the result is
    /// column `first[self[j]]` of the original.
    pub fn compose(&self, first: &Permutation) -> Result<Self> {
        if self.len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len().to_string(),
                found: self.len().to_string(),
            });
        }
        Ok(Self(self.0.iter().map(|&j| first.0[j]).collect()))
    }
}

/// Subtract column means. The means are kept on the result so scoring can
/// center new data identically.
pub fn center_columns(x: &DataMatrix) -> DataMatrix {
    let n = x.nrows();
    let mut values = x.values.clone();
    let mut means = Vec::with_capacity(x.ncols());
    for mut col in values.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= mean);
        means.push(mean);
    }
    DataMatrix {
        values,
        col_labels: x.col_labels.clone(),
        centered: true,
        means: Some(means),
    }
}

/// Center with externally supplied means (score-time centering).
pub fn center_with_means(x: &DataMatrix, means: &[f64]) -> Result<DataMatrix> {
    if means.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} column means", x.ncols()),
            found: means.len().to_string(),
        });
    }
    let mut values = x.values.clone();
    for (mut col, &mean) in values.column_iter_mut().zip(means) {
        col.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(DataMatrix {
        values,
        col_labels: x.col_labels.clone(),
        centered: true,
        means: Some(means.to_vec()),
    })
}

/// `S = XᵀX / n`. Only the upper triangle is computed; the lower is mirrored
/// so the result is exactly symmetric.
pub fn covariance(x: &DataMatrix) -> Result<CovarianceMatrix> {
    x.require_centered()?;
    let n = x.nrows();
    let p = x.ncols();
    let mut s = DMatrix::zeros(p, p);
    for j in 0..p {
        let cj = x.column(j);
        for i in 0..=j {
            let ci = x.column(i);
            let v = ci.iter().zip(cj).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(CovarianceMatrix {
        values: s,
        divisor: n,
    })
}

/// `s_j = (1/n) Σ_a X[a, j]²`, the diagonal of [`covariance`].
pub fn column_variances(x: &DataMatrix) -> Result<Vec<f64>> {
    x.require_centered()?;
    let n = x.nrows() as f64;
    Ok((0..x.ncols())
        .map(|j| x.column(j).iter().map(|v| v * v).sum::<f64>() / n)
        .collect())
}

/// Submatrix with the given columns in the given order.
pub fn select_columns(x: &DataMatrix, cols: &[usize]) -> Result<DataMatrix> {
    let p = x.ncols();
    if cols.is_empty() {
        return Err(Error::InvalidIndexSet("empty column selection".into()));
    }
    if let Some(&bad) = cols.iter().find(|&&c| c >= p) {
        return Err(Error::IndexOutOfRange { index: bad, p });
    }
    let values = x.values.select_columns(cols);
    let col_labels = x
        .col_labels
        .as_ref()
        .map(|l| cols.iter().map(|&c| l[c].clone()).collect());
    let means = x
        .means
        .as_ref()
        .map(|m| cols.iter().map(|&c| m[c]).collect());
    Ok(DataMatrix {
        values,
        col_labels,
        centered: x.centered,
        means,
    })
}

/// Reorder the columns of `m` so that column `j` of the result is column
/// `perm[j]` of `m`.
pub fn apply_permutation(m: &DMatrix<f64>, perm: &Permutation) -> Result<DMatrix<f64>> {
    if perm.len() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("permutation of length {}", m.ncols()),
            found: perm.len().to_string(),
        });
    }
    Ok(m.select_columns(perm.as_slice()))
}
