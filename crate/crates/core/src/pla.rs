//! Principal loading analysis: how much of the total variance each block of
//! a partition accounts for.
//!
//! For a block-diagonal covariance the eigenvalues of a block sum to the
//! trace of that block, so a block's share can be read off the column
//! variances alone ([`explained_variance_trace`]). The eigenvalue route
//! ([`explained_variance_eigen`]) is kept as a cross-check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::BlockPartition;
use crate::error::{Error, Result};
use crate::matrix::{column_variances, DataMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMethod {
    Trace,
    Eigen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockShare {
    /// Index of the block in the partition.
    pub block: usize,
    pub size: usize,
    pub variance: f64,
    pub share: f64,
    /// `p_i / p`, the share a block of this size would get if every column
    /// had the same variance.
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// Descending share; ties keep partition order.
    pub per_block: Vec<BlockShare>,
    pub total_variance: f64,
    pub method: VarianceMethod,
}

impl VarianceReport {
    fn from_sums(part: &BlockPartition, sums: Vec<f64>, method: VarianceMethod) -> Result<Self> {
        let total: f64 = sums.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroTotalVariance);
        }
        let p = part.p() as f64;
        let mut per_block: Vec<BlockShare> = sums
            .into_iter()
            .enumerate()
            .map(|(block, variance)| {
                let size = part.block(block).len();
                BlockShare {
                    block,
                    size,
                    variance,
                    share: variance / total,
                    baseline: size as f64 / p,
                }
            })
            .collect();
        per_block.sort_by(|a, b| b.share.total_cmp(&a.share).then(a.block.cmp(&b.block)));
        Ok(Self {
            per_block,
            total_variance: total,
            method,
        })
    }

    /// Share of a block by its partition index.
    pub fn share_of(&self, block: usize) -> Option<f64> {
        self.per_block
            .iter()
            .find(|b| b.block == block)
            .map(|b| b.share)
    }
}

fn check_width(x: &DataMatrix, part: &BlockPartition) -> Result<()> {
    if part.p() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("partition of {} columns", x.ncols()),
            found: part.p().to_string(),
        });
    }
    Ok(())
}

/// Block shares from column variances only; no covariance matrix is formed.
pub fn explained_variance_trace(x: &DataMatrix, part: &BlockPartition) -> Result<VarianceReport> {
    check_width(x, part)?;
    let var = column_variances(x)?;
    let sums = part
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&j| var[j]).sum())
        .collect();
    VarianceReport::from_sums(part, sums, VarianceMethod::Trace)
}

/// Block shares from the eigenvalues of each block's covariance. Uses the
/// smaller of the two Gram matrices of the block, which share their
/// nonzero eigenvalues.
pub fn explained_variance_eigen(x: &DataMatrix, part: &BlockPartition) -> Result<VarianceReport> {
    check_width(x, part)?;
    x.require_centered()?;
    let n = x.nrows() as f64;
    let sums = part
        .blocks()
        .par_iter()
        .map(|b| {
            let sub = x.values().select_columns(b.as_slice());
            let gram = if sub.ncols() <= sub.nrows() {
                sub.tr_mul(&sub)
            } else {
                &sub * sub.transpose()
            };
            let dim = gram.nrows();
            let eig =
                nalgebra::SymmetricEigen::try_new(gram, crate::spectra::SOLVER_TOL, 100 * dim)
                    .ok_or(Error::NonConvergence {
                        what: "block eigensolver",
                        iterations: 100 * dim,
                    })?;
            Ok(eig.eigenvalues.iter().sum::<f64>() / n)
        })
        .collect::<Result<Vec<f64>>>()?;
    VarianceReport::from_sums(part, sums, VarianceMethod::Eigen)
}

/// Blocks whose share is at least `min_share`, in descending-share order.
pub fn select_principal(report: &VarianceReport, min_share: f64) -> Vec<usize> {
    report
        .per_block
        .iter()
        .filter(|b| b.share >= min_share)
        .map(|b| b.block)
        .collect()
}
