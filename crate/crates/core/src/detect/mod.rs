//! Column partitions induced by a block-diagonal covariance, and the
//! detectors that estimate them from data.

mod pmd;
mod split;
mod threshold;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ColumnIndexSet, DataMatrix, Permutation};

pub use pmd::{l1_project, pmd_rank1, pmd_rank1_from, soft_threshold, PmdFit, PmdOptions};
pub use split::{detect_sparse_split, hbic_penalty, penalty_grid, DEFAULT_HBIC_SCALE};
pub use threshold::{default_threshold, detect_threshold_graph};

/// Disjoint cover of `0..p` by nonempty column sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    p: usize,
    blocks: Vec<ColumnIndexSet>,
    permutation: Permutation,
}

impl BlockPartition {
    /// Validate `blocks` as a disjoint cover of `0..p`. Block order is kept;
    /// the permutation lists block 0's columns first, then block 1's, etc.
    pub fn new(p: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut owner = vec![usize::MAX; p];
        let mut sets = Vec::with_capacity(blocks.len());
        for (b, cols) in blocks.into_iter().enumerate() {
            if cols.is_empty() {
                return Err(Error::EmptyBlock { block: b });
            }
            for &c in &cols {
                if c >= p {
                    return Err(Error::IndexOutOfRange { index: c, p });
                }
                if owner[c] != usize::MAX {
                    return Err(Error::Overlap { column: c });
                }
                owner[c] = b;
            }
            sets.push(ColumnIndexSet::new(cols, p)?);
        }
        if let Some(column) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::Gap { column });
        }
        let order = sets.iter().flat_map(|s| s.iter().copied()).collect();
        let permutation = Permutation::new(order)?;
        Ok(Self {
            p,
            blocks: sets,
            permutation,
        })
    }

    /// Like [`BlockPartition::new`], with blocks reordered by smallest member.
    pub fn canonical(p: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_by_key(|b| b.first().copied().unwrap_or(usize::MAX));
        Self::new(p, blocks)
    }

    pub fn single(p: usize) -> Self {
        Self::new(p, vec![(0..p).collect()]).expect("full range is a valid cover")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[ColumnIndexSet] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &ColumnIndexSet {
        &self.blocks[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn permutation(&self) -> &Permutation {
        &self.permutation
    }

    /// Block id of every column.
    pub fn membership(&self) -> Vec<usize> {
        let mut m = vec![0; self.p];
        for (b, set) in self.blocks.iter().enumerate() {
            for &c in set.iter() {
                m[c] = b;
            }
        }
        m
    }

    /// Same blocks regardless of listing order.
    pub fn same_blocks(&self, other: &BlockPartition) -> bool {
        let mut a: Vec<_> = self.blocks.iter().collect();
        let mut b: Vec<_> = other.blocks.iter().collect();
        a.sort();
        b.sort();
        self.p == other.p && a == b
    }

    pub fn to_vecs(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| b.to_vec()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Oracle,
    #[serde(alias = "threshold")]
    ThresholdGraph,
    SparseSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub strategy: Strategy,
    /// Absolute-correlation edge threshold; `None` uses
    /// [`default_threshold`].
    pub threshold: Option<f64>,
    /// Explicit ℓ1 bounds for the sparse rank-1 fits. `None` uses
    /// `grid_size` log-spaced values in `[1, √p]` for each column set.
    pub penalty_grid: Option<Vec<f64>>,
    pub grid_size: usize,
    pub hbic_scale: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::SparseSplit,
            threshold: None,
            penalty_grid: None,
            grid_size: 20,
            hbic_scale: DEFAULT_HBIC_SCALE,
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidConfig(format!("threshold {t} not in (0, 1)")));
            }
        }
        if let Some(grid) = &self.penalty_grid {
            if grid.is_empty() {
                return Err(Error::InvalidConfig("penalty grid is empty".into()));
            }
            if grid.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
                return Err(Error::InvalidConfig(
                    "penalty grid values must be positive".into(),
                ));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(
                    "penalty grid must be ascending".into(),
                ));
            }
        } else if self.grid_size == 0 {
            return Err(Error::InvalidConfig("penalty grid is empty".into()));
        }
        if !(self.hbic_scale > 0.0) || !self.hbic_scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "hbic_scale {} must be positive",
                self.hbic_scale
            )));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(
                "max_iter and tol must be positive".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn pmd_options(&self) -> PmdOptions {
        PmdOptions {
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

/// Wrap a known partition.
pub fn detect_oracle(p: usize, blocks: Vec<Vec<usize>>) -> Result<BlockPartition> {
    BlockPartition::new(p, blocks)
}

/// Merge blocks `2i` and `2i+1` for every `i`, halving the block count.
pub fn merge_pairs(part: &BlockPartition) -> Result<BlockPartition> {
    let b = part.num_blocks();
    if !b.is_multiple_of(2) {
        return Err(Error::OddBlockCount(b));
    }
    let merged = part
        .blocks()
        .chunks(2)
        .map(|pair| {
            let mut cols: Vec<usize> = pair.iter().flat_map(|s| s.iter().copied()).collect();
            cols.sort_unstable();
            cols
        })
        .collect();
    BlockPartition::new(part.p(), merged)
}

/// Run the configured data-driven detector.
pub fn detect(x: &DataMatrix, cfg: &DetectorConfig) -> Result<BlockPartition> {
    cfg.validate()?;
    match cfg.strategy {
        Strategy::Oracle => Err(Error::InvalidConfig(
            "oracle strategy needs an explicit partition (blocks file)".into(),
        )),
        Strategy::ThresholdGraph => {
            let t = cfg
                .threshold
                .unwrap_or_else(|| default_threshold(x.nrows(), x.ncols()));
            detect_threshold_graph(x, t)
        }
        Strategy::SparseSplit => detect_sparse_split(x, cfg),
    }
}

/// Columns with zero sample variance (up to centering roundoff); they form
/// singleton blocks.
pub(crate) fn zero_variance_columns(x: &DataMatrix) -> Vec<bool> {
    let norms: Vec<f64> = (0..x.ncols())
        .map(|j| x.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    let root_n = (x.nrows() as f64).sqrt();
    norms
        .iter()
        .enumerate()
        .map(|(j, &nj)| {
            let mean = x.column_means().map_or(0.0, |m| m[j].abs());
            nj == 0.0 || nj <= 1e-12 * max || nj <= 1e-12 * root_n * mean
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_partitions() {
        let part = detect_oracle(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(part.num_blocks(), 2);
        assert!(part.permutation().is_identity());

        let part = detect_oracle(3, vec![vec![1], vec![0, 2]]).unwrap();
        assert_eq!(part.permutation().as_slice(), &[1, 0, 2]);
        assert_eq!(part.membership(), vec![1, 0, 1]);

        assert!(matches!(
            detect_oracle(2, vec![vec![0], vec![0, 1]]),
            Err(Error::Overlap { column: 0 })
        ));
        assert!(matches!(
            detect_oracle(3, vec![vec![0, 1]]),
            Err(Error::Gap { column: 2 })
        ));
        assert!(matches!(
            detect_oracle(3, vec![vec![0, 1, 2], vec![]]),
            Err(Error::EmptyBlock { .. })
        ));
        assert!(matches!(
            detect_oracle(2, vec![vec![0, 2]]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn merging_pairs() {
        let part = detect_oracle(8, (0..4).map(|b| vec![2 * b, 2 * b + 1]).collect()).unwrap();
        let merged = merge_pairs(&part).unwrap();
        assert_eq!(merged.sizes(), vec![4, 4]);
        for (i, block) in merged.blocks().iter().enumerate() {
            let mut orig: Vec<usize> = part
                .block(2 * i)
                .iter()
                .chain(part.block(2 * i + 1).iter())
                .copied()
                .collect();
            orig.sort_unstable();
            assert_eq!(block.as_slice(), &orig[..]);
        }
        let whole = merge_pairs(&merged).unwrap();
        assert_eq!(whole.num_blocks(), 1);
        assert!(matches!(merge_pairs(&whole), Err(Error::OddBlockCount(1))));
    }

    #[test]
    fn canonical_order_and_comparison() {
        let a = BlockPartition::canonical(4, vec![vec![3, 2], vec![1, 0]]).unwrap();
        assert_eq!(a.to_vecs(), vec![vec![0, 1], vec![2, 3]]);
        let b = BlockPartition::new(4, vec![vec![2, 3], vec![0, 1]]).unwrap();
        assert!(a.same_blocks(&b));
        assert_ne!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let bad = DetectorConfig {
            threshold: Some(1.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorConfig {
            penalty_grid: Some(vec![2.0, 1.0]),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorConfig {
            penalty_grid: Some(vec![]),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let cfg: DetectorConfig =
            serde_json::from_str(r#"{"strategy": "threshold-graph", "threshold": 0.3}"#).unwrap();
        assert_eq!(cfg.strategy, Strategy::ThresholdGraph);
        assert_eq!(cfg.threshold, Some(0.3));
        assert_eq!(cfg.grid_size, 20);
    }
}
