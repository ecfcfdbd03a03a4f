use nalgebra::DMatrix;
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;

use super::{zero_variance_columns, BlockPartition};
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

const CHUNK: usize = 256;

/// `2·√(ln p / n)`, kept inside `(0, 1)`.
pub fn default_threshold(n: usize, p: usize) -> f64 {
    let t = 2.0 * ((p.max(2) as f64).ln() / n as f64).sqrt();
    t.clamp(1e-6, 0.999)
}

/// Connected components of the graph with an edge between columns whose
/// absolute sample correlation exceeds `threshold`. Zero-variance columns
/// become singleton blocks. Blocks are ordered by smallest member.
pub fn detect_threshold_graph(x: &DataMatrix, threshold: f64) -> Result<BlockPartition> {
    x.require_centered()?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold {threshold} not in (0, 1)"
        )));
    }
    let p = x.ncols();
    let n = x.nrows();
    let zero = zero_variance_columns(x);
    let live: Vec<usize> = (0..p).filter(|&j| !zero[j]).collect();

    // unit-norm columns, so inner products are correlations
    let mut z = DMatrix::zeros(n, live.len());
    for (k, &j) in live.iter().enumerate() {
        let col = x.column(j);
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, v) in col.iter().enumerate() {
            z[(a, k)] = v / norm;
        }
    }

    let m = live.len();
    let edges: Vec<(usize, usize)> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let start = c * CHUNK;
            let width = CHUNK.min(m - start);
            let block = z.columns(start, width);
            // correlations of this chunk against all later columns
            let rest = z.columns(start, m - start);
            let corr = block.tr_mul(&rest);
            let mut out = Vec::new();
            for i in 0..width {
                for j in (i + 1)..(m - start) {
                    if corr[(i, j)].abs() > threshold {
                        out.push((start + i, start + j));
                    }
                }
            }
            out
        })
        .collect();

    let mut uf = UnionFind::<usize>::new(m);
    for (a, b) in edges {
        uf.union(a, b);
    }
    let labels = uf.into_labeling();
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (k, &j) in live.iter().enumerate() {
        groups.entry(labels[k]).or_default().push(j);
    }
    let mut blocks: Vec<Vec<usize>> = groups.into_values().collect();
    blocks.extend((0..p).filter(|&j| zero[j]).map(|j| vec![j]));
    BlockPartition::canonical(p, blocks)
}
