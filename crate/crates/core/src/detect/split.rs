//! Recursive block detection from sparse rank-1 approximations.
//!
//! On the current `n × p` column set, candidate supports come from sparse
//! leading right singular vectors (one PMD fit per ℓ1 bound in the grid,
//! plus the soft-threshold path of the dense solution). Each support `S` is
//! scored by
//! `HBIC(S) = np·ln(RSS(S)/(np)) + |S|·a_np`, with
//! `RSS(S) = ‖X‖²_F − σ₁(X_S)²` (the residual of the best unit vector on `S`)
//! and `a_np = scale·ln(ln n)·ln p`.
//! If the winning support is a strict subset of the columns, the set is
//! split into support and complement and both halves are processed again.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::pmd::pmd_rank1_from;
use super::{zero_variance_columns, BlockPartition, DetectorConfig};
use crate::error::{Error, Result};
use crate::matrix::{select_columns, DataMatrix};
use crate::spectra::exact_svd;

pub const DEFAULT_HBIC_SCALE: f64 = 6.0;

/// `scale·ln(ln n)·ln p`, floored at zero for tiny `n`.
pub fn hbic_penalty(scale: f64, n: usize, p: usize) -> f64 {
    let lnln = (n as f64).ln().ln();
    (scale * lnln * (p as f64).ln()).max(0.0)
}

/// The ℓ1 bounds to try on a set of `p` columns: the configured grid
/// clipped to `[1, √p]`, or `grid_size` log-spaced values over that range.
pub fn penalty_grid(cfg: &DetectorConfig, p: usize) -> Vec<f64> {
    let cmax = (p as f64).sqrt();
    let mut grid: Vec<f64> = match &cfg.penalty_grid {
        Some(g) => g.iter().map(|&c| c.clamp(1.0, cmax)).collect(),
        None => {
            let m = cfg.grid_size;
            if m == 1 {
                vec![cmax]
            } else {
                (0..m)
                    .map(|i| cmax.powf(i as f64 / (m - 1) as f64))
                    .collect()
            }
        }
    };
    grid.dedup();
    grid
}

struct Candidate {
    hbic: f64,
    nnz: usize,
    index: usize,
    support: Vec<usize>,
}

/// The HBIC-minimal candidate support. Candidates are indexed grid first,
/// then path; a support found more than once keeps its first index.
///
/// Since `σ₁(X_S) ≤ σ₁(X)`, a support of size `k` scores at least
/// `np·ln((‖X‖² − σ₁(X)²)/(np)) + k·a_np`, which grows with `k`. The path is
/// walked in order of size until that bound passes the best score so far.
/// Grid bounds `c` with `c²` above the largest size that can still win are
/// skipped; a binding ℓ1 bound `c` forces at least `c²` nonzeros.
fn best_candidate(x: &DataMatrix, cfg: &DetectorConfig) -> Result<Candidate> {
    let (n, p) = (x.nrows(), x.ncols());
    let grid = penalty_grid(cfg, p);
    if grid.is_empty() {
        return Err(Error::InvalidConfig("penalty grid is empty".into()));
    }
    let dense = exact_svd(x, 1)?;
    let start = dense.loadings.column(0).clone_owned();
    let total = x.frobenius_sq();
    let a_np = hbic_penalty(cfg.hbic_scale, n, p);
    let floor_rss = total - dense.eigenvalues[0] * n as f64 * (1.0 + 1e-9);
    let bound = |nnz: f64| hbic(floor_rss, n, p, 0, a_np) + nnz * a_np;

    // path supports, scored incrementally until the bound cuts them off
    let (order, sizes) = path_order(start.as_slice());
    let mut scored: HashMap<Vec<usize>, Candidate> = HashMap::new();
    let mut best_hbic = f64::INFINITY;
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut added = 0;
    for (pos, &k) in sizes.iter().enumerate() {
        if bound(k as f64) > best_hbic {
            break;
        }
        let sigma_sq = if k < n {
            top_singular_value_sq(x, &order[..k])
        } else {
            for &j in &order[added..k] {
                let col = x.values().column(j);
                gram.ger(1.0, &col, &col, 1.0);
            }
            added = k;
            gram.symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(0.0, f64::max)
        };
        let mut support = order[..k].to_vec();
        support.sort_unstable();
        let c = Candidate {
            hbic: hbic(total - sigma_sq, n, p, k, a_np),
            nnz: k,
            index: grid.len() + pos,
            support,
        };
        best_hbic = best_hbic.min(c.hbic);
        scored.insert(c.support.clone(), c);
    }
    // grid fits that can still win
    let opts = cfg.pmd_options();
    let live: Vec<(usize, f64)> = grid
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, c)| bound((c * c).floor()) <= best_hbic)
        .collect();
    let fits: Vec<(usize, Vec<usize>)> = live
        .par_iter()
        .map(|&(i, c)| Ok((i, pmd_rank1_from(x, c, start.as_slice(), &opts)?.support())))
        .collect::<Result<_>>()?;
    let mut fresh: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, support) in fits {
        if support.is_empty() {
            continue;
        }
        match scored.get_mut(&support) {
            Some(c) => c.index = c.index.min(i),
            None if !fresh.iter().any(|(_, s)| *s == support) => fresh.push((i, support)),
            None => {}
        }
    }
    let fresh: Vec<Candidate> = fresh
        .into_par_iter()
        .filter(|(_, s)| bound(s.len() as f64) <= best_hbic)
        .map(|(index, support)| {
            let rss = total - top_singular_value_sq(x, &support);
            Candidate {
                hbic: hbic(rss, n, p, support.len(), a_np),
                nnz: support.len(),
                index,
                support,
            }
        })
        .collect();

    Ok(scored
        .into_values()
        .chain(fresh)
        .min_by(|a, b| {
            a.hbic
                .total_cmp(&b.hbic)
                .then(a.nnz.cmp(&b.nnz))
                .then(a.index.cmp(&b.index))
        })
        .expect("the path holds at least one support"))
}

/// `np·ln(RSS/(np)) + nnz·a_np` for an `n × p` set.
fn hbic(rss: f64, n: usize, p: usize, nnz: usize, a_np: f64) -> f64 {
    let entries = (n * p) as f64;
    entries * (rss.max(f64::MIN_POSITIVE) / entries).ln() + nnz as f64 * a_np
}

/// Supports of the soft-thresholds of `v` at every breakpoint, i.e. the
/// `k` largest-magnitude entries for each `k`. These are the supports of
/// single PMD updates from the dense solution; the fixed grid alone can
/// step over the narrow range of bounds that isolates a block with nearly
/// equal loadings.
///
/// Returns the nonzero entries by decreasing magnitude and the prefix
/// lengths that do not split a tie.
fn path_order(v: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..v.len()).filter(|&j| v[j] != 0.0).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    let sizes = (1..=order.len())
        .filter(|&k| k == order.len() || v[order[k - 1]].abs() != v[order[k]].abs())
        .collect();
    (order, sizes)
}

#[cfg(test)]
fn threshold_path(v: &[f64]) -> Vec<Vec<usize>> {
    let (order, sizes) = path_order(v);
    sizes
        .into_iter()
        .map(|k| {
            let mut s = order[..k].to_vec();
            s.sort_unstable();
            s
        })
        .collect()
}

/// `σ₁(X_S)²`, the largest `‖Xv‖²` over unit `v` supported on `S`.
fn top_singular_value_sq(x: &DataMatrix, support: &[usize]) -> f64 {
    let sub = x.values().select_columns(support);
    let gram = if sub.ncols() <= sub.nrows() {
        sub.tr_mul(&sub)
    } else {
        &sub * sub.transpose()
    };
    gram.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

fn split_recursive(
    x: &DataMatrix,
    cols: Vec<usize>,
    cfg: &DetectorConfig,
    out: &mut Vec<Vec<usize>>,
) -> Result<()> {
    let mut stack = vec![cols];
    while let Some(cols) = stack.pop() {
        if cols.len() == 1 {
            out.push(cols);
            continue;
        }
        let sub = select_columns(x, &cols)?;
        let best = best_candidate(&sub, cfg)?;
        if best.nnz == 0 || best.nnz == cols.len() {
            out.push(cols);
            continue;
        }
        let mut in_support = vec![false; cols.len()];
        for &i in &best.support {
            in_support[i] = true;
        }
        let (inside, outside): (Vec<_>, Vec<_>) =
            cols.iter().enumerate().partition(|(i, _)| in_support[*i]);
        stack.push(outside.into_iter().map(|(_, &c)| c).collect());
        stack.push(inside.into_iter().map(|(_, &c)| c).collect());
    }
    Ok(())
}

/// Recursive sparse-split detector. Zero-variance columns are set aside as
/// singletons first. Blocks are ordered by smallest member.
pub fn detect_sparse_split(x: &DataMatrix, cfg: &DetectorConfig) -> Result<BlockPartition> {
    x.require_centered()?;
    cfg.validate()?;
    let p = x.ncols();
    let zero = zero_variance_columns(x);
    let mut blocks: Vec<Vec<usize>> = (0..p).filter(|&j| zero[j]).map(|j| vec![j]).collect();
    let live: Vec<usize> = (0..p).filter(|&j| !zero[j]).collect();
    if !live.is_empty() {
        split_recursive(x, live, cfg, &mut blocks)?;
    }
    BlockPartition::canonical(p, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::detect_threshold_graph;
    use crate::matrix::center_columns;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    /// Independent compound-symmetric blocks with spike weight `omega`.
    pub(super) fn block_data(n: usize, sizes: &[usize], omega: f64, seed: u64) -> DataMatrix {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p: usize = sizes.iter().sum();
        let mut m = DMatrix::zeros(n, p);
        for a in 0..n {
            let mut col = 0;
            for &s in sizes {
                let w: f64 = r.sample(StandardNormal);
                for _ in 0..s {
                    let z: f64 = r.sample(StandardNormal);
                    m[(a, col)] = (1.0 - omega).sqrt() * z + (2.0 * omega).sqrt() * w;
                    col += 1;
                }
            }
        }
        center_columns(&DataMatrix::new(m, None).unwrap())
    }

    #[test]
    fn grid_shape() {
        let cfg = DetectorConfig::default();
        let g = penalty_grid(&cfg, 16);
        assert_eq!(g.len(), 20);
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!((g[19] - 4.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let cfg = DetectorConfig {
            penalty_grid: Some(vec![0.5, 2.0, 9.0]),
            ..Default::default()
        };
        assert_eq!(penalty_grid(&cfg, 16), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn single_column_is_a_singleton() {
        let x = block_data(20, &[1], 0.3, 1);
        let part = detect_sparse_split(&x, &DetectorConfig::default()).unwrap();
        assert_eq!(part.to_vecs(), vec![vec![0]]);
    }

    #[test]
    fn strong_single_block_is_not_split() {
        let x = block_data(100, &[20], 0.4, 2);
        let part = detect_sparse_split(&x, &DetectorConfig::default()).unwrap();
        assert_eq!(part.num_blocks(), 1);
    }

    #[test]
    fn two_blocks_match_threshold_graph() {
        let mut agree = 0;
        for rep in 0..100 {
            let x = block_data(100, &[25, 25], 0.4, 100 + rep);
            let split = detect_sparse_split(&x, &DetectorConfig::default()).unwrap();
            let graph = detect_threshold_graph(&x, 0.4).unwrap();
            if split.same_blocks(&graph) {
                agree += 1;
            }
        }
        assert!(agree >= 90, "agreement {agree}/100");
    }

    #[test]
    fn path_lists_each_support_size_once() {
        let v = [0.1, -0.5, 0.0, 0.5, 0.3];
        let path = threshold_path(&v);
        assert_eq!(path, vec![vec![1, 3], vec![1, 3, 4], vec![0, 1, 3, 4]]);
    }

    #[test]
    fn refit_matches_dense_svd() {
        let x = block_data(30, &[4, 3], 0.3, 5);
        let all: Vec<usize> = (0..7).collect();
        let s1 = exact_svd(&x, 1).unwrap().eigenvalues[0] * 30.0;
        assert!((top_singular_value_sq(&x, &all) - s1).abs() < 1e-9 * s1);
        let one = top_singular_value_sq(&x, &[2]);
        let norm: f64 = x.column(2).iter().map(|a| a * a).sum();
        assert!((one - norm).abs() < 1e-9 * norm);
    }

    #[test]
    fn empty_grid_rejected() {
        let x = block_data(20, &[3], 0.3, 3);
        let cfg = DetectorConfig {
            penalty_grid: Some(vec![]),
            ..Default::default()
        };
        assert!(detect_sparse_split(&x, &cfg).is_err());
    }
}
