//! Inherently sparse PCA: one SVD per block of a partition, with the
//! block loadings zero-padded to full width and all components ranked
//! jointly by eigenvalue.
//!
//! Because loadings from different blocks have disjoint supports, they are
//! exactly orthogonal whatever the accuracy of the per-block solver.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::BlockPartition;
use crate::error::{Error, Result};
use crate::matrix::{center_with_means, select_columns, DataMatrix};
use crate::spectra::{estimate, SpectralEstimate, SvdMethod};

/// How many components to keep from each block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "k")]
pub enum KPolicy {
    /// Up to `k` per block (fewer when a block's rank is smaller).
    PerBlock(usize),
    /// The `k` largest eigenvalues across all blocks.
    GlobalTop(usize),
    /// Every component each block supports.
    FullRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub method: SvdMethod,
    pub policy: KPolicy,
    /// With `method = Cdm`, blocks with `p_i <= ratio·n` still use the exact
    /// SVD. A ratio of 0 sends every block to CDM.
    pub cdm_threshold_ratio: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            method: SvdMethod::Exact,
            policy: KPolicy::GlobalTop(2),
            cdm_threshold_ratio: 1.0,
        }
    }
}

impl FitOptions {
    pub fn new(method: SvdMethod, policy: KPolicy) -> Self {
        Self {
            method,
            policy,
            ..Default::default()
        }
    }

    /// The solver actually used on a block of `p_i` columns and `n` rows.
    pub fn block_method(&self, n: usize, p_i: usize) -> SvdMethod {
        match self.method {
            SvdMethod::Exact => SvdMethod::Exact,
            SvdMethod::Cdm if p_i as f64 > self.cdm_threshold_ratio * n as f64 => SvdMethod::Cdm,
            SvdMethod::Cdm => SvdMethod::Exact,
        }
    }
}

/// Largest rank the solver can deliver on an `n × p_i` block.
pub fn max_block_rank(method: SvdMethod, n: usize, p_i: usize) -> usize {
    match method {
        SvdMethod::Exact => n.min(p_i),
        SvdMethod::Cdm => (n / 2).min(p_i),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsPcaModel {
    /// `p × k`; column `j` is supported on block `component_block[j]`.
    pub loadings: DMatrix<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub component_block: Vec<usize>,
    pub partition: BlockPartition,
    pub svd_method: SvdMethod,
    /// Solver used on each block.
    pub block_methods: Vec<SvdMethod>,
    /// Training means, used to center data at score time.
    pub column_means: Vec<f64>,
    /// Trace of the training covariance.
    pub total_variance: f64,
}

struct Component {
    eigenvalue: f64,
    block: usize,
    index: usize,
}

/// Fit the model on centered `x` with a known partition.
pub fn fit(x: &DataMatrix, part: &BlockPartition, opts: &FitOptions) -> Result<IsPcaModel> {
    x.require_centered()?;
    let (n, p) = (x.nrows(), x.ncols());
    if part.p() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("partition of {p} columns"),
            found: part.p().to_string(),
        });
    }
    if !(opts.cdm_threshold_ratio >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "cdm threshold ratio {} must be >= 0",
            opts.cdm_threshold_ratio
        )));
    }
    let k_wanted = match opts.policy {
        KPolicy::PerBlock(k) | KPolicy::GlobalTop(k) => {
            if k == 0 {
                return Err(Error::RankOutOfRange { k, max: usize::MAX });
            }
            Some(k)
        }
        KPolicy::FullRank => None,
    };

    let per_block: Vec<(SvdMethod, SpectralEstimate)> = part
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(b, cols)| {
            let method = opts.block_method(n, cols.len());
            let max = max_block_rank(method, n, cols.len());
            let k = k_wanted.map_or(max, |k| k.min(max));
            let sub = select_columns(x, cols.as_slice())?;
            estimate(&sub, k, method)
                .map(|e| (method, e))
                .map_err(|e| Error::in_block(b, e))
        })
        .collect::<Result<_>>()?;

    let mut comps: Vec<Component> = per_block
        .iter()
        .enumerate()
        .flat_map(|(block, (_, e))| {
            e.eigenvalues
                .iter()
                .enumerate()
                .map(move |(index, &eigenvalue)| Component {
                    eigenvalue,
                    block,
                    index,
                })
        })
        .collect();
    comps.sort_by(|a, b| {
        b.eigenvalue
            .total_cmp(&a.eigenvalue)
            .then(a.block.cmp(&b.block))
            .then(a.index.cmp(&b.index))
    });
    if let KPolicy::GlobalTop(k) = opts.policy {
        if k > comps.len() {
            return Err(Error::RankOutOfRange {
                k,
                max: comps.len(),
            });
        }
        comps.truncate(k);
    }

    let mut loadings = DMatrix::zeros(p, comps.len());
    for (j, c) in comps.iter().enumerate() {
        let v = per_block[c.block].1.loadings.column(c.index);
        for (r, &row) in part.block(c.block).iter().enumerate() {
            loadings[(row, j)] = v[r];
        }
    }
    let column_means = x
        .column_means()
        .map_or_else(|| vec![0.0; p], <[f64]>::to_vec);
    Ok(IsPcaModel {
        loadings,
        eigenvalues: comps.iter().map(|c| c.eigenvalue).collect(),
        component_block: comps.iter().map(|c| c.block).collect(),
        partition: part.clone(),
        svd_method: opts.method,
        block_methods: per_block.iter().map(|(m, _)| *m).collect(),
        column_means,
        total_variance: x.frobenius_sq() / n as f64,
    })
}

impl IsPcaModel {
    pub fn num_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn p(&self) -> usize {
        self.loadings.nrows()
    }

    /// `eigenvalue_j / trace(S)` for each component.
    pub fn variance_shares(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|l| l / self.total_variance)
            .collect()
    }

    /// `max |ṼᵀṼ − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.loadings.tr_mul(&self.loadings);
        let k = g.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Largest `|v_iᵀv_j|` over distinct components of the same block, a
    /// diagnostic for CDM loadings, which need not be orthogonal.
    pub fn within_block_cross_product(&self) -> f64 {
        let k = self.num_components();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                if self.component_block[i] == self.component_block[j] {
                    let d = self.loadings.column(i).dot(&self.loadings.column(j));
                    worst = worst.max(d.abs());
                }
            }
        }
        worst
    }

    /// `Z = XṼ`. Uncentered input is centered with the training means;
    /// input already marked centered is used as given.
    pub fn scores(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        let p = self.p();
        if x.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: format!("{p} columns"),
                found: x.ncols().to_string(),
            });
        }
        let centered;
        let x = if x.is_centered() {
            x
        } else {
            centered = center_with_means(x, &self.column_means)?;
            &centered
        };
        let n = x.nrows();
        let mut z = DMatrix::zeros(n, self.num_components());
        for j in 0..self.num_components() {
            let v = self.loadings.column(j);
            for &c in self.partition.block(self.component_block[j]).iter() {
                let w = v[c];
                if w != 0.0 {
                    for (a, &xa) in x.column(c).iter().enumerate() {
                        z[(a, j)] += w * xa;
                    }
                }
            }
        }
        Ok(z)
    }

    /// `|corr(Ṽ[:, i], V[:, j])|` (Pearson, over the `p` coordinates) between
    /// each sparse loading and each dense one.
    pub fn loading_correlations(&self, dense: &SpectralEstimate) -> Result<DMatrix<f64>> {
        let p = self.p();
        if dense.loadings.nrows() != p {
            return Err(Error::DimensionMismatch {
                expected: format!("dense loadings with {p} rows"),
                found: dense.loadings.nrows().to_string(),
            });
        }
        let centered = |m: &DMatrix<f64>, offset: usize| -> Result<Vec<Vec<f64>>> {
            m.column_iter()
                .enumerate()
                .map(|(j, col)| {
                    let mean = col.mean();
                    let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
                    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if !(norm > 0.0) {
                        return Err(Error::ConstantLoading {
                            component: offset + j,
                        });
                    }
                    Ok(c.into_iter().map(|v| v / norm).collect())
                })
                .collect()
        };
        let a = centered(&self.loadings, 0)?;
        let b = centered(&dense.loadings, 0)?;
        Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
            a[i].iter()
                .zip(&b[j])
                .map(|(x, y)| x * y)
                .sum::<f64>()
                .abs()
                .min(1.0)
        }))
    }
}

/// Zero-pad per-block loadings into a `p × Σk_i` matrix, blocks in the given
/// order. Row `r` of a block's matrix lands on the block's `r`-th column
/// index (ascending).
pub fn assemble_loadings(p: usize, blocks: &[(&[usize], &DMatrix<f64>)]) -> Result<DMatrix<f64>> {
    let mut used = vec![false; p];
    let total: usize = blocks.iter().map(|(_, v)| v.ncols()).sum();
    let mut out = DMatrix::zeros(p, total);
    let mut col = 0;
    for (b, (rows, v)) in blocks.iter().enumerate() {
        if v.nrows() != rows.len() {
            return Err(Error::in_block(
                b,
                Error::DimensionMismatch {
                    expected: format!("{} loading rows", rows.len()),
                    found: v.nrows().to_string(),
                },
            ));
        }
        for &r in rows.iter() {
            if r >= p {
                return Err(Error::IndexOutOfRange { index: r, p });
            }
            if std::mem::replace(&mut used[r], true) {
                return Err(Error::Overlap { column: r });
            }
        }
        for j in 0..v.ncols() {
            if (v.column(j).norm() - 1.0).abs() > 1e-10 {
                return Err(Error::NotUnitNorm {
                    block: b,
                    column: j,
                });
            }
            for (i, &r) in rows.iter().enumerate() {
                out[(r, col)] = v[(i, j)];
            }
            col += 1;
        }
    }
    Ok(out)
}

/// Serialized model. Loadings are stored as `(row, component, value)`
/// triplets over each component's block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub format_version: u32,
    pub p: usize,
    pub blocks: Vec<Vec<usize>>,
    pub svd_method: SvdMethod,
    pub block_methods: Vec<SvdMethod>,
    pub eigenvalues: Vec<f64>,
    pub component_block: Vec<usize>,
    pub column_means: Vec<f64>,
    pub total_variance: f64,
    pub loadings: Vec<(usize, usize, f64)>,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

impl IsPcaModel {
    pub fn to_doc(&self) -> ModelDoc {
        let mut loadings = Vec::new();
        for (j, &b) in self.component_block.iter().enumerate() {
            for &r in self.partition.block(b).iter() {
                loadings.push((r, j, self.loadings[(r, j)]));
            }
        }
        ModelDoc {
            format_version: MODEL_FORMAT_VERSION,
            p: self.p(),
            blocks: self.partition.to_vecs(),
            svd_method: self.svd_method,
            block_methods: self.block_methods.clone(),
            eigenvalues: self.eigenvalues.clone(),
            component_block: self.component_block.clone(),
            column_means: self.column_means.clone(),
            total_variance: self.total_variance,
            loadings,
        }
    }

    pub fn from_doc(doc: ModelDoc) -> Result<Self> {
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        let partition = BlockPartition::new(doc.p, doc.blocks)?;
        let k = doc.eigenvalues.len();
        let mismatch = |what: &str, found: usize, want: usize| Error::DimensionMismatch {
            expected: format!("{want} {what}"),
            found: found.to_string(),
        };
        if doc.component_block.len() != k {
            return Err(mismatch("component blocks", doc.component_block.len(), k));
        }
        if doc.column_means.len() != doc.p {
            return Err(mismatch("column means", doc.column_means.len(), doc.p));
        }
        if doc.block_methods.len() != partition.num_blocks() {
            return Err(mismatch(
                "block methods",
                doc.block_methods.len(),
                partition.num_blocks(),
            ));
        }
        if let Some(&b) = doc
            .component_block
            .iter()
            .find(|&&b| b >= partition.num_blocks())
        {
            return Err(Error::InvalidConfig(format!(
                "component refers to missing block {b}"
            )));
        }
        let owner = partition.membership();
        let mut loadings = DMatrix::zeros(doc.p, k);
        for &(r, j, v) in &doc.loadings {
            if r >= doc.p || j >= k {
                return Err(Error::InvalidConfig(format!(
                    "loading entry ({r}, {j}) out of range"
                )));
            }
            if owner[r] != doc.component_block[j] {
                return Err(Error::InvalidConfig(format!(
                    "loading entry ({r}, {j}) outside its block"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { row: r, col: j });
            }
            loadings[(r, j)] = v;
        }
        Ok(Self {
            loadings,
            eigenvalues: doc.eigenvalues,
            component_block: doc.component_block,
            partition,
            svd_method: doc.svd_method,
            block_methods: doc.block_methods,
            column_means: doc.column_means,
            total_variance: doc.total_variance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::detect_oracle;
    use crate::matrix::{center_columns, covariance};
    use crate::oracle::jacobi_eigen;
    use crate::spectra::exact_svd;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, p, |_, j| {
            r.sample::<f64, _>(StandardNormal) * (1.0 + 0.3 * j as f64)
        });
        center_columns(&DataMatrix::new(m, None).unwrap())
    }

    #[test]
    fn single_block_equals_dense_svd() {
        let x = gaussian(20, 6, 1);
        let m = fit(
            &x,
            &BlockPartition::single(6),
            &FitOptions::new(SvdMethod::Exact, KPolicy::GlobalTop(3)),
        )
        .unwrap();
        let d = exact_svd(&x, 3).unwrap();
        assert_eq!(m.eigenvalues, d.eigenvalues);
        assert_eq!(m.loadings, d.loadings);
        assert_eq!(m.component_block, vec![0, 0, 0]);
    }

    #[test]
    fn block_eigenvalues_match_jacobi_per_block() {
        let x = gaussian(30, 7, 2);
        let part = detect_oracle(7, vec![vec![0, 3, 6], vec![1, 2], vec![4, 5]]).unwrap();
        let m = fit(
            &x,
            &part,
            &FitOptions::new(SvdMethod::Exact, KPolicy::FullRank),
        )
        .unwrap();
        assert_eq!(m.num_components(), 7);
        let mut want = Vec::new();
        for b in part.blocks() {
            let s = covariance(&select_columns(&x, b.as_slice()).unwrap()).unwrap();
            let rows: Vec<Vec<f64>> = s
                .values()
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect();
            want.extend(jacobi_eigen(&rows).0);
        }
        want.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in m.eigenvalues.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10 * want[0]);
        }
        assert!(m.orthonormality_error() < 1e-10);
        let trace: f64 = m.eigenvalues.iter().sum();
        assert!((trace - m.total_variance).abs() < 1e-9 * m.total_variance);
        for (j, &b) in m.component_block.iter().enumerate() {
            let owner = part.membership();
            for (r, &o) in owner.iter().enumerate() {
                if o != b {
                    assert_eq!(m.loadings[(r, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn policies() {
        let x = gaussian(10, 6, 3);
        let part = detect_oracle(6, vec![vec![0], vec![1, 2, 3, 4, 5]]).unwrap();
        let per = fit(
            &x,
            &part,
            &FitOptions::new(SvdMethod::Exact, KPolicy::PerBlock(2)),
        )
        .unwrap();
        assert_eq!(per.num_components(), 3);
        let top = fit(
            &x,
            &part,
            &FitOptions::new(SvdMethod::Exact, KPolicy::GlobalTop(4)),
        )
        .unwrap();
        assert_eq!(top.num_components(), 4);
        assert!(top.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let err = fit(
            &x,
            &part,
            &FitOptions::new(SvdMethod::Exact, KPolicy::GlobalTop(7)),
        );
        assert!(matches!(err, Err(Error::RankOutOfRange { k: 7, max: 6 })));
    }

    #[test]
    fn cdm_only_on_wide_blocks_unless_forced() {
        let x = gaussian(8, 14, 4);
        let part = detect_oracle(14, vec![(0..4).collect(), (4..14).collect()]).unwrap();
        let opts = FitOptions::new(SvdMethod::Cdm, KPolicy::PerBlock(1));
        let m = fit(&x, &part, &opts).unwrap();
        assert_eq!(m.block_methods, vec![SvdMethod::Exact, SvdMethod::Cdm]);
        let forced = fit(
            &x,
            &part,
            &FitOptions {
                cdm_threshold_ratio: 0.0,
                ..opts
            },
        )
        .unwrap();
        assert_eq!(forced.block_methods, vec![SvdMethod::Cdm, SvdMethod::Cdm]);
        assert_eq!(
            forced.loadings.column(0).dot(&forced.loadings.column(1)),
            0.0
        );
    }

    #[test]
    fn scores_use_training_means_and_block_columns_only() {
        let raw = DataMatrix::new(gaussian(12, 5, 8).values().map(|v| v + 3.0), None).unwrap();
        let x = center_columns(&raw);
        let part = detect_oracle(5, vec![vec![0, 1], vec![2, 3, 4]]).unwrap();
        let m = fit(
            &x,
            &part,
            &FitOptions::new(SvdMethod::Exact, KPolicy::FullRank),
        )
        .unwrap();
        let z_raw = m.scores(&raw).unwrap();
        let z = m.scores(&x).unwrap();
        assert!((z_raw - &z).amax() < 1e-12);
        for j in 0..m.num_components() {
            let var = z.column(j).norm_squared() / 12.0;
            assert!((var - m.eigenvalues[j]).abs() <= 1e-9 * m.eigenvalues[j]);
        }
        // zeroing block 1 leaves block-0 components untouched
        let mut v = x.values().clone();
        for c in [2, 3, 4] {
            v.column_mut(c).fill(0.0);
        }
        let z0 = m.scores(&DataMatrix::assume_centered(v).unwrap()).unwrap();
        for (j, &b) in m.component_block.iter().enumerate() {
            if b == 0 {
                assert_eq!(z0.column(j), z.column(j));
            }
        }
        assert!(m.scores(&gaussian(4, 3, 9)).is_err());
    }

    #[test]
    fn assemble_cases() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let one = DMatrix::from_element(1, 1, 1.0);
        let v = assemble_loadings(3, &[(&[0, 1], &i2), (&[2], &one)]).unwrap();
        assert_eq!(v, DMatrix::identity(3, 3));
        let v = assemble_loadings(3, &[(&[1], &one), (&[0, 2], &i2)]).unwrap();
        assert_eq!(v[(1, 0)], 1.0);
        assert_eq!(v[(0, 1)], 1.0);
        assert_eq!(v[(2, 2)], 1.0);
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 3);
        assert!(assemble_loadings(3, &[(&[0, 1], &one)]).is_err());
        assert!(assemble_loadings(2, &[(&[0], &one), (&[0], &one)]).is_err());
        let half = DMatrix::from_element(1, 1, 0.5);
        assert!(matches!(
            assemble_loadings(1, &[(&[0], &half)]),
            Err(Error::NotUnitNorm { .. })
        ));
    }

    #[test]
    fn loading_correlation_self_is_one() {
        let x = gaussian(25, 6, 5);
        let m = fit(
            &x,
            &BlockPartition::single(6),
            &FitOptions::new(SvdMethod::Exact, KPolicy::GlobalTop(2)),
        )
        .unwrap();
        let c = m.loading_correlations(&exact_svd(&x, 2).unwrap()).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-12 && (c[(1, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doc_round_trip_is_exact() {
        let x = gaussian(15, 6, 6);
        let part = detect_oracle(6, vec![vec![0, 5], vec![1, 2, 3, 4]]).unwrap();
        let m = fit(
            &x,
            &part,
            &FitOptions::new(SvdMethod::Exact, KPolicy::PerBlock(2)),
        )
        .unwrap();
        let json = serde_json::to_string(&m.to_doc()).unwrap();
        let back = IsPcaModel::from_doc(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m);
        let mut doc = m.to_doc();
        doc.loadings.push((0, 4, 1.0));
        assert!(IsPcaModel::from_doc(doc.clone()).is_err());
        doc.loadings.pop();
        let other = (0..4).find(|&j| doc.component_block[j] != 0).unwrap();
        doc.loadings.push((0, other, 1.0));
        assert!(IsPcaModel::from_doc(doc).is_err());
    }
}
