//! Monte-Carlo comparison on block compound-symmetric Gaussian data.
//!
//! Block `i` has covariance `Σ_i = (1−ω_i)I + 2ω_i·11ᵀ` with `ω_i` drawn
//! uniformly per replicate. Five estimators of each block's leading
//! eigenpair are compared against the analytic truth by absolute cosine
//! similarity and eigenvalue ratio.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    detect_oracle, detect_sparse_split, merge_pairs, pmd_rank1_from, BlockPartition, DetectorConfig,
};
use crate::error::{Error, Result};
use crate::matrix::{center_columns, DataMatrix};
use crate::model::{fit, FitOptions, KPolicy};
use crate::spectra::{cdm_svd, cosine_similarity, eigenvalue_ratio, exact_svd, SvdMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    /// CDM on the full matrix.
    Cdm,
    /// Per-block CDM with the true partition.
    OracleIsPca,
    /// Per-block CDM with adjacent true blocks merged in pairs.
    FalseNegIsPca,
    /// Per-block CDM on the sparse-split partition; leading component only.
    PmdIsPca,
    /// Rank-1 PMD on the full matrix with `‖v‖₁ ≤ pmd_sumabs·√p`.
    Pmd,
}

impl Approach {
    pub const ALL: [Approach; 5] = [
        Approach::Cdm,
        Approach::OracleIsPca,
        Approach::FalseNegIsPca,
        Approach::PmdIsPca,
        Approach::Pmd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Approach::Cdm => "cdm",
            Approach::OracleIsPca => "oracle-is-pca",
            Approach::FalseNegIsPca => "false-neg-is-pca",
            Approach::PmdIsPca => "pmd-is-pca",
            Approach::Pmd => "pmd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// n = 50, p = 500, b = 10, 20 replicates.
    Desk,
    /// n = 100, p = 10000, b = 10, 100 replicates.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub b: usize,
    pub omega_range: (f64, f64),
    pub replicates: usize,
    pub seed: u64,
    pub approaches: Vec<Approach>,
    pub profile: Option<Profile>,
    /// ℓ1 bound of the PMD arm as a fraction of `√p`.
    pub pmd_sumabs: f64,
    /// Settings for the sparse-split detector and the PMD solver.
    pub detector: DetectorConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::profile(Profile::Desk)
    }
}

impl SimConfig {
    pub fn profile(profile: Profile) -> Self {
        let (n, p, replicates) = match profile {
            Profile::Desk => (50, 500, 20),
            Profile::Full => (100, 10_000, 100),
        };
        Self {
            n,
            p,
            b: 10,
            omega_range: (0.1, 0.3),
            replicates,
            seed: 1,
            approaches: Approach::ALL.to_vec(),
            profile: Some(profile),
            pmd_sumabs: 0.4,
            detector: DetectorConfig::default(),
        }
    }

    pub fn block_size(&self) -> usize {
        self.p / self.b
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.b == 0 || self.p == 0 || !self.p.is_multiple_of(self.b) {
            return bad(format!(
                "p = {} must be a positive multiple of b = {}",
                self.p, self.b
            ));
        }
        let (lo, hi) = self.omega_range;
        if !(0.0 < lo && lo < hi && hi < 0.5) {
            return bad(format!(
                "omega range ({lo}, {hi}) must satisfy 0 < lo < hi < 0.5"
            ));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.n < 4 {
            return bad(format!(
                "n = {} too small for the cross data matrix split",
                self.n
            ));
        }
        if !(self.pmd_sumabs > 0.0 && self.pmd_sumabs <= 1.0) {
            return bad(format!(
                "pmd_sumabs = {} must lie in (0, 1]",
                self.pmd_sumabs
            ));
        }
        if self.approaches.is_empty() {
            return bad("no approaches selected".into());
        }
        self.detector.validate()
    }
}

/// Spectrum of `(1−ω)I + 2ω·11ᵀ` of size `p_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTruth {
    /// Descending: `(1−ω) + 2ω·p_i`, then `p_i − 1` copies of `1−ω`.
    pub eigenvalues: Vec<f64>,
    /// `1/√p_i` in every entry.
    pub leading_vector: Vec<f64>,
}

pub fn population_truth(p_i: usize, omega: f64) -> Result<PopulationTruth> {
    if p_i == 0 {
        return Err(Error::InvalidConfig("block size must be at least 1".into()));
    }
    let mut eigenvalues = vec![1.0 - omega; p_i];
    eigenvalues[0] = (1.0 - omega) + 2.0 * omega * p_i as f64;
    let leading_vector = vec![1.0 / (p_i as f64).sqrt(); p_i];
    Ok(PopulationTruth {
        eigenvalues,
        leading_vector,
    })
}

/// Per-block ground truth of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTruth {
    pub omega: f64,
    pub columns: Vec<usize>,
    pub eigenvalue: f64,
}

impl BlockTruth {
    /// The leading population eigenvector embedded in `p` coordinates.
    pub fn embedded(&self, p: usize) -> Vec<f64> {
        let mut v = vec![0.0; p];
        let w = 1.0 / (self.columns.len() as f64).sqrt();
        for &c in &self.columns {
            v[c] = w;
        }
        v
    }
}

/// The random stream for `(seed, rep, block)`: one ChaCha key per seed,
/// with the stream id encoding the replicate and block, so draws do not
/// depend on the order in which replicates run.
pub fn block_rng(seed: u64, rep: usize, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((rep as u64) << 24) | block as u64);
    rng
}

/// Draw `n` rows of `√(1−ω)·z + √(2ω)·w·1` into columns `offset..offset+p_i`.
pub fn fill_block<R: Rng>(
    m: &mut DMatrix<f64>,
    offset: usize,
    p_i: usize,
    omega: f64,
    rng: &mut R,
) {
    let (a, b) = ((1.0 - omega).sqrt(), (2.0 * omega).sqrt());
    for row in 0..m.nrows() {
        let w: f64 = rng.sample(StandardNormal);
        for j in 0..p_i {
            let z: f64 = rng.sample(StandardNormal);
            m[(row, offset + j)] = a * z + b * w;
        }
    }
}

/// One centered replicate and the truth for each block. Blocks are
/// contiguous column ranges.
pub fn sample_block_gaussian(cfg: &SimConfig, rep: usize) -> Result<(DataMatrix, Vec<BlockTruth>)> {
    cfg.validate()?;
    let p_i = cfg.block_size();
    let mut m = DMatrix::zeros(cfg.n, cfg.p);
    let mut truths = Vec::with_capacity(cfg.b);
    for block in 0..cfg.b {
        let mut rng = block_rng(cfg.seed, rep, block);
        let omega = rng.random_range(cfg.omega_range.0..cfg.omega_range.1);
        fill_block(&mut m, block * p_i, p_i, omega, &mut rng);
        truths.push(BlockTruth {
            omega,
            columns: (block * p_i..(block + 1) * p_i).collect(),
            eigenvalue: population_truth(p_i, omega)?.eigenvalues[0],
        });
    }
    Ok((center_columns(&DataMatrix::new(m, None)?), truths))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub replicate: usize,
    pub approach: Approach,
    pub block: usize,
    pub omega: f64,
    pub cosine: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFailure {
    pub replicate: usize,
    pub approach: Approach,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    /// Sample statistics; `sd` uses divisor `count − 1` and quartiles use
    /// linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let count = v.len();
        let mean = v.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        let q = |f: f64| {
            let h = f * (count - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(count - 1);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            count,
            mean,
            sd,
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[count - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachSummary {
    pub approach: Approach,
    pub cosine: Option<Summary>,
    pub ratio: Option<Summary>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    /// Ordered by replicate, then approach, then block.
    pub records: Vec<SimRecord>,
    pub failures: Vec<SimFailure>,
    pub summary: Vec<ApproachSummary>,
}

impl SimResult {
    pub fn summary_for(&self, approach: Approach) -> Option<&ApproachSummary> {
        self.summary.iter().find(|s| s.approach == approach)
    }

    pub fn mean_cosine(&self, approach: Approach) -> Option<f64> {
        self.summary_for(approach)?.cosine.as_ref().map(|s| s.mean)
    }

    pub fn mean_ratio(&self, approach: Approach) -> Option<f64> {
        self.summary_for(approach)?.ratio.as_ref().map(|s| s.mean)
    }
}

/// Greedy one-to-one matching on a score matrix (rows × columns): take the
/// largest remaining entry, retire its row and column, repeat. Ties go to
/// the smallest (row, column).
pub fn greedy_match(scores: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let (r, c) = scores.shape();
    let mut pairs: Vec<(usize, usize)> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
    pairs.sort_by(|&(a, b), &(x, y)| {
        scores[(x, y)]
            .total_cmp(&scores[(a, b)])
            .then((a, b).cmp(&(x, y)))
    });
    let (mut used_r, mut used_c) = (vec![false; r], vec![false; c]);
    let mut out = Vec::new();
    for (i, j) in pairs {
        if !used_r[i] && !used_c[j] {
            used_r[i] = true;
            used_c[j] = true;
            out.push((i, j));
        }
    }
    out
}

struct Estimate {
    vector: Vec<f64>,
    eigenvalue: f64,
}

fn record(
    rep: usize,
    approach: Approach,
    block: usize,
    truth: &[BlockTruth],
    est: &Estimate,
    p: usize,
) -> Result<SimRecord> {
    let t = &truth[block];
    Ok(SimRecord {
        replicate: rep,
        approach,
        block,
        omega: t.omega,
        cosine: cosine_similarity(&t.embedded(p), &est.vector)?,
        ratio: eigenvalue_ratio(est.eigenvalue, t.eigenvalue)?,
    })
}

/// Match estimates to a set of candidate blocks greedily by cosine and
/// record one row per matched pair, ordered by block.
fn matched_records(
    rep: usize,
    approach: Approach,
    ests: &[Estimate],
    blocks: &[usize],
    truth: &[BlockTruth],
    p: usize,
) -> Result<Vec<SimRecord>> {
    let embedded: Vec<Vec<f64>> = blocks.iter().map(|&b| truth[b].embedded(p)).collect();
    let mut cos = DMatrix::zeros(ests.len(), blocks.len());
    for (i, e) in ests.iter().enumerate() {
        for (j, t) in embedded.iter().enumerate() {
            cos[(i, j)] = cosine_similarity(t, &e.vector)?;
        }
    }
    let mut pairs = greedy_match(&cos);
    pairs.sort_by_key(|&(_, j)| blocks[j]);
    pairs
        .into_iter()
        .map(|(i, j)| record(rep, approach, blocks[j], truth, &ests[i], p))
        .collect()
}

fn model_estimates(
    x: &DataMatrix,
    part: &BlockPartition,
    k_per_block: usize,
) -> Result<(Vec<Estimate>, Vec<usize>)> {
    let opts = FitOptions {
        method: SvdMethod::Cdm,
        policy: KPolicy::PerBlock(k_per_block),
        cdm_threshold_ratio: 0.0,
    };
    let m = fit(x, part, &opts)?;
    let ests = (0..m.num_components())
        .map(|j| Estimate {
            vector: m.loadings.column(j).iter().copied().collect(),
            eigenvalue: m.eigenvalues[j],
        })
        .collect();
    Ok((ests, m.component_block))
}

fn run_arm(
    cfg: &SimConfig,
    approach: Approach,
    rep: usize,
    x: &DataMatrix,
    truth: &[BlockTruth],
) -> Result<Vec<SimRecord>> {
    let p = cfg.p;
    let all: Vec<usize> = (0..cfg.b).collect();
    let oracle = || detect_oracle(p, truth.iter().map(|t| t.columns.clone()).collect());
    match approach {
        Approach::Cdm => {
            let est = cdm_svd(x, cfg.b)?;
            let ests: Vec<Estimate> = (0..cfg.b)
                .map(|j| Estimate {
                    vector: est.loadings.column(j).iter().copied().collect(),
                    eigenvalue: est.eigenvalues[j],
                })
                .collect();
            matched_records(rep, approach, &ests, &all, truth, p)
        }
        Approach::OracleIsPca => {
            let (ests, owner) = model_estimates(x, &oracle()?, 1)?;
            ests.iter()
                .zip(owner)
                .map(|(e, b)| record(rep, approach, b, truth, e, p))
                .collect()
        }
        Approach::FalseNegIsPca => {
            let merged = merge_pairs(&oracle()?)?;
            let (ests, owner) = model_estimates(x, &merged, 2)?;
            // merged block m holds true blocks 2m and 2m + 1
            let mut out = Vec::new();
            for m in 0..merged.num_blocks() {
                let own: Vec<Estimate> = ests
                    .iter()
                    .zip(&owner)
                    .filter(|(_, &o)| o == m)
                    .map(|(e, _)| Estimate {
                        vector: e.vector.clone(),
                        eigenvalue: e.eigenvalue,
                    })
                    .collect();
                out.extend(matched_records(
                    rep,
                    approach,
                    &own,
                    &[2 * m, 2 * m + 1],
                    truth,
                    p,
                )?);
            }
            Ok(out)
        }
        Approach::PmdIsPca => {
            let part = detect_sparse_split(x, &cfg.detector)?;
            let (ests, _) = model_estimates(x, &part, 1)?;
            matched_records(rep, approach, &ests[..1], &all, truth, p)
        }
        Approach::Pmd => {
            let c = (cfg.pmd_sumabs * (p as f64).sqrt()).max(1.0);
            let start = exact_svd(x, 1)?.loadings.column(0).clone_owned();
            let f = pmd_rank1_from(x, c, start.as_slice(), &cfg.detector.pmd_options())?;
            let est = Estimate {
                vector: f.v.iter().copied().collect(),
                eigenvalue: f.d * f.d / x.nrows() as f64,
            };
            matched_records(rep, approach, &[est], &all, truth, p)
        }
    }
}

fn run_replicate(
    cfg: &SimConfig,
    approaches: &[Approach],
    rep: usize,
) -> (Vec<SimRecord>, Vec<SimFailure>) {
    let (mut records, mut failures) = (Vec::new(), Vec::new());
    let (x, truth) = match sample_block_gaussian(cfg, rep) {
        Ok(v) => v,
        Err(e) => {
            for &approach in approaches {
                failures.push(SimFailure {
                    replicate: rep,
                    approach,
                    error: e.to_string(),
                });
            }
            return (records, failures);
        }
    };
    for &approach in approaches {
        match run_arm(cfg, approach, rep, &x, &truth) {
            Ok(r) => records.extend(r),
            Err(e) => failures.push(SimFailure {
                replicate: rep,
                approach,
                error: e.to_string(),
            }),
        }
    }
    (records, failures)
}

/// Run every replicate (in parallel; results do not depend on scheduling)
/// and aggregate per approach. Arms that fail on a replicate are listed in
/// `failures` and left out of the aggregates.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let mut approaches = cfg.approaches.clone();
    approaches.sort();
    approaches.dedup();
    let per_rep: Vec<(Vec<SimRecord>, Vec<SimFailure>)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| run_replicate(cfg, &approaches, rep))
        .collect();
    let (mut records, mut failures) = (Vec::new(), Vec::new());
    for (r, f) in per_rep {
        records.extend(r);
        failures.extend(f);
    }
    let summary = approaches
        .iter()
        .map(|&a| {
            let cos: Vec<f64> = records
                .iter()
                .filter(|r| r.approach == a)
                .map(|r| r.cosine)
                .collect();
            let rat: Vec<f64> = records
                .iter()
                .filter(|r| r.approach == a)
                .map(|r| r.ratio)
                .collect();
            ApproachSummary {
                approach: a,
                cosine: Summary::of(&cos),
                ratio: Summary::of(&rat),
                failures: failures.iter().filter(|f| f.approach == a).count(),
            }
        })
        .collect();
    Ok(SimResult {
        config: cfg.clone(),
        records,
        failures,
        summary,
    })
}
