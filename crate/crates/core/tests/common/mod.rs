//! Shared helpers for the integration tests.

#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use ispca::io::{fmt_f64, write_csv};
use ispca::sim::{sample_block_gaussian, SimConfig};
use ispca::DataMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seed and layout of `fixtures/three_blocks.csv`: replicate 0 of this
/// simulation config, columns `v0..v14`, blocks `0..5`, `5..10`, `10..15`.
pub const FIXTURE_SEED: u64 = 20_240_601;

pub fn fixture_config() -> SimConfig {
    SimConfig {
        n: 60,
        p: 15,
        b: 3,
        omega_range: (0.35, 0.45),
        replicates: 1,
        seed: FIXTURE_SEED,
        ..Default::default()
    }
}

pub fn fixture_blocks() -> Vec<Vec<usize>> {
    vec![(0..5).collect(), (5..10).collect(), (10..15).collect()]
}

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/three_blocks.csv")
}

pub fn fixture_matrix() -> DataMatrix {
    sample_block_gaussian(&fixture_config(), 0).unwrap().0
}

pub fn write_matrix(path: &std::path::Path, m: &DMatrix<f64>) {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("v{j}")).collect();
    let rows = (0..m.nrows()).map(|i| m.row(i).iter().map(|&v| fmt_f64(v)).collect());
    write_csv(path, &header, rows).unwrap();
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(n: usize, p: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| r.sample(StandardNormal))
}

/// Random cover of `0..p` by `b` nonempty blocks (requires `b <= p`).
pub fn random_blocks(p: usize, b: usize, r: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut cols: Vec<usize> = (0..p).collect();
    for i in (1..p).rev() {
        cols.swap(i, r.random_range(0..=i));
    }
    let mut blocks: Vec<Vec<usize>> = cols[..b].iter().map(|&c| vec![c]).collect();
    for &c in &cols[b..] {
        blocks[r.random_range(0..b)].push(c);
    }
    blocks.iter_mut().for_each(|bl| bl.sort_unstable());
    blocks
}

/// Data whose columns are independent across `blocks`: each block mixes
/// its own Gaussian factors, so its covariance is dense within the block
/// and zero outside in the population.
pub fn block_structured(
    n: usize,
    p: usize,
    blocks: &[Vec<usize>],
    r: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, p);
    for block in blocks {
        let k = block.len();
        let mix = gaussian(k, k, r);
        let z = gaussian(n, k, r);
        let y = z * mix;
        for (t, &c) in block.iter().enumerate() {
            m.set_column(c, &y.column(t));
        }
    }
    m
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}
