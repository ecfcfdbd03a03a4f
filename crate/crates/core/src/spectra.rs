//! Spectral estimators for a centered data matrix: the exact SVD and the
//! cross-data-matrix (CDM) estimator for `p >> n`, plus the two accuracy
//! metrics and a Weyl perturbation-bound checker.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CovarianceMatrix, DataMatrix};

/// Convergence threshold handed to the dense eigen/SVD solvers.
pub const SOLVER_TOL: f64 = 1e-12;

/// Gram eigenvalues below this fraction of the largest are treated as zero;
/// roundoff in the Gram matrix is of order `eps * μ_1`.
const NULL_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvdMethod {
    Exact,
    Cdm,
}

impl std::fmt::Display for SvdMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SvdMethod::Exact => "exact",
            SvdMethod::Cdm => "cdm",
        })
    }
}

/// Leading eigenvalues of the sample covariance and matching unit loadings.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    /// Descending, nonnegative.
    pub eigenvalues: Vec<f64>,
    /// `p x k`, unit-norm columns. Sign fixed so each column's
    /// largest-magnitude entry is positive.
    pub loadings: DMatrix<f64>,
    pub method: SvdMethod,
    pub rank_used: usize,
}

impl SpectralEstimate {
    /// `max |v_iᵀ v_j|` over `i != j`.
    pub fn max_cross_product(&self) -> f64 {
        let g = self.loadings.tr_mul(&self.loadings);
        let k = g.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    worst = worst.max(g[(i, j)].abs());
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Default)]
pub struct CdmOptions {
    /// Shuffle rows with this seed before splitting into halves.
    pub shuffle_seed: Option<u64>,
}

/// Flip `v` so its largest-magnitude entry is positive (first one on ties).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Dense symmetric eigendecomposition, eigenvalues descending.
pub fn symmetric_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = m.nrows();
    if dim == 0 {
        return Ok((vec![], DMatrix::zeros(0, 0)));
    }
    let eig =
        SymmetricEigen::try_new(m, SOLVER_TOL, 100 * dim.max(1)).ok_or(Error::NonConvergence {
            what: "symmetric eigensolver",
            iterations: 100 * dim,
        })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(&order);
    Ok((values, vectors))
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Modified Gram-Schmidt over the columns of `v`, in place. Columns that
/// vanish after projection are replaced by the first coordinate vector
/// that is not yet in their span.
fn orthonormalize(v: &mut DMatrix<f64>) {
    let (p, k) = v.shape();
    let mut next_unit = 0;
    for j in 0..k {
        for _pass in 0..2 {
            for i in 0..j {
                let dot = v.column(i).dot(&v.column(j));
                let ci = v.column(i).clone_owned();
                v.column_mut(j).axpy(-dot, &ci, 1.0);
            }
        }
        let mut norm = v.column(j).norm();
        while norm < 1e-8 && next_unit < p {
            let mut e = DVector::zeros(p);
            e[next_unit] = 1.0;
            next_unit += 1;
            for _pass in 0..2 {
                for i in 0..j {
                    let dot = v.column(i).dot(&e);
                    e.axpy(-dot, &v.column(i).clone_owned(), 1.0);
                }
            }
            norm = e.norm();
            v.set_column(j, &e);
        }
        v.column_mut(j).unscale_mut(norm);
    }
}

fn finish(
    eigenvalues: Vec<f64>,
    mut loadings: DMatrix<f64>,
    method: SvdMethod,
) -> SpectralEstimate {
    for mut col in loadings.column_iter_mut() {
        fix_sign(col.as_mut_slice());
    }
    let rank_used = eigenvalues.len();
    SpectralEstimate {
        eigenvalues,
        loadings,
        method,
        rank_used,
    }
}

/// Top-`k` right singular vectors of `X` with eigenvalues `l_j = d_j² / n`
/// of `S = XᵀX / n`.
///
/// Works on whichever Gram matrix is smaller (`XXᵀ` when `n < p`) and
/// back-projects. Directions with a numerically zero singular value get
/// eigenvalue 0 and an orthonormal completion.
pub fn exact_svd(x: &DataMatrix, k: usize) -> Result<SpectralEstimate> {
    x.require_centered()?;
    let (n, p) = (x.nrows(), x.ncols());
    let max = n.min(p);
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { k, max });
    }
    let xv = x.values();
    if n < p {
        let mut gram = xv * xv.transpose();
        symmetrize(&mut gram);
        let (mu, u) = symmetric_eigen(gram)?;
        let top = mu[0].max(0.0);
        let mut loadings = DMatrix::zeros(p, k);
        let mut eigenvalues = Vec::with_capacity(k);
        for (j, &m) in mu.iter().enumerate().take(k) {
            if top > 0.0 && m > NULL_RTOL * top {
                let v = xv.tr_mul(&u.column(j)) / m.sqrt();
                loadings.set_column(j, &v);
                eigenvalues.push(m / n as f64);
            } else {
                eigenvalues.push(0.0);
            }
        }
        orthonormalize(&mut loadings);
        Ok(finish(eigenvalues, loadings, SvdMethod::Exact))
    } else {
        let mut gram = xv.tr_mul(xv);
        symmetrize(&mut gram);
        let (mu, v) = symmetric_eigen(gram)?;
        let eigenvalues = mu[..k].iter().map(|m| m.max(0.0) / n as f64).collect();
        let loadings = v.columns(0, k).into_owned();
        Ok(finish(eigenvalues, loadings, SvdMethod::Exact))
    }
}

/// Cross-data-matrix estimator with the default (unshuffled) row split.
pub fn cdm_svd(x: &DataMatrix, k: usize) -> Result<SpectralEstimate> {
    cdm_svd_with(x, k, &CdmOptions::default())
}

/// Cross-data-matrix estimator.
///
/// Rows are split into a first half of `⌈n/2⌉` rows and the rest. The
/// eigenvalue estimates are the singular values of
/// `C = (n₁n₂)^(-1/2) X₁X₂ᵀ`; each loading is `X₁ᵀu₁ + X₂ᵀu₂` for the
/// matching left/right singular pair of `C`, renormalized to unit length.
pub fn cdm_svd_with(x: &DataMatrix, k: usize, opts: &CdmOptions) -> Result<SpectralEstimate> {
    x.require_centered()?;
    let n = x.nrows();
    if n < 4 {
        return Err(Error::TooSmall {
            rows: n,
            cols: x.ncols(),
            min: 4,
        });
    }
    let max = n / 2;
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { k, max });
    }
    let n1 = n.div_ceil(2);
    let n2 = n - n1;

    let shuffled;
    let xv = match opts.shuffle_seed {
        Some(seed) => {
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            shuffled = x.values().select_rows(&rows);
            &shuffled
        }
        None => x.values(),
    };
    let x1 = xv.rows(0, n1);
    let x2 = xv.rows(n1, n2);

    let p = x.ncols();
    // With few columns, X_h = Q_h R_h turns the n1 × n2 cross matrix into
    // the p × p product R1 R2ᵀ with the same singular values, and the
    // back-projection X_hᵀ Q_h a reduces to R_hᵀ a.
    let thin = p < n2 && k <= p;
    let (f1, f2) = if thin {
        (x1.clone_owned().qr().r(), x2.clone_owned().qr().r())
    } else {
        (x1.clone_owned(), x2.clone_owned())
    };
    let cross = (&f1 * f2.transpose()) / ((n1 * n2) as f64).sqrt();
    if cross.iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroCrossMatrix);
    }
    let iters = 100 * cross.nrows().max(1);
    let svd = SVD::try_new(cross, true, true, SOLVER_TOL, iters).ok_or(Error::NonConvergence {
        what: "cross data matrix SVD",
        iterations: iters,
    })?;
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let vt = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut loadings = DMatrix::zeros(p, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (j, &idx) in order.iter().take(k).enumerate() {
        let u1 = u.column(idx);
        let u2 = vt.row(idx).transpose();
        let mut v = f1.tr_mul(&u1) + f2.tr_mul(&u2);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector("CDM loading back-projection"));
        }
        v.unscale_mut(norm);
        loadings.set_column(j, &v);
        eigenvalues.push(svd.singular_values[idx]);
    }
    Ok(finish(eigenvalues, loadings, SvdMethod::Cdm))
}

/// Dispatch on [`SvdMethod`].
pub fn estimate(x: &DataMatrix, k: usize, method: SvdMethod) -> Result<SpectralEstimate> {
    match method {
        SvdMethod::Exact => exact_svd(x, k),
        SvdMethod::Cdm => cdm_svd(x, k),
    }
}

pub const SPECTRAL_NORM_MAX_ITER: usize = 10_000;

/// Largest singular value by power iteration on `MᵀM` from a fixed start.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "spectral_norm: non-finite entry".into(),
        ));
    }
    let cols = m.ncols();
    if cols == 0 || m.nrows() == 0 || m.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut v = DVector::from_fn(cols, |i, _| 1.0 + 0.5 * ((i + 1) as f64).sin());
    v.normalize_mut();
    let mut sigma = 0.0;
    for _ in 0..SPECTRAL_NORM_MAX_ITER {
        let mv = m * &v;
        let next_sigma = mv.norm();
        let mut w = m.tr_mul(&mv);
        let wn = w.norm();
        if wn == 0.0 {
            // start vector happened to lie in the null space
            return Ok(next_sigma);
        }
        w.unscale_mut(wn);
        let done = (next_sigma - sigma).abs() <= 1e-14 * next_sigma;
        sigma = next_sigma;
        v = w;
        if done {
            return Ok(sigma);
        }
    }
    Err(Error::NonConvergence {
        what: "spectral norm power iteration",
        iterations: SPECTRAL_NORM_MAX_ITER,
    })
}

/// `|vᵀw| / (‖v‖ ‖w‖)`, in `[0, 1]`.
pub fn cosine_similarity(v: &[f64], w: &[f64]) -> Result<f64> {
    if v.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len().to_string(),
            found: w.len().to_string(),
        });
    }
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nw = w.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nv == 0.0 || nw == 0.0 {
        return Err(Error::ZeroVector("cosine similarity"));
    }
    let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
    Ok((dot.abs() / (nv * nw)).min(1.0))
}

/// `estimated / truth`; above 1 means overestimation.
pub fn eigenvalue_ratio(estimated: f64, truth: f64) -> Result<f64> {
    if truth <= 0.0 || !truth.is_finite() {
        return Err(Error::NonPositiveTruth(truth));
    }
    Ok(estimated / truth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylReport {
    pub holds: bool,
    /// `|λ_j - l_j|` for each `j`, eigenvalues of both matrices sorted
    /// descending.
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    pub perturbation_norm: f64,
}

/// Check `|λ_j(Σ) - λ_j(Σ + E)| <= ‖E‖₂` for every `j`, with `1e-9`
/// absolute slack.
pub fn weyl_gap_check(sigma: &CovarianceMatrix, e: &DMatrix<f64>) -> Result<WeylReport> {
    let p = sigma.dim();
    if e.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            expected: format!("{p}x{p}"),
            found: format!("{}x{}", e.nrows(), e.ncols()),
        });
    }
    let e_sym = CovarianceMatrix::from_symmetric(e.clone())?;
    let (lambda, _) = symmetric_eigen(sigma.values().clone())?;
    let (l, _) = symmetric_eigen(sigma.values() + e_sym.values())?;
    let gaps: Vec<f64> = lambda.iter().zip(&l).map(|(a, b)| (a - b).abs()).collect();
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    let perturbation_norm = spectral_norm(e)?;
    Ok(WeylReport {
        holds: max_gap <= perturbation_norm + 1e-9,
        gaps,
        max_gap,
        perturbation_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{center_columns, covariance};
    use crate::oracle::jacobi_eigen;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng(seed);
        DMatrix::from_fn(n, p, |_, _| r.sample(StandardNormal))
    }

    fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    }

    #[test]
    fn exact_svd_diagonal() {
        let x = DataMatrix::assume_centered(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]))
            .unwrap();
        let est = exact_svd(&x, 2).unwrap();
        assert!((est.eigenvalues[0] - 4.5).abs() < 1e-12);
        assert!((est.eigenvalues[1] - 0.5).abs() < 1e-12);
        assert!((est.loadings[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((est.loadings[(1, 1)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_svd_rank_one() {
        // X = d u vᵀ, u and v unit vectors, u orthogonal to 1 so X is centered
        let u = DVector::from_vec(vec![1.0, -1.0, 2.0, -2.0]).normalize();
        let v = DVector::from_vec(vec![3.0, 0.0, 4.0]).normalize();
        let d = 5.0;
        let x = DataMatrix::assume_centered(&u * v.transpose() * d).unwrap();
        let est = exact_svd(&x, 1).unwrap();
        assert!((est.eigenvalues[0] - d * d / 4.0).abs() < 1e-12);
        assert!(
            cosine_similarity(est.loadings.column(0).as_slice(), v.as_slice()).unwrap()
                > 1.0 - 1e-12
        );
        let full = exact_svd(&x, 3).unwrap();
        assert!(full.eigenvalues[1].abs() < 1e-12);
        assert!((full.loadings.tr_mul(&full.loadings) - DMatrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn exact_svd_matches_jacobi_and_reconstructs() {
        for (n, p, seed) in [(6, 4, 11), (4, 6, 12), (9, 9, 13)] {
            let x = center_columns(&DataMatrix::new(gaussian(n, p, seed), None).unwrap());
            let k = if n <= p { n - 1 } else { p };
            let est = exact_svd(&x, k).unwrap();
            let (oracle, _) = jacobi_eigen(&to_rows(covariance(&x).unwrap().values()));
            for j in 0..k {
                let rel = (est.eigenvalues[j] - oracle[j]).abs() / oracle[0];
                assert!(
                    rel < 1e-9,
                    "eigenvalue {j}: {} vs {}",
                    est.eigenvalues[j],
                    oracle[j]
                );
            }
            let v = &est.loadings;
            assert!((v.tr_mul(v) - DMatrix::identity(k, k)).amax() < 1e-10);
            let recon = x.values() * v * v.transpose();
            let err = (x.values() - recon).norm() / x.values().norm();
            assert!(err < 1e-10, "reconstruction error {err}");
        }
    }

    #[test]
    fn exact_svd_rank_bounds() {
        let x = center_columns(&DataMatrix::new(gaussian(5, 3, 1), None).unwrap());
        assert!(matches!(
            exact_svd(&x, 0),
            Err(Error::RankOutOfRange { .. })
        ));
        assert!(matches!(
            exact_svd(&x, 4),
            Err(Error::RankOutOfRange { max: 3, .. })
        ));
        let raw = DataMatrix::new(gaussian(5, 3, 1), None).unwrap();
        assert!(matches!(exact_svd(&raw, 1), Err(Error::NotCentered)));
    }

    #[test]
    fn exact_svd_null_directions_stay_orthonormal() {
        // centered 5x8 has rank 4; asking for 5 hits the null space
        let x = center_columns(&DataMatrix::new(gaussian(5, 8, 2), None).unwrap());
        let est = exact_svd(&x, 5).unwrap();
        assert_eq!(est.eigenvalues[4], 0.0);
        let v = &est.loadings;
        assert!((v.tr_mul(v) - DMatrix::identity(5, 5)).amax() < 1e-10);
    }

    #[test]
    fn cdm_rank_one_equal_mass() {
        // n = 4, halves of 2; u has equal squared mass on each half
        let u = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]).normalize();
        let v = DVector::from_vec(vec![1.0, 2.0, 2.0]).normalize();
        let d = 3.0;
        let x = DataMatrix::assume_centered(&u * v.transpose() * d).unwrap();
        let est = cdm_svd(&x, 1).unwrap();
        assert!((est.eigenvalues[0] - d * d / 4.0).abs() < 1e-12);
        assert!(
            cosine_similarity(est.loadings.column(0).as_slice(), v.as_slice()).unwrap()
                > 1.0 - 1e-12
        );
    }

    #[test]
    fn cdm_duplicated_halves_give_half_sample_spectrum() {
        let half = gaussian(5, 7, 3);
        let mut full = DMatrix::zeros(10, 7);
        full.rows_mut(0, 5).copy_from(&half);
        full.rows_mut(5, 5).copy_from(&half);
        let x = DataMatrix::assume_centered(full).unwrap();
        let est = cdm_svd(&x, 5).unwrap();
        let half_cov: Vec<Vec<f64>> = {
            let rows = to_rows(&half);
            crate::oracle::gram_over_n(&rows)
        };
        let (oracle, _) = jacobi_eigen(&half_cov);
        for j in 0..5 {
            assert!(
                (est.eigenvalues[j] - oracle[j]).abs() < 1e-10 * oracle[0],
                "{j}: {} vs {}",
                est.eigenvalues[j],
                oracle[j]
            );
        }
    }

    #[test]
    fn cdm_sign_flip_invariance() {
        let x = center_columns(&DataMatrix::new(gaussian(12, 20, 4), None).unwrap());
        let mut flipped = x.values().clone();
        flipped.column_mut(3).neg_mut();
        let y = DataMatrix::assume_centered(flipped).unwrap();
        let a = cdm_svd(&x, 3).unwrap();
        let b = cdm_svd(&y, 3).unwrap();
        for j in 0..3 {
            assert!((a.eigenvalues[j] - b.eigenvalues[j]).abs() < 1e-12 * a.eigenvalues[0]);
            for i in 0..20 {
                assert!((a.loadings[(i, j)].abs() - b.loadings[(i, j)].abs()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cdm_errors() {
        let x = center_columns(&DataMatrix::new(gaussian(3, 5, 5), None).unwrap());
        assert!(matches!(cdm_svd(&x, 1), Err(Error::TooSmall { .. })));
        let x = center_columns(&DataMatrix::new(gaussian(9, 5, 5), None).unwrap());
        assert!(matches!(
            cdm_svd(&x, 5),
            Err(Error::RankOutOfRange { max: 4, .. })
        ));
        let zero = DataMatrix::assume_centered(DMatrix::zeros(6, 3)).unwrap();
        assert!(matches!(cdm_svd(&zero, 1), Err(Error::ZeroCrossMatrix)));
    }

    #[test]
    fn cdm_tall_matches_direct_cross_svd() {
        // p < n/2 takes the factored route; compare against the n1 × n2 SVD
        let x = center_columns(&DataMatrix::new(gaussian(40, 6, 12), None).unwrap());
        let est = cdm_svd(&x, 3).unwrap();
        let (x1, x2) = (x.values().rows(0, 20), x.values().rows(20, 20));
        let svd = SVD::new(x1 * x2.transpose() / 20.0, true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut order: Vec<usize> = (0..20).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        for (j, &i) in order.iter().take(3).enumerate() {
            assert!((est.eigenvalues[j] - svd.singular_values[i]).abs() < 1e-10);
            let v = (x1.tr_mul(&u.column(i)) + x2.tr_mul(&vt.row(i).transpose())).normalize();
            assert!((v.dot(&est.loadings.column(j)).abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cdm_unit_loadings_and_shuffle_determinism() {
        let x = center_columns(&DataMatrix::new(gaussian(11, 30, 6), None).unwrap());
        let opts = CdmOptions {
            shuffle_seed: Some(9),
        };
        let a = cdm_svd_with(&x, 4, &opts).unwrap();
        let b = cdm_svd_with(&x, 4, &opts).unwrap();
        assert_eq!(a, b);
        for col in a.loadings.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
        assert!(a.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(a.max_cross_product() < 1.0);
    }

    #[test]
    fn spectral_norm_cases() {
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -5.0]);
        assert!((spectral_norm(&d).unwrap() - 5.0).abs() < 1e-9 * 5.0);
        assert_eq!(spectral_norm(&DMatrix::zeros(3, 3)).unwrap(), 0.0);
        for seed in 0..10 {
            let a = gaussian(5, 5, 100 + seed);
            let s = (&a + a.transpose()) * 0.5;
            let (ev, _) = jacobi_eigen(&to_rows(&s));
            let expected = ev.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let got = spectral_norm(&s).unwrap();
            assert!(
                (got - expected).abs() <= 1e-9 * expected,
                "{got} vs {expected}"
            );
        }
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine_similarity(&[0.6, 0.8], &[0.6, 0.8]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let h = 1.0 / 2f64.sqrt();
        assert!((cosine_similarity(&[1.0, 0.0], &[h, h]).unwrap() - h).abs() < 1e-15);
        assert!((cosine_similarity(&[0.6, -0.8], &[-0.6, 0.8]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector(_))
        ));
    }

    #[test]
    fn ratio_cases() {
        assert_eq!(eigenvalue_ratio(4.8, 4.8).unwrap(), 1.0);
        assert_eq!(eigenvalue_ratio(9.6, 4.8).unwrap(), 2.0);
        assert_eq!(eigenvalue_ratio(2.4, 4.8).unwrap(), 0.5);
        assert!(eigenvalue_ratio(1.0, 0.0).is_err());
        assert!(eigenvalue_ratio(1.0, -2.0).is_err());
    }

    #[test]
    fn weyl_cases() {
        let sigma = CovarianceMatrix::from_symmetric(DMatrix::identity(3, 3)).unwrap();
        let r = weyl_gap_check(&sigma, &DMatrix::zeros(3, 3)).unwrap();
        assert!(r.holds);
        assert_eq!(r.max_gap, 0.0);

        let eps = 0.25;
        let r = weyl_gap_check(&sigma, &(DMatrix::identity(3, 3) * eps)).unwrap();
        assert!(r.holds);
        for g in &r.gaps {
            assert!((g - eps).abs() < 1e-12);
        }
        assert!((r.perturbation_norm - eps).abs() < 1e-12);

        assert!(matches!(
            weyl_gap_check(&sigma, &DMatrix::zeros(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.3];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
    }
}
