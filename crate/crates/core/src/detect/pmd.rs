//! Rank-1 penalized matrix decomposition: alternating maximization of
//! `uᵀXv` subject to `‖u‖₂ ≤ 1`, `‖v‖₂ ≤ 1`, `‖v‖₁ ≤ c`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::spectra::{exact_svd, fix_sign};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmdOptions {
    pub max_iter: usize,
    /// Stop when successive `v` iterates differ by less than this (ℓ2).
    pub tol: f64,
}

impl Default for PmdOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmdFit {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    /// `uᵀXv`.
    pub d: f64,
    /// `‖Xv‖` after each accepted v-update; nondecreasing.
    pub objective: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iter` ran out; the best iterate is still returned.
    pub converged: bool,
}

impl PmdFit {
    pub fn support(&self) -> Vec<usize> {
        self.v
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// `sign(a)·max(|a| − δ, 0)`, elementwise.
pub fn soft_threshold(a: &[f64], delta: f64) -> Vec<f64> {
    a.iter()
        .map(|&x| x.signum() * (x.abs() - delta).max(0.0))
        .collect()
}

fn l1_over_l2(a: &[f64], delta: f64) -> f64 {
    let (mut l1, mut l2) = (0.0, 0.0);
    for &x in a {
        let s = (x.abs() - delta).max(0.0);
        l1 += s;
        l2 += s * s;
    }
    if l2 == 0.0 {
        f64::NAN
    } else {
        l1 / l2.sqrt()
    }
}

/// Unit vector maximizing `aᵀv` subject to `‖v‖₁ ≤ c`: the normalized
/// soft-threshold of `a`, with the threshold chosen so that the ℓ1 bound
/// holds (threshold 0 when it is slack).
///
/// With the magnitudes sorted, `ℓ1/ℓ2` of the soft-threshold is
/// nonincreasing in the threshold, and on each interval between
/// consecutive magnitudes it is fixed by the prefix sums, so the threshold
/// solves a quadratic on the first interval where the ratio exceeds `c`.
pub fn l1_project(a: &[f64], c: f64) -> Result<Vec<f64>> {
    let amax = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if amax == 0.0 {
        return Err(Error::ZeroVector("PMD v-update"));
    }
    let normalize = |mut s: Vec<f64>| {
        let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        s.iter_mut().for_each(|x| *x /= norm);
        s
    };
    if l1_over_l2(a, 0.0) <= c {
        return Ok(normalize(a.to_vec()));
    }
    let mut m: Vec<f64> = a.iter().map(|x| x.abs()).filter(|&x| x > 0.0).collect();
    m.sort_unstable_by(|x, y| y.total_cmp(x));
    let (mut a1, mut a2) = (0.0, 0.0);
    let mut delta = amax;
    for k in 1..=m.len() {
        a1 += m[k - 1];
        a2 += m[k - 1] * m[k - 1];
        let next = m.get(k).copied().unwrap_or(0.0);
        let kf = k as f64;
        let (l1, l2sq) = (a1 - kf * next, a2 - 2.0 * next * a1 + kf * next * next);
        if l2sq > 0.0 && l1 > c * l2sq.sqrt() {
            // root of (a1 − kδ)² = c²(a2 − 2δa1 + kδ²) on [next, m_k]
            let disc = ((kf * a2 - a1 * a1) / (kf - c * c)).max(0.0);
            delta = ((a1 - c * disc.sqrt()) / kf).clamp(next, m[k - 1]);
            break;
        }
    }
    if delta >= amax {
        // several entries tie at the maximum and c is below the ratio they
        // produce; fall back to the first of them
        let j = a.iter().position(|x| x.abs() == amax).unwrap();
        let mut e = vec![0.0; a.len()];
        e[j] = a[j].signum();
        return Ok(e);
    }
    let floor = 8.0 * f64::EPSILON * amax;
    let mut s = soft_threshold(a, delta);
    s.iter_mut().for_each(|x| {
        if x.abs() <= floor {
            *x = 0.0
        }
    });
    Ok(normalize(s))
}

/// Rank-1 PMD from the default start: the leading right singular vector,
/// or for `c <= 1` the coordinate vector of the largest-norm column (the
/// exact solution in that case).
pub fn pmd_rank1(x: &DataMatrix, c: f64, opts: &PmdOptions) -> Result<PmdFit> {
    x.require_centered()?;
    let start = exact_svd(x, 1)?.loadings.column(0).clone_owned();
    pmd_rank1_from(x, c, start.as_slice(), opts)
}

/// Rank-1 PMD from a caller-supplied start vector (used when the same start
/// serves a whole penalty grid).
pub fn pmd_rank1_from(x: &DataMatrix, c: f64, start: &[f64], opts: &PmdOptions) -> Result<PmdFit> {
    x.require_centered()?;
    let p = x.ncols();
    let xv = x.values();
    if start.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p.to_string(),
            found: start.len().to_string(),
        });
    }
    let cmax = (p as f64).sqrt();
    if !(c >= 1.0 - 1e-12 && c <= cmax * (1.0 + 1e-12)) {
        return Err(Error::InvalidConfig(format!(
            "PMD bound c = {c} outside [1, √p = {cmax}]"
        )));
    }

    let mut v = if c <= 1.0 + 1e-12 {
        let best = (0..p)
            .map(|j| x.column(j).iter().map(|a| a * a).sum::<f64>())
            .enumerate()
            .fold(
                (0, -1.0),
                |acc, (j, s)| if s > acc.1 { (j, s) } else { acc },
            )
            .0;
        let mut e = DVector::zeros(p);
        e[best] = 1.0;
        e
    } else {
        // make the start feasible
        DVector::from_vec(l1_project(start, c)?)
    };

    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    // the objective for fixed v is maximized by u = Xv/‖Xv‖, where it
    // equals ‖Xv‖; a new v is accepted only if it does not lower that
    let mut xv_v = xv * &v;
    let mut d = xv_v.norm();
    if d == 0.0 {
        return Err(Error::ZeroVector("PMD u-update"));
    }
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let u = &xv_v / d;
        let a = xv.tr_mul(&u);
        let candidate = DVector::from_vec(l1_project(a.as_slice(), c)?);
        let xc = xv * &candidate;
        let dc = xc.norm();
        if dc < d {
            objective.push(d);
            converged = true;
            break;
        }
        let step = (&candidate - &v).norm();
        v = candidate;
        xv_v = xc;
        d = dc;
        objective.push(d);
        if step < opts.tol {
            converged = true;
            break;
        }
    }

    let mut u = &xv_v / d;
    let mut flipped = v.clone();
    fix_sign(flipped.as_mut_slice());
    if flipped != v {
        v = flipped;
        u.neg_mut();
    }
    Ok(PmdFit {
        u,
        v,
        d,
        objective,
        iterations,
        converged,
    })
}
