//! Reference routines used only by tests. Nothing here calls into the
//! library's numerical code; the eigensolver is a plain cyclic Jacobi
//! iteration over row-major `Vec<Vec<f64>>`.

#![allow(dead_code)]

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors
/// as columns (`vectors[i][k]` is entry `i` of eigenvector `k`).
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].partial_cmp(&m[i][i]).unwrap());
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = (0..n)
        .map(|r| order.iter().map(|&c| v[r][c]).collect())
        .collect();
    (values, vectors)
}

/// `(1/n) XᵀX` by a triple loop; `x` is row-major `n x p`.
pub fn gram_over_n(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    let p = x[0].len();
    let mut s = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for row in x {
                acc += row[i] * row[j];
            }
            s[i][j] = acc / n as f64;
        }
    }
    s
}

/// Connected components of the graph with an edge wherever
/// `|corr(i, j)| > threshold`, by depth-first search over the full
/// correlation matrix. Components are sorted by smallest member.
pub fn correlation_components(x: &[Vec<f64>], threshold: f64) -> Vec<Vec<usize>> {
    let s = gram_over_n(x);
    let p = s.len();
    let mut seen = vec![false; p];
    let mut comps = Vec::new();
    for start in 0..p {
        if seen[start] {
            continue;
        }
        let mut comp = vec![];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in 0..p {
                if seen[j] || s[i][i] == 0.0 || s[j][j] == 0.0 {
                    continue;
                }
                let r = s[i][j] / (s[i][i] * s[j][j]).sqrt();
                if r.abs() > threshold {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps.sort();
    comps
}
