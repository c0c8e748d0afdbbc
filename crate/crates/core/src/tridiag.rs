//! Symmetric tridiagonal eigenproblem by implicit QL with Wilkinson shifts.
//!
//! Only the first component of every eigenvector is tracked: that is all
//! Golub–Welsch needs for quadrature weights, and the eigenvalues alone give
//! orthogonal-polynomial roots.

use crate::error::{numeric, Result};

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal `diag`
/// and off-diagonal `off` (`off.len() == diag.len() - 1`).
///
/// Returns eigenvalues in increasing order together with the first component of
/// the corresponding unit eigenvectors.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1), "off-diagonal must have length n - 1");
    if n == 0 {
        return Ok((vec![], vec![]));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return numeric(format!("tridiagonal QL failed to converge at index {l}"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    Ok((idx.iter().map(|&i| d[i]).collect(), idx.iter().map(|&i| z[i]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3, eigenvectors (1,-1)/√2, (1,1)/√2.
        let (vals, first) = symmetric_tridiagonal_eigen(&[2.0, 2.0], &[1.0]).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        for f in first {
            assert!((f.abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_dense_solver() {
        let diag = [0.3, -1.2, 2.5, 0.7, 1.1, -0.4];
        let off = [0.9, 0.1, -1.3, 0.6, 2.0];
        let (vals, first) = symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        let n = diag.len();
        let mut a = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = diag[i];
            if i + 1 < n {
                a[(i, i + 1)] = off[i];
                a[(i + 1, i)] = off[i];
            }
        }
        let eig = a.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].abs()))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        for k in 0..n {
            assert!((vals[k] - pairs[k].0).abs() < 1e-12);
            assert!((first[k].abs() - pairs[k].1).abs() < 1e-12);
        }
    }
}
