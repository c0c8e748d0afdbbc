//! The `θ → ∞` regime: level `N` freezes at the roots of the Jacobi polynomial
//! for the weight `x^{α-1}(1-x)^{|M-N|}` on `(0, 1)`, with Gaussian fluctuations
//! of size `θ^{-1/2}` around them.

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, numeric, Result};
use crate::exact::{self, EvalOptions};
use crate::model::ObservableSpec;
use crate::params::EnsembleParams;
use crate::quadrature::jacobi_recurrence;
use crate::sampler::{self, SamplerConfig};
use crate::special::elementary_symmetric;
use crate::tridiag::symmetric_tridiagonal_eigen;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootTarget {
    pub level: usize,
    pub roots: Vec<f64>,
}

/// Roots of the degree `min(N, M)` orthogonal polynomial for
/// `x^{α-1}(1-x)^{|M-N|}` on `(0, 1)`.
pub fn jacobi_roots(n_level: usize, m_param: usize, alpha: f64) -> Result<RootTarget> {
    let k = n_level.min(m_param);
    if k == 0 {
        return domain("the level and M must be at least 1");
    }
    if !(alpha > 0.0) {
        return domain("alpha must be positive");
    }
    // t ∈ (-1, 1) with x = (1 + t)/2: (1 - t)^{|M-N|} (1 + t)^{α-1}
    let a = n_level.abs_diff(m_param) as f64;
    let (diag, off) = jacobi_recurrence(k, a, alpha - 1.0);
    let (t, _) = symmetric_tridiagonal_eigen(&diag, &off)?;
    let roots: Vec<f64> = t.iter().map(|t| 0.5 * (1.0 + t)).collect();
    if roots.windows(2).any(|w| !(w[0] < w[1])) || roots.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return numeric(format!("root computation failed for N = {n_level}, M = {m_param}, alpha = {alpha}"));
    }
    Ok(RootTarget { level: n_level, roots })
}

/// Residual of the stationarity equations of
/// `Σ_{i<j} 2 ln(z_j - z_i) + Σ_i (α ln z_i + (|M-N| + 1) ln(1 - z_i))`,
/// whose maximizer is the set of Jacobi roots.
pub fn stationarity_residual(roots: &[f64], n_level: usize, m_param: usize, alpha: f64) -> f64 {
    let a = n_level.abs_diff(m_param) as f64;
    roots
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let pair: f64 = roots
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &w)| 2.0 / (z - w))
                .sum();
            (pair + alpha / z - (a + 1.0) / (1.0 - z)).abs()
        })
        .fold(0.0, f64::max)
}

/// `J[k][i] = ∂e_{k+1}/∂x_i = e_k(x without x_i)`.
pub fn esym_jacobian(x: &[f64]) -> Result<DMatrix<f64>> {
    let k = x.len();
    if k == 0 {
        return domain("empty point set");
    }
    for i in 0..k {
        for j in 0..i {
            if x[i] == x[j] {
                return domain("esym_jacobian needs distinct entries");
            }
        }
    }
    let mut jac = DMatrix::zeros(k, k);
    for i in 0..k {
        let rest: Vec<f64> = x.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
        let e = elementary_symmetric(&rest);
        for r in 0..k {
            jac[(r, i)] = e[r];
        }
    }
    Ok(jac)
}

/// `J^{-1} v` for the Jacobian of `x ↦ (e_1, …, e_K)`.
pub fn esym_jacobian_solve(x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let jac = esym_jacobian(x)?;
    if v.len() != x.len() {
        return domain("right-hand side has the wrong length");
    }
    jac.lu()
        .solve(&DVector::from_column_slice(v))
        .map(|s| s.iter().copied().collect())
        .ok_or_else(|| crate::Error::Domain("singular elementary-symmetric Jacobian".into()))
}

/// `θ · Cov(a, b)` from the exact moment engine along a grid of `θ`.
pub fn theta_scaled_cov_sequence(
    alpha: Rational64,
    m_param: usize,
    a: &ObservableSpec,
    b: &ObservableSpec,
    theta_grid: &[Rational64],
) -> Result<Vec<f64>> {
    if theta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return domain("theta grid must be increasing");
    }
    theta_grid
        .iter()
        .map(|&theta| {
            let p = EnsembleParams::from_ratios(theta, alpha, m_param)?;
            let c = exact::covariance(&p, a, b, &EvalOptions::default())?;
            let theta_f = *theta.numer() as f64 / *theta.denom() as f64;
            Ok(theta_f * c.to_f64())
        })
        .collect()
}

/// Sampled `√θ (𝔯^N_i - 𝔧^N_i)`, one row per sample, together with the roots.
pub fn fluctuation_samples(
    params: &EnsembleParams,
    big_n: usize,
    config: &SamplerConfig,
    count: usize,
) -> Result<(RootTarget, Vec<Vec<f64>>)> {
    let target = jacobi_roots(big_n, params.m_param(), params.alpha())?;
    let scale = params.theta().sqrt();
    let samples = sampler::sample_corners(params, big_n, config, count)?;
    let rows = samples
        .iter()
        .map(|c| {
            c.level(big_n)
                .iter()
                .zip(&target.roots)
                .map(|(x, j)| scale * (x - j))
                .collect()
        })
        .collect();
    Ok((target, rows))
}

/// Summary of the fluctuation checks at large `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport {
    pub theta: f64,
    pub samples: usize,
    /// Fraction of samples with `max_i |𝔯_i - 𝔧_i| < threshold / √θ`.
    pub concentrated_fraction: f64,
    pub threshold: f64,
    /// Per-coordinate skewness of `√θ Δx` and its standard error.
    pub skewness: Vec<(f64, f64)>,
    /// Empirical covariance of `√θ Δx` with standard errors.
    pub cov_x: Vec<Vec<(f64, f64)>>,
    /// `φ θCov(e) φᵀ` from exact moments, `φ` the inverse Jacobian at the roots.
    pub cov_linearized: Vec<Vec<f64>>,
}

impl FluctuationReport {
    /// Largest `|cov_x - cov_linearized| / se` over all entries.
    pub fn max_linearization_z(&self) -> f64 {
        let mut z: f64 = 0.0;
        for (r, row) in self.cov_x.iter().enumerate() {
            for (c, &(v, se)) in row.iter().enumerate() {
                z = z.max((v - self.cov_linearized[r][c]).abs() / se.max(f64::MIN_POSITIVE));
            }
        }
        z
    }
}

/// Concentration, skewness and linearization checks on sampled fluctuations.
pub fn fluctuation_report(
    params: &EnsembleParams,
    big_n: usize,
    config: &SamplerConfig,
    count: usize,
    threshold: f64,
) -> Result<FluctuationReport> {
    let (target, rows) = fluctuation_samples(params, big_n, config, count)?;
    let k = target.roots.len();
    let n = rows.len();
    if n < sampler::MIN_SAMPLES {
        return domain(format!("at least {} samples are needed", sampler::MIN_SAMPLES));
    }
    let inside = rows
        .iter()
        .filter(|r| r.iter().all(|d| d.abs() < threshold))
        .count();
    let columns: Vec<Vec<f64>> = (0..k).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
    let series = sampler::ObservableSeries {
        specs: (1..=k).map(|i| ObservableSpec::power(1, i)).collect(),
        values: columns,
        chain_lengths: vec![n],
    };
    let skew = sampler::empirical_cumulants(&series, 3)?;
    let est = sampler::estimate_observables(&series)?;
    let cov_x = est
        .covariance
        .iter()
        .map(|row| row.iter().map(|e| (e.mean, e.std_error)).collect())
        .collect();

    // θ Cov(e_a, e_b) exactly, then φ · C · φᵀ
    let theta = params.theta();
    let mut c = DMatrix::zeros(k, k);
    for a in 1..=k {
        for b in 1..=k {
            let v = exact::covariance(
                params,
                &ObservableSpec::elementary(a, big_n),
                &ObservableSpec::elementary(b, big_n),
                &EvalOptions::default(),
            )?;
            c[(a - 1, b - 1)] = theta * v.to_f64();
        }
    }
    let jac = esym_jacobian(&target.roots)?;
    let phi = jac
        .try_inverse()
        .ok_or_else(|| crate::Error::Numeric("singular Jacobian at the roots".into()))?;
    let lin = &phi * c * phi.transpose();
    let cov_linearized = (0..k).map(|r| (0..k).map(|s| lin[(r, s)]).collect()).collect();

    Ok(FluctuationReport {
        theta,
        samples: n,
        concentrated_fraction: inside as f64 / n as f64,
        threshold,
        skewness: skew.iter().map(|c| (c.standardized, c.std_error)).collect(),
        cov_x,
        cov_linearized,
    })
}

/// Whether the increments of `seq` shrink monotonically, and the last
/// increment relative to the last value.
pub fn cauchy_summary(seq: &[f64]) -> (bool, f64) {
    let inc: Vec<f64> = seq.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let monotone = inc.windows(2).all(|w| w[1] <= w[0]);
    let last = match (inc.last(), seq.last()) {
        (Some(d), Some(v)) => d / v.abs(),
        _ => 0.0,
    };
    (monotone, last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_root_is_beta_mean() {
        for (m, alpha) in [(1, 1.0), (3, 2.5), (7, 0.5)] {
            let r = jacobi_roots(1, m, alpha).unwrap();
            // weight x^{α-1}(1-x)^{M-1}: Beta(α, M) mean
            let mean = alpha / (alpha + m as f64);
            assert!((r.roots[0] - mean).abs() < 1e-13, "{:?} vs {mean}", r.roots);
        }
    }

    #[test]
    fn shifted_legendre_roots() {
        let r = jacobi_roots(2, 2, 1.0).unwrap();
        let d = 0.5 / 3f64.sqrt();
        assert!((r.roots[0] - (0.5 - d)).abs() < 1e-14);
        assert!((r.roots[1] - (0.5 + d)).abs() < 1e-14);
    }

    #[test]
    fn roots_interlace_and_are_stationary() {
        let (m, alpha) = (6, 2.0);
        for n in 1..m {
            let a = jacobi_roots(n, m, alpha).unwrap().roots;
            let b = jacobi_roots(n + 1, m, alpha).unwrap().roots;
            for i in 0..a.len() {
                assert!(b[i] < a[i] && a[i] < b[i + 1]);
            }
            assert!(stationarity_residual(&b, n + 1, m, alpha) < 1e-10);
        }
        for n in [8, 20, 50] {
            let r = jacobi_roots(n, 50, 3.0).unwrap().roots;
            assert!(stationarity_residual(&r, n, 50, 3.0) < 1e-8 * n as f64);
        }
    }

    #[test]
    fn jacobian_small_cases() {
        let j = esym_jacobian(&[0.7]).unwrap();
        assert_eq!(j[(0, 0)], 1.0);
        let j = esym_jacobian(&[0.2, 0.5]).unwrap();
        assert_eq!((j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]), (1.0, 1.0, 0.5, 0.2));
        assert!(esym_jacobian(&[0.3, 0.3]).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let x = [0.1, 0.35, 0.6, 0.9];
        let j = esym_jacobian(&x).unwrap();
        let h = 1e-7;
        let e0 = elementary_symmetric(&x);
        for i in 0..4 {
            let mut y = x;
            y[i] += h;
            let e1 = elementary_symmetric(&y);
            for k in 0..4 {
                assert!(((e1[k + 1] - e0[k + 1]) / h - j[(k, i)]).abs() < 1e-6);
            }
        }
        let v = [0.3, -0.2, 0.1, 0.05];
        let s = esym_jacobian_solve(&x, &v).unwrap();
        let back = &j * DVector::from_column_slice(&s);
        for k in 0..4 {
            assert!((back[k] - v[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn first_elementary_mean_is_theta_free() {
        let e = ObservableSpec::elementary(1, 3);
        let vals: Vec<_> = [1, 2, 10]
            .iter()
            .map(|&t| {
                let p = EnsembleParams::from_ratios(Rational64::from_integer(t), Rational64::from_integer(2), 3).unwrap();
                exact::expectation(&p, &[e], &EvalOptions::default()).unwrap()
            })
            .collect();
        assert_eq!(vals[0], vals[1]);
        assert_eq!(vals[1], vals[2]);
    }

    #[test]
    fn theta_scaled_variance_limit() {
        // θ Var e1(1) → αM/(α+M)^3
        let (alpha, m) = (3i64, 2usize);
        let e = ObservableSpec::elementary(1, 1);
        let grid: Vec<Rational64> = [10i64, 100, 1000, 10000].iter().map(|&t| Rational64::from_integer(t)).collect();
        let seq = theta_scaled_cov_sequence(Rational64::from_integer(alpha), m, &e, &e, &grid).unwrap();
        let limit = (alpha * m as i64) as f64 / ((alpha + m as i64) as f64).powi(3);
        assert!((seq[3] - limit).abs() < 1e-3 * limit);
        let (monotone, _) = cauchy_summary(&seq);
        assert!(monotone);
    }
}
