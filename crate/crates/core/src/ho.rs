//! Heckman–Opdam hypergeometric functions `𝓕_r(y; θ)` for a few variables,
//! by nested quadrature of the branching integral
//! `𝓕_r(y₁..y_N) = ∫_{m≺r} g_{r/m}(y_N) 𝓕_m(y₁..y_{N-1}) dm`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, numeric, Result};
use crate::quadrature::{tanh_sinh, GaussRule, QuadScheme, QuadSpec};
use crate::special::{gamma, ln_gamma};

/// Largest total dimension of the nested integral.
pub const MAX_DIMENSION: usize = 3;
const MIN_GAP: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HOPoint {
    /// Strictly decreasing positive label.
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: f64,
}

impl HOPoint {
    pub fn new(r: Vec<f64>, y: Vec<f64>, theta: f64) -> Result<Self> {
        let p = Self { r, y, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return domain(format!("theta must be positive, got {}", self.theta));
        }
        if self.r.is_empty() || self.y.len() < self.r.len() {
            return domain("need 1 ≤ len(r) ≤ len(y)");
        }
        if self.r.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return domain("entries of r must be positive");
        }
        if self.r.windows(2).any(|w| w[0] - w[1] < MIN_GAP) || self.r[self.r.len() - 1] < MIN_GAP {
            return domain("r must be strictly decreasing with gaps of at least 1e-8");
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return domain("y must be finite");
        }
        let dim = integral_dimension(self.r.len(), self.y.len());
        if dim > MAX_DIMENSION {
            return domain(format!("integral dimension {dim} exceeds the cap of {MAX_DIMENSION}"));
        }
        Ok(())
    }
}

/// Total dimension of the nested integral for `n` labels and `n_vars` variables.
pub fn integral_dimension(n: usize, n_vars: usize) -> usize {
    // padded steps integrate n coordinates, the rest n-1, n-2, ..., 1
    n * (n_vars - n) + n * (n - 1) / 2
}

struct Rules {
    theta: f64,
    scheme: QuadScheme,
    /// `rules[p]`: the rule whose lower-end exponent also carries the
    /// `m^{θp}` vanishing of an inner function with `p` padded zeros.
    rules: Vec<GaussRule>,
    ln_gamma_theta: f64,
}

impl Rules {
    fn new(theta: f64, q: &QuadSpec) -> Result<Self> {
        if q.nodes_per_interval < 8 {
            return domain("at least 8 nodes per interval are required");
        }
        let n = q.nodes_per_interval;
        let rules = match q.scheme {
            QuadScheme::GaussLegendre => vec![GaussRule::legendre(n)?],
            QuadScheme::GaussJacobiEndpoint => (0..MAX_DIMENSION)
                .map(|p| GaussRule::jacobi(n, theta - 1.0, theta - 1.0 + theta * p as f64))
                .collect::<Result<_>>()?,
        };
        Ok(Self {
            theta,
            scheme: q.scheme,
            rules,
            ln_gamma_theta: ln_gamma(theta),
        })
    }

    /// Nodes on `(lo, hi)` with weights that already include the endpoint
    /// factor `(1-e^{-(m-lo)})^{θ-1}(1-e^{-(hi-m)})^{θ-1}`.
    fn interval(&self, lo: f64, hi: f64, padded: usize) -> Vec<(f64, f64)> {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let e = self.theta - 1.0;
        let (rule, kappa) = match self.scheme {
            QuadScheme::GaussLegendre => (&self.rules[0], 0.0),
            QuadScheme::GaussJacobiEndpoint => (&self.rules[padded], self.theta * padded as f64),
        };
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| {
                let m = mid + half * t;
                let (dl, dr) = (half * (1.0 + t), half * (1.0 - t));
                let endpoint = match self.scheme {
                    QuadScheme::GaussLegendre => (-(-dl).exp_m1()).powf(e) * (-(-dr).exp_m1()).powf(e) * half,
                    // the rule carries (1+t)^e (1-t)^e; the rest is smooth
                    QuadScheme::GaussJacobiEndpoint => {
                        ratio_pow(dl, e) * ratio_pow(dr, e) * half.powf(2.0 * e + kappa + 1.0) / dl.powf(kappa)
                    }
                };
                (m, w * endpoint)
            })
            .collect()
    }
}

/// `((1 - e^{-d})/d)^e`.
fn ratio_pow(d: f64, e: f64) -> f64 {
    if d == 0.0 {
        return 1.0;
    }
    (-(-d).exp_m1() / d).powf(e)
}

fn one_minus_exp(d: f64) -> f64 {
    -(-d).exp_m1()
}

/// `𝓕_r(y; θ)`.
pub fn ho_eval(p: &HOPoint, q: &QuadSpec) -> Result<f64> {
    p.validate()?;
    let rules = Rules::new(p.theta, q)?;
    let v = eval(&p.r, &p.y, &rules);
    if !v.is_finite() {
        return numeric("nested quadrature produced a non-finite value");
    }
    Ok(v)
}

/// `𝓕̃_r(y; θ) = Γ(θ)^{-n} ∏(1-e^{-r_i})^{θ-1} 𝓕_r(y; θ)`.
pub fn ho_dual_eval(p: &HOPoint, q: &QuadSpec) -> Result<f64> {
    let f = ho_eval(p, q)?;
    Ok(dual_factor(&p.r, p.theta) * f)
}

fn dual_factor(r: &[f64], theta: f64) -> f64 {
    let ln: f64 = r.iter().map(|&ri| (theta - 1.0) * one_minus_exp(ri).ln()).sum::<f64>()
        - r.len() as f64 * ln_gamma(theta);
    ln.exp()
}

fn eval(r: &[f64], y: &[f64], rules: &Rules) -> f64 {
    let nv = y.len();
    if nv == 1 {
        return (y[0] * r[0]).exp();
    }
    let mut rr = r.to_vec();
    if r.len() < nv {
        rr.push(0.0);
    }
    let k = rr.len() - 1;
    // an inner function with p padded zeros vanishes like m_k^{θp} as m_k → 0
    let inner_padding = (nv - 1).saturating_sub(k);
    let grids: Vec<Vec<(f64, f64)>> = (0..k)
        .map(|i| {
            let p = if i + 1 == k && rr[k] == 0.0 { inner_padding } else { 0 };
            rules.interval(rr[i + 1], rr[i], p)
        })
        .collect();
    let y_last = y[nv - 1];
    let sum_r: f64 = rr.iter().sum();
    let theta = rules.theta;
    let e = 1.0 - theta;

    // parts of g that only depend on r
    let mut ln_const = -(k as f64) * rules.ln_gamma_theta;
    for i in 0..k {
        for j in i..k {
            ln_const += e * one_minus_exp(rr[i] - rr[j + 1]).ln();
        }
    }

    let mut idx = vec![0usize; k];
    let mut m = vec![0.0; k];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for i in 0..k {
            let (mi, wi) = grids[i][idx[i]];
            m[i] = mi;
            w *= wi;
        }
        // the adjacent factors j = i and j = i - 1 are already in the weights
        let mut ln_g = ln_const + y_last * (sum_r - m.iter().sum::<f64>());
        for i in 0..k {
            for j in (i + 1)..k {
                ln_g += e * one_minus_exp(m[i] - m[j]).ln();
            }
            for j in (i + 1)..k {
                ln_g -= e * one_minus_exp(rr[i] - m[j]).ln();
                ln_g -= e * one_minus_exp(m[i] - rr[j + 1]).ln();
            }
        }
        total += w * ln_g.exp() * eval(&m, &y[..nv - 1], rules);

        let mut d = 0;
        loop {
            if d == k {
                return total;
            }
            idx[d] += 1;
            if idx[d] < grids[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Right-hand side of the principal specialization
/// `𝓕_r(0, -θ, ..., (1-M)θ)` for `r` of length `N ≤ M`.
pub fn principal_closed_form(r: &[f64], m_vars: usize, theta: f64) -> f64 {
    let n = r.len();
    let mut ln = 0.0;
    for i in 1..=n {
        for j in (i + 1)..=m_vars {
            ln += ln_gamma(theta * (j - i) as f64) - ln_gamma(theta * (j - i + 1) as f64);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            ln += theta * ((-r[j]).exp() - (-r[i]).exp()).ln();
        }
        ln += theta * (m_vars - n) as f64 * one_minus_exp(r[i]).ln();
    }
    ln.exp()
}

/// Dual principal specialization.
pub fn dual_principal_closed_form(r: &[f64], m_vars: usize, theta: f64) -> f64 {
    principal_closed_form(r, m_vars, theta) * dual_factor(r, theta)
}

/// `(0, -θ, ..., (1-M)θ)`.
pub fn principal_point(m_vars: usize, theta: f64) -> Vec<f64> {
    (0..m_vars).map(|i| -(i as f64) * theta).collect()
}

/// Both sides of `∫ 𝓕̃_r(a) 𝓕_r(b) dr = ∏ Γ(-a_i-b_j)/Γ(θ-a_i-b_j)`.
///
/// Only one-variable sides are supported: the left side is then a
/// one-dimensional integral over `r > 0`, truncated where the integrand has
/// decayed below `1e-14` of its scale.
pub fn cauchy_check(a: &[f64], b: &[f64], theta: f64, quad: &QuadSpec) -> Result<(f64, f64)> {
    if a.len() != 1 || b.len() != 1 {
        return domain("the Cauchy identity check supports one variable on each side");
    }
    if !(theta > 0.0) {
        return domain("theta must be positive");
    }
    let s = a[0] + b[0];
    if !(s < 0.0) {
        return domain(format!("need a + b < 0, got {s}"));
    }
    let rhs = gamma(-s) / gamma(theta - s);
    let rules = Rules::new(theta, quad)?;
    let integrand = |r: f64| -> f64 {
        let r = [r];
        dual_factor(&r, theta) * eval(&r, a, &rules) * eval(&r, b, &rules)
    };
    // e^{s R} below 1e-14 of the bulk, with room for the polynomial prefactor
    let cutoff = (14.0 * std::f64::consts::LN_10 + 10.0) / -s;
    let lhs = tanh_sinh(0.0, cutoff, 1e-13, |r, _, _| integrand(r))?;
    let tail = integrand(cutoff).abs() * cutoff;
    if tail > 1e-12 * lhs.abs() {
        return numeric("Cauchy integrand has not decayed at the truncation point");
    }
    Ok((lhs, rhs))
}

/// `B_I(y; θ) = ∏_{i∈I, j∉I} (y_i - y_j - θ)/(y_i - y_j)`.
pub fn b_coefficient(y: &[f64], subset: &[usize], theta: f64) -> f64 {
    let mut v = 1.0;
    for &i in subset {
        for j in 0..y.len() {
            if !subset.contains(&j) {
                v *= (y[i] - y[j] - theta) / (y[i] - y[j]);
            }
        }
    }
    v
}

/// `(Σ_{|I|=k} B_I(y) 𝓕_r(y - 1_I), e_k(e^{-r}, 1, ..., 1) 𝓕_r(y))`.
pub fn eigen_check(r: &[f64], theta: f64, n_vars: usize, k: usize, base_y: &[f64], quad: &QuadSpec) -> Result<(f64, f64)> {
    if base_y.len() != n_vars {
        return domain("base_y must have n_vars entries");
    }
    if k == 0 || k > n_vars {
        return domain("need 1 ≤ k ≤ n_vars");
    }
    for i in 0..n_vars {
        for j in 0..i {
            if base_y[i] == base_y[j] {
                return domain("base_y entries must be distinct");
            }
        }
    }
    let point = HOPoint::new(r.to_vec(), base_y.to_vec(), theta)?;
    let rules = Rules::new(theta, quad)?;
    let mut applied = 0.0;
    for subset in subsets(n_vars, k) {
        let mut y = base_y.to_vec();
        for &i in &subset {
            y[i] -= 1.0;
        }
        applied += b_coefficient(base_y, &subset, theta) * eval(&point.r, &y, &rules);
    }
    let mut vars: Vec<f64> = r.iter().map(|ri| (-ri).exp()).collect();
    vars.resize(n_vars, 1.0);
    let ek = crate::special::elementary_symmetric(&vars)[k];
    let expected = ek * eval(&point.r, &point.y, &rules);
    Ok((applied, expected))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
        .collect()
}

/// Relative residual of the Calogero–Sutherland eigen-equation for two
/// labels, with second derivatives by central differences of step `fd_step`.
pub fn calogero_residual(r: &[f64], y: &[f64], theta: f64, fd_step: f64, quad: &QuadSpec) -> Result<f64> {
    if r.len() != 2 || y.len() != 2 {
        return domain("the Calogero check takes two labels and two variables");
    }
    if !(r[0] - r[1] > 0.1 && r[1] > 0.0) {
        return domain("need r₁ - r₂ > 0.1 and r₂ > 0");
    }
    if !(fd_step > 0.0 && fd_step < 0.25 * (r[0] - r[1]).min(r[1])) {
        return domain("finite-difference step too large for this label");
    }
    let rules = Rules::new(theta, quad)?;
    let f = |a: f64, b: f64| eval(&[a, b], y, &rules);
    let h = fd_step;
    let f0 = f(r[0], r[1]);
    let d11 = (f(r[0] + h, r[1]) - 2.0 * f0 + f(r[0] - h, r[1])) / (h * h);
    let d22 = (f(r[0], r[1] + h) - 2.0 * f0 + f(r[0], r[1] - h)) / (h * h);
    let potential = theta * (1.0 - theta) / (2.0 * (0.5 * (r[0] - r[1])).sinh().powi(2));
    let lhs = d11 + d22 + potential * f0;
    let rhs = (y[0] * y[0] + y[1] * y[1]) * f0;
    Ok(((lhs - rhs) / f0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q(n: usize) -> QuadSpec {
        QuadSpec {
            nodes_per_interval: n,
            scheme: QuadScheme::GaussJacobiEndpoint,
        }
    }

    #[test]
    fn one_variable_is_exponential() {
        let p = HOPoint::new(vec![1.3], vec![-0.4], 0.7).unwrap();
        assert_eq!(ho_eval(&p, &q(8)).unwrap(), (-0.4f64 * 1.3).exp());
    }

    #[test]
    fn dimension_count() {
        assert_eq!(integral_dimension(1, 1), 0);
        assert_eq!(integral_dimension(2, 2), 1);
        assert_eq!(integral_dimension(1, 3), 2);
        assert_eq!(integral_dimension(2, 3), 3);
        assert_eq!(integral_dimension(3, 3), 3);
        assert!(HOPoint::new(vec![3.0, 2.0], vec![0.0; 4], 1.0).is_err());
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(HOPoint::new(vec![1.0, 1.0], vec![0.0, 0.0], 1.0).is_err());
        assert!(HOPoint::new(vec![1.0, 2.0], vec![0.0, 0.0], 1.0).is_err());
        assert!(HOPoint::new(vec![1.0], vec![], 1.0).is_err());
    }

    #[test]
    fn principal_two_by_two() {
        for theta in [0.5, 1.0, 2.5] {
            let r = vec![1.7, 0.4];
            let p = HOPoint::new(r.clone(), principal_point(2, theta), theta).unwrap();
            let v = ho_eval(&p, &q(40)).unwrap();
            let expected = gamma(theta) / gamma(2.0 * theta) * ((-0.4f64).exp() - (-1.7f64).exp()).powf(theta);
            assert_relative_eq!(v, expected, max_relative = 1e-10);
            assert_relative_eq!(principal_closed_form(&r, 2, theta), expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn principal_with_padding() {
        let r2 = [1.9, 0.7];
        for theta in [0.4, 1.0, 2.0] {
            for (r, m) in [(&r2[..1], 1), (&r2[..1], 2), (&r2[..1], 3), (&r2[..], 2), (&r2[..], 3)] {
                let p = HOPoint::new(r.to_vec(), principal_point(m, theta), theta).unwrap();
                let v = ho_eval(&p, &q(24)).unwrap();
                let dual = ho_dual_eval(&p, &q(24)).unwrap();
                assert_relative_eq!(v, principal_closed_form(r, m, theta), max_relative = 1e-8);
                assert_relative_eq!(dual, dual_principal_closed_form(r, m, theta), max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn dual_at_theta_one_is_primal() {
        let p = HOPoint::new(vec![2.0, 0.5], vec![0.3, -0.2], 1.0).unwrap();
        assert_relative_eq!(ho_eval(&p, &q(20)).unwrap(), ho_dual_eval(&p, &q(20)).unwrap(), max_relative = 1e-15);
        let p = HOPoint::new(vec![0.8], vec![0.0], 0.3).unwrap();
        let expected = one_minus_exp(0.8).powf(-0.7) / gamma(0.3);
        assert_relative_eq!(ho_dual_eval(&p, &q(8)).unwrap(), expected, max_relative = 1e-13);
    }

    #[test]
    fn symmetric_and_homogeneous() {
        let theta = 0.6;
        let r = vec![2.1, 0.9];
        let a = ho_eval(&HOPoint::new(r.clone(), vec![0.4, -0.7], theta).unwrap(), &q(40)).unwrap();
        let b = ho_eval(&HOPoint::new(r.clone(), vec![-0.7, 0.4], theta).unwrap(), &q(40)).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
        let shift = 0.35;
        let c = ho_eval(&HOPoint::new(r.clone(), vec![0.4 + shift, -0.7 + shift], theta).unwrap(), &q(40)).unwrap();
        assert_relative_eq!(c, (shift * 3.0f64).exp() * a, max_relative = 1e-10);
    }

    #[test]
    fn cauchy_one_by_one() {
        for (a, b, theta) in [(-0.5, -0.3, 0.7), (0.2, -1.1, 2.0), (-0.05, -0.1, 1.0)] {
            let (lhs, rhs) = cauchy_check(&[a], &[b], theta, &q(8)).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
        }
        assert!(cauchy_check(&[0.5], &[0.1], 1.0, &q(8)).is_err());
    }

    #[test]
    fn eigenrelation_small() {
        let (applied, expected) = eigen_check(&[0.9], 1.3, 1, 1, &[0.2], &q(8)).unwrap();
        assert_relative_eq!(applied, expected, max_relative = 1e-14);
        for theta in [0.5, 1.0, 1.7] {
            for k in 1..=2 {
                let (applied, expected) = eigen_check(&[1.6, 0.5], theta, 2, k, &[0.3, -0.45], &q(40)).unwrap();
                assert_relative_eq!(applied, expected, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn calogero_second_order() {
        let r = [1.5, 0.6];
        let y = [0.4, -0.9];
        let at_one = calogero_residual(&r, &y, 1.0, 1e-3, &q(40)).unwrap();
        assert!(at_one < 1e-4);
        let coarse = calogero_residual(&r, &y, 0.5, 0.08, &q(40)).unwrap();
        let fine = calogero_residual(&r, &y, 0.5, 0.04, &q(40)).unwrap();
        assert!(fine < coarse / 3.0, "{coarse} -> {fine}");
    }
}
