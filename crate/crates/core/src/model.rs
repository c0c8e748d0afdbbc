//! Densities, normalization constants and observables of the corners process.
//!
//! Levels are numbered `n = 1, 2, …` and level `n` holds `min(n, M)` points in
//! `(0, 1)`. All densities are returned as natural logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::params::EnsembleParams;
use crate::quadrature::tanh_sinh;
use crate::special::{elementary_symmetric, ln_factorial, ln_gamma};

/// An interlacing array `𝔯^1 ≺ 𝔯^2 ≺ … ≺ 𝔯^N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornersArray {
    levels: Vec<Vec<f64>>,
}

impl CornersArray {
    /// Validates shape, ordering and interlacing against `M = m_param`.
    pub fn new(levels: Vec<Vec<f64>>, m_param: usize) -> Result<Self> {
        for (idx, lv) in levels.iter().enumerate() {
            let n = idx + 1;
            if lv.len() != n.min(m_param) {
                return domain(format!(
                    "level {n} has {} points, expected {}",
                    lv.len(),
                    n.min(m_param)
                ));
            }
            check_open_increasing(lv, n)?;
            if idx > 0 {
                check_interlacing(&levels[idx - 1], lv, n)?;
            }
        }
        Ok(Self { levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Level `n` (1-based).
    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n - 1]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub(crate) fn levels_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.levels
    }

    pub fn into_levels(self) -> Vec<Vec<f64>> {
        self.levels
    }

    /// Re-checks all invariants.
    pub fn validate(&self, m_param: usize) -> Result<()> {
        Self::new(self.levels.clone(), m_param).map(|_| ())
    }
}

fn check_open_increasing(z: &[f64], n: usize) -> Result<()> {
    for (i, &v) in z.iter().enumerate() {
        if !(v > 0.0 && v < 1.0) {
            return domain(format!("level {n}: entry {i} = {v} is not in (0,1)"));
        }
        if i > 0 && z[i - 1] >= v {
            return domain(format!("level {n}: entries not strictly increasing at {i}"));
        }
    }
    Ok(())
}

/// Checks `z ≺ y` where `y` is level `n` and `z` is level `n - 1`.
fn check_interlacing(z: &[f64], y: &[f64], n: usize) -> Result<()> {
    let ok = match y.len() - z.len() {
        1 => z.iter().enumerate().all(|(i, &v)| y[i] < v && v < y[i + 1]),
        0 => z
            .iter()
            .enumerate()
            .all(|(i, &v)| y[i] < v && y.get(i + 1).map_or(true, |&u| v < u)),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        domain(format!("levels {} and {n} do not interlace", n - 1))
    }
}

/// `ln S_n(a0, a1, γ)`, the Selberg integral.
pub fn log_selberg(n: usize, a0: f64, a1: f64, gamma: f64) -> Result<f64> {
    if n == 0 {
        return domain("Selberg dimension must be at least 1");
    }
    if !(a0 > 0.0 && a1 > 0.0) {
        return domain(format!("Selberg exponents must be positive, got ({a0}, {a1})"));
    }
    if !(gamma >= 0.0) {
        return domain(format!("Selberg gamma must be nonnegative, got {gamma}"));
    }
    let nf = n as f64;
    let mut s = 0.0;
    for j in 0..n {
        let jf = j as f64;
        s += ln_gamma(a0 + jf * gamma) + ln_gamma(a1 + jf * gamma) + ln_gamma(1.0 + (jf + 1.0) * gamma)
            - ln_gamma(a0 + a1 + (nf + jf - 1.0) * gamma)
            - ln_gamma(1.0 + gamma);
    }
    Ok(s)
}

fn sum_ln_gaps(z: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 1..z.len() {
        for i in 0..j {
            s += (z[j] - z[i]).ln();
        }
    }
    s
}

fn sum_ln_cross(y: &[f64], z: &[f64]) -> f64 {
    y.iter()
        .map(|&a| z.iter().map(|&b| (a - b).abs().ln()).sum::<f64>())
        .sum()
}

/// Log of the normalized density of level `n` at `z`.
pub fn log_level_density(params: &EnsembleParams, n: usize, z: &[f64]) -> Result<f64> {
    let k = params.level_len(n.max(1));
    if n == 0 || z.len() != k {
        return domain(format!("level {n} needs {k} points, got {}", z.len()));
    }
    check_open_increasing(z, n)?;
    let (theta, alpha, m) = (params.theta(), params.alpha(), params.m_param());
    let gap = (m as f64 - n as f64).abs();
    let a0 = theta * alpha;
    let a1 = theta * gap + theta;
    let log_const = ln_factorial(k) - log_selberg(k, a0, a1, theta)?;
    let weights: f64 = z
        .iter()
        .map(|&x| (a0 - 1.0) * x.ln() + (a1 - 1.0) * (-x).ln_1p())
        .sum();
    Ok(log_const + 2.0 * theta * sum_ln_gaps(z) + weights)
}

/// Log density of `𝔯^{n-1} = z` given `𝔯^n = y`.
pub fn log_backward_density(params: &EnsembleParams, n: usize, y: &[f64], z: &[f64]) -> Result<f64> {
    if n < 2 {
        return domain("backward transitions start at level 2");
    }
    let m = params.m_param();
    if y.len() != n.min(m) || z.len() != (n - 1).min(m) {
        return domain(format!(
            "backward density at level {n}: got |y| = {}, |z| = {}",
            y.len(),
            z.len()
        ));
    }
    check_open_increasing(y, n)?;
    check_open_increasing(z, n - 1)?;
    check_interlacing(z, y, n)?;
    let theta = params.theta();
    let nf = n as f64;
    let common = sum_ln_gaps(z) + (1.0 - 2.0 * theta) * sum_ln_gaps(y)
        + (theta - 1.0) * sum_ln_cross(y, z)
        - nf * theta * z.iter().map(|v| v.ln()).sum::<f64>();
    if n <= m {
        Ok(ln_gamma(nf * theta) - nf * ln_gamma(theta)
            + (nf - 1.0) * theta * y.iter().map(|v| v.ln()).sum::<f64>()
            + common)
    } else {
        let mf = m as f64;
        let c = ln_gamma(nf * theta) - mf * ln_gamma(theta) - ln_gamma(nf * theta - mf * theta);
        let ys: f64 = y
            .iter()
            .map(|&v| (nf - 1.0) * theta * v.ln() + (theta * (mf - nf - 1.0) + 1.0) * (-v).ln_1p())
            .sum();
        let zs: f64 = z.iter().map(|&v| (theta * (nf - mf) - 1.0) * (-v).ln_1p()).sum();
        Ok(c + ys + zs + common)
    }
}

/// Log density of `𝔯^n = y` given `𝔯^{n-1} = z`, obtained by Bayes' rule from
/// the backward transition and the two level densities.
pub fn log_forward_density(params: &EnsembleParams, n: usize, z: &[f64], y: &[f64]) -> Result<f64> {
    if n == 1 {
        if !z.is_empty() {
            return domain("level 0 is empty");
        }
        return log_level_density(params, 1, y);
    }
    Ok(log_backward_density(params, n, y, z)? + log_level_density(params, n, y)?
        - log_level_density(params, n - 1, z)?)
}

/// Log of the joint density of levels `1..=big_n`.
///
/// Computed as the level-`N` density times the chain of backward transitions,
/// so it is normalized on the interlacing cone.
pub fn log_joint_density(params: &EnsembleParams, big_n: usize, corners: &CornersArray) -> Result<f64> {
    if big_n == 0 || corners.depth() < big_n {
        return domain(format!(
            "joint density needs {big_n} levels, array has {}",
            corners.depth()
        ));
    }
    let mut total = log_level_density(params, big_n, corners.level(big_n))?;
    for n in 2..=big_n {
        total += log_backward_density(params, n, corners.level(n), corners.level(n - 1))?;
    }
    Ok(total)
}

/// Exponents of the factors of the joint density that involve a single site
/// on level `k` of a process truncated at level `big_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiteExponents {
    /// Exponent of `|x - x'|` for `x'` on the same level.
    pub same_level: f64,
    /// Exponent of `|x - x'|` for `x'` on an adjacent level.
    pub adjacent: f64,
    pub ln_x: f64,
    pub ln_one_minus_x: f64,
}

pub fn site_exponents(params: &EnsembleParams, big_n: usize, k: usize) -> SiteExponents {
    let theta = params.theta();
    let alpha = params.alpha();
    let m = params.m_param();
    let top = k == big_n;
    let mut same_level = 0.0;
    if !top {
        same_level += 1.0;
    }
    if k >= 2 {
        same_level += 1.0 - 2.0 * theta;
    }
    if top {
        same_level += 2.0 * theta;
    }
    let ln_x = if top {
        theta * (alpha + k as f64 - 1.0) - 1.0
    } else {
        -2.0 * theta
    };
    let ln_one_minus_x = if big_n <= m {
        if top {
            theta * (m - big_n) as f64 + theta - 1.0
        } else {
            0.0
        }
    } else if k == m {
        theta - 1.0
    } else {
        0.0
    };
    SiteExponents {
        same_level,
        adjacent: theta - 1.0,
        ln_x,
        ln_one_minus_x,
    }
}

/// The open interval available to site `i` (0-based) of level `k` given all
/// other sites.
pub fn site_interval(corners: &CornersArray, k: usize, i: usize) -> (f64, f64) {
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;
    if k < corners.depth() {
        let up = corners.level(k + 1);
        lo = lo.max(up[i]);
        if let Some(&u) = up.get(i + 1) {
            hi = hi.min(u);
        }
    }
    if k >= 2 {
        let down = corners.level(k - 1);
        if i > 0 {
            lo = lo.max(down[i - 1]);
        }
        if let Some(&d) = down.get(i) {
            hi = hi.min(d);
        }
    }
    (lo, hi)
}

/// `Σ ln|x - p|` over `points`, skipping index `skip`. Products are formed in
/// short blocks before taking a logarithm.
#[inline]
fn ln_abs_diff_sum(x: f64, points: &[f64], skip: Option<usize>) -> f64 {
    const BLOCK: usize = 8;
    let mut s = 0.0;
    let mut prod = 1.0;
    let mut count = 0;
    for (j, &p) in points.iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        prod *= (x - p).abs();
        count += 1;
        if count == BLOCK {
            s += prod.ln();
            prod = 1.0;
            count = 0;
        }
    }
    s + prod.ln()
}

/// Log of the full conditional of site `(k, i)` at value `x`, up to an
/// additive constant. Levels above `corners.depth()` are absent.
pub fn site_log_conditional(
    exps: &SiteExponents,
    corners: &CornersArray,
    k: usize,
    i: usize,
    x: f64,
) -> f64 {
    let mut v = 0.0;
    if exps.same_level != 0.0 {
        v += exps.same_level * ln_abs_diff_sum(x, corners.level(k), Some(i));
    }
    if exps.adjacent != 0.0 {
        let mut cross = 0.0;
        if k < corners.depth() {
            cross += ln_abs_diff_sum(x, corners.level(k + 1), None);
        }
        if k >= 2 {
            cross += ln_abs_diff_sum(x, corners.level(k - 1), None);
        }
        v += exps.adjacent * cross;
    }
    if exps.ln_x != 0.0 {
        v += exps.ln_x * x.ln();
    }
    if exps.ln_one_minus_x != 0.0 {
        v += exps.ln_one_minus_x * (-x).ln_1p();
    }
    v
}

/// Numerical and closed-form sides of the Dixon integration formula.
///
/// With `b = Some(b)` the integrand carries `|b - t_i|^{-α_j}`; with `None`
/// the `b → ∞` form is used. Only `n = a.len() - 1 ≤ 2` is supported.
pub fn dixon_check(alphas: &[f64], a: &[f64], b: Option<f64>) -> Result<(f64, f64)> {
    let n1 = a.len();
    if alphas.len() != n1 || !(2..=3).contains(&n1) {
        return domain("dixon_check needs n + 1 = 2 or 3 alphas and nodes");
    }
    if alphas.iter().any(|&x| !(x > 0.0)) {
        return domain("dixon_check: alphas must be positive");
    }
    if a.windows(2).any(|w| w[0] >= w[1]) {
        return domain("dixon_check: nodes must be strictly increasing");
    }
    if let Some(b) = b {
        if b >= a[0] && b <= a[n1 - 1] {
            return domain("dixon_check: b must lie outside [a_1, a_{n+1}]");
        }
    }
    let total: f64 = alphas.iter().sum();
    let mut rhs = alphas.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(total);
    for j in 1..n1 {
        for i in 0..j {
            rhs += (alphas[i] + alphas[j] - 1.0) * (a[j] - a[i]).ln();
        }
    }
    if let Some(b) = b {
        rhs += a
            .iter()
            .zip(alphas)
            .map(|(&ai, &al)| (al - total) * (b - ai).abs().ln())
            .sum::<f64>();
    }
    let rhs = rhs.exp();

    // Log of the integrand factor for one variable `t` lying in (a[s], a[s+1]).
    let one_var = |t: f64, s: usize, dl: f64, dr: f64| -> f64 {
        let mut v = 0.0;
        for j in 0..n1 {
            let d = if j == s {
                dl
            } else if j == s + 1 {
                dr
            } else {
                (t - a[j]).abs()
            };
            if alphas[j] != 1.0 {
                v += (alphas[j] - 1.0) * d.ln();
            }
        }
        if let Some(b) = b {
            v -= total * (b - t).abs().ln();
        }
        v
    };
    let tol = 1e-12;
    let lhs = if n1 == 2 {
        tanh_sinh(a[0], a[1], tol, |t, dl, dr| one_var(t, 0, dl, dr).exp())?
    } else {
        let mut err = None;
        let v = tanh_sinh(a[0], a[1], tol, |t1, dl1, dr1| {
            let f1 = one_var(t1, 0, dl1, dr1);
            match tanh_sinh(a[1], a[2], tol, |t2, dl2, dr2| {
                (f1 + one_var(t2, 1, dl2, dr2)).exp() * (dr1 + dl2)
            }) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        v
    };
    Ok((lhs, rhs))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    Power,
    Elementary,
}

/// `p_k(N; 𝔯)` or `e_k(N; 𝔯)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub degree: usize,
    pub level: usize,
    /// Append `N - M` ones to the level when `N > M`.
    pub pad_ones: bool,
}

impl ObservableSpec {
    pub fn power(degree: usize, level: usize) -> Self {
        Self {
            kind: ObservableKind::Power,
            degree,
            level,
            pad_ones: true,
        }
    }

    pub fn elementary(degree: usize, level: usize) -> Self {
        Self {
            kind: ObservableKind::Elementary,
            degree,
            level,
            pad_ones: true,
        }
    }

    pub fn without_padding(mut self) -> Self {
        self.pad_ones = false;
        self
    }

    pub fn label(&self) -> String {
        let k = match self.kind {
            ObservableKind::Power => "p",
            ObservableKind::Elementary => "e",
        };
        let pad = if self.pad_ones { "" } else { ",bare" };
        format!("{k}{}({}{pad})", self.degree, self.level)
    }

    /// Number of entries of the (possibly padded) multiset.
    pub fn padded_len(&self, m_param: usize) -> usize {
        if self.pad_ones {
            self.level
        } else {
            self.level.min(m_param)
        }
    }
}

/// Evaluates an observable on a single level vector.
pub fn observable_value(spec: &ObservableSpec, level: &[f64], m_param: usize) -> Result<f64> {
    if spec.degree == 0 || spec.level == 0 {
        return domain("observable degree and level must be at least 1");
    }
    let len = spec.level.min(m_param);
    if level.len() != len {
        return domain(format!(
            "observable on level {} expects {len} points, got {}",
            spec.level,
            level.len()
        ));
    }
    let pad = if spec.pad_ones { spec.level - len } else { 0 };
    match spec.kind {
        ObservableKind::Power => {
            let k = spec.degree as i32;
            Ok(level.iter().map(|x| x.powi(k)).sum::<f64>() + pad as f64)
        }
        ObservableKind::Elementary => {
            if spec.degree > len + pad {
                return domain(format!(
                    "e_{} needs at least {} entries, level has {}",
                    spec.degree,
                    spec.degree,
                    len + pad
                ));
            }
            let mut xs = level.to_vec();
            xs.extend(std::iter::repeat(1.0).take(pad));
            Ok(elementary_symmetric(&xs)[spec.degree])
        }
    }
}
