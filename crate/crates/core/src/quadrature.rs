//! One-dimensional quadrature rules: Gauss rules by Golub–Welsch, tanh–sinh
//! for endpoint singularities, and adaptive Gauss–Kronrod.

use serde::{Deserialize, Serialize};

use crate::error::{numeric, Result};
use crate::special::ln_gamma;
use crate::tridiag::symmetric_tridiagonal_eigen;

/// A Gauss rule on `[-1, 1]` for the weight it was built with.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn legendre(n: usize) -> Result<Self> {
        Self::jacobi(n, 0.0, 0.0)
    }

    /// Gauss–Jacobi rule for the weight `(1 - t)^a (1 + t)^b` on `[-1, 1]`.
    pub fn jacobi(n: usize, a: f64, b: f64) -> Result<Self> {
        assert!(n >= 1);
        assert!(a > -1.0 && b > -1.0, "Jacobi exponents must exceed -1");
        let (diag, off) = jacobi_recurrence(n, a, b);
        let (nodes, first) = symmetric_tridiagonal_eigen(&diag, &off)?;
        let mu0 = ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
            - ln_gamma(a + b + 2.0))
            .exp();
        let weights = first.iter().map(|v| mu0 * v * v).collect();
        Ok(Self { nodes, weights })
    }

    /// `∫_a^b f` with the rule mapped affinely (Legendre weight assumed).
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }

    /// Nodes and weights mapped to `[a, b]` (Legendre weight assumed).
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(t, w)| (mid + half * t, w * half))
    }
}

/// Monic three-term recurrence of Jacobi polynomials on `[-1, 1]`, as the
/// symmetric Jacobi matrix (diagonal, off-diagonal).
pub fn jacobi_recurrence(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let d = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        diag.push(d);
        if k + 1 < n {
            let j = kf + 1.0;
            let s = 2.0 * j + a + b;
            let beta = if j == 1.0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
            } else {
                4.0 * j * (j + a) * (j + b) * (j + a + b) / (s * s * (s + 1.0) * (s - 1.0))
            };
            off.push(beta.sqrt());
        }
    }
    (diag, off)
}

/// Tanh–sinh quadrature of `f` over `(a, b)`.
///
/// The integrand receives `(x, x - a, b - x)` with both distances computed
/// without cancellation, so algebraic or logarithmic endpoint singularities
/// can be evaluated accurately.
pub fn tanh_sinh<F>(a: f64, b: f64, tol: f64, mut f: F) -> Result<f64>
where
    F: FnMut(f64, f64, f64) -> f64,
{
    let len = b - a;
    if len == 0.0 {
        return Ok(0.0);
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut eval = |t: f64| -> f64 {
        let u = half_pi * t.sinh();
        // Distance from the nearer endpoint, as a fraction of the length.
        let frac = 1.0 / (1.0 + (2.0 * u.abs()).exp());
        let w = half_pi * t.cosh() * 2.0 * frac * (1.0 - frac) * 2.0;
        if w == 0.0 || frac < 1e-200 || len.abs() * frac < f64::MIN_POSITIVE {
            return 0.0;
        }
        let (x, dl, dr) = if t >= 0.0 {
            let dr = len * frac;
            (b - dr, len - dr, dr)
        } else {
            let dl = len * frac;
            (a + dl, dl, len - dl)
        };
        0.5 * len * w * f(x, dl, dr)
    };
    let t_max = 6.5;
    let mut h = 1.0;
    let mut sum = eval(0.0);
    let mut k = 1.0;
    while k * h <= t_max {
        sum += eval(k * h) + eval(-k * h);
        k += 1.0;
    }
    let mut estimate = sum * h;
    let mut err = f64::INFINITY;
    for _level in 0..12 {
        h *= 0.5;
        let mut t = h;
        let mut add = 0.0;
        while t <= t_max {
            add += eval(t) + eval(-t);
            t += 2.0 * h;
        }
        sum += add;
        let next = sum * h;
        if !next.is_finite() {
            return numeric("tanh-sinh quadrature produced a non-finite value");
        }
        err = (next - estimate).abs();
        estimate = next;
        if err <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(estimate);
        }
    }
    numeric(format!(
        "tanh-sinh quadrature did not reach relative tolerance {tol:e} on ({a}, {b}): \
         estimate {estimate:e}, last change {err:e}"
    ))
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WK[7];
    let mut g = fc * GK_WG[3];
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature.
pub fn adaptive_gauss_kronrod<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    mut f: F,
) -> Result<f64> {
    let (v, e) = gk15(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    for _ in 0..2000 {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    numeric("adaptive Gauss-Kronrod exceeded its subdivision budget")
}

/// Quadrature settings for the nested interlacing integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub nodes_per_interval: usize,
    pub scheme: QuadScheme,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadScheme {
    GaussLegendre,
    /// Gauss–Jacobi with the endpoint exponent of the integrand factored
    /// into the weight.
    GaussJacobiEndpoint,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            nodes_per_interval: 40,
            scheme: QuadScheme::GaussJacobiEndpoint,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_is_exact_on_polynomials() {
        let rule = GaussRule::legendre(5).unwrap();
        // degree 9 polynomial
        let v = rule.integrate(0.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4));
        let exact = 2f64.powi(10) / 10.0 - 3.0 * 2f64.powi(5) / 5.0;
        assert!((v - exact).abs() < 1e-11 * exact.abs());
    }

    #[test]
    fn jacobi_weights_integrate_the_weight() {
        // ∫ (1-t)^(-1/2) (1+t)^(-1/2) dt = π
        let rule = GaussRule::jacobi(12, -0.5, -0.5).unwrap();
        let s: f64 = rule.weights.iter().sum();
        assert!((s - std::f64::consts::PI).abs() < 1e-13);
        // ∫ (1-t)^(1/2)(1+t)^(3/2) t dt = -π/8 ... check against adaptive quadrature instead
        let rule = GaussRule::jacobi(10, 0.5, 1.5).unwrap();
        let gj: f64 = rule.nodes.iter().zip(&rule.weights).map(|(t, w)| w * t * t).sum();
        let reference = tanh_sinh(-1.0, 1.0, 1e-13, |t, dl, dr| dr.sqrt() * dl.powf(1.5) * t * t)
            .unwrap();
        assert!((gj - reference).abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_1^2 (x-1)^(-1/2) dx = 2
        let v = tanh_sinh(1.0, 2.0, 1e-12, |_, dl, _| dl.powf(-0.5)).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
        // ∫_0^1 ln x dx = -1
        let v = tanh_sinh(0.0, 1.0, 1e-12, |_, dl, _| dl.ln()).unwrap();
        assert!((v + 1.0).abs() < 1e-10);
    }

    #[test]
    fn gauss_kronrod_smooth() {
        let v = adaptive_gauss_kronrod(0.0, std::f64::consts::PI, 1e-14, 1e-13, f64::sin).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }
}
