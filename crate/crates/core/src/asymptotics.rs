//! Large-`L` limit objects: the double-contour covariance of power sums, the
//! map `Ω` onto the upper half-plane, the frozen boundary, the Gaussian Free
//! Field kernel and the Chebyshev closed form.
//!
//! Throughout, `f(u) = u/(u+N̂) · (u-α̂)/(u-α̂-M̂)` and `P = α̂ + M̂`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, numeric, Result};
use crate::params::{HatParams, LevelHeight};
use crate::quadrature::{adaptive_gauss_kronrod, tanh_sinh};

const I: Complex64 = Complex64::new(0.0, 1.0);
const MIN_NODES: usize = 64;
const MAX_NODES: usize = 8192;
const CONTOUR_TOL: f64 = 1e-12;

/// `C₁(N̂)`: centre of the level-`N̂` slice of the liquid region.
pub fn c1(hp: &HatParams, nh: LevelHeight) -> f64 {
    let (n, a, m) = (nh.get(), hp.alpha_hat, hp.m_hat);
    (n * m + (n + a) * (m + a)) / (n + a + m).powi(2)
}

/// `C₂(N̂)`: a quarter of the squared half-width of the slice.
pub fn c2(hp: &HatParams, nh: LevelHeight) -> f64 {
    let (n, a, m) = (nh.get(), hp.alpha_hat, hp.m_hat);
    m * (m + a) * n * (n + a) / (n + a + m).powi(4)
}

pub fn f_limit(hp: &HatParams, nh: LevelHeight, k: u32, u: Complex64) -> Result<Complex64> {
    let n = nh.get();
    let p = hp.alpha_hat + hp.m_hat;
    if u == Complex64::new(-n, 0.0) || u == Complex64::new(p, 0.0) {
        return domain(format!("f has a pole at u = {u}"));
    }
    Ok(f_value(n, hp.alpha_hat, p, u).powu(k))
}

fn f_value(n: f64, alpha: f64, p: f64, u: Complex64) -> Complex64 {
    u / (u + n) * (u - alpha) / (u - p)
}

/// A level contour: the circle (or, at `N̂ = M̂`, the vertical line) on which
/// `f` is real.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub center: f64,
    pub radius: f64,
    pub nodes: usize,
    pub is_line: bool,
    /// Abscissa of the line when `is_line`.
    pub line_abscissa: f64,
    /// Inverse points `(a, b)` and modulus `ρ` with the contour equal to
    /// `|u - a| = ρ |u - b|`. Nodes are then uniform in the argument of
    /// `w = (u - a)/(u - b)`, which keeps `a` and `b` at `w = 0, ∞`.
    pub apollonius: Option<(f64, f64, f64)>,
    /// `+1` when the circle is traversed counterclockwise. Circles that
    /// contain `P` rather than `-N̂` are traversed clockwise, so that every
    /// contour winds once around `-N̂` and not around `P`.
    pub orientation: f64,
}

impl ContourSpec {
    /// Trapezoid nodes `u_j` and weights `du_j` of `∮ g(u) du`.
    pub fn nodes_and_weights(&self, n: usize) -> Vec<(Complex64, Complex64)> {
        let h = 2.0 * PI / n as f64;
        if let Some((a, b, rho)) = self.apollonius {
            // half-offset nodes avoid w = 1, the point at infinity of the line
            return (0..n)
                .map(|j| {
                    let w = Complex64::from_polar(rho, (j as f64 + 0.5) * h);
                    let u = (b * w - a) / (w - 1.0);
                    (u, (a - b) / (w - 1.0).powu(2) * I * w * h)
                })
                .collect();
        }
        (0..n)
            .map(|j| {
                let e = Complex64::from_polar(1.0, j as f64 * h);
                let u = self.center + self.radius * e;
                (u, self.orientation * I * self.radius * e * h)
            })
            .collect()
    }

    /// Whether `u` lies in the region this contour winds around.
    pub fn encloses(&self, u: Complex64) -> bool {
        if self.is_line {
            u.re < self.line_abscissa
        } else {
            let inside = (u - self.center).norm() < self.radius;
            inside == (self.orientation > 0.0)
        }
    }
}

pub fn level_contour(hp: &HatParams, nh: LevelHeight) -> ContourSpec {
    let (n, a, m) = (nh.get(), hp.alpha_hat, hp.m_hat);
    let p = a + m;
    if (n - m).abs() <= 1e-12 * m.max(1.0) {
        return ContourSpec {
            center: f64::INFINITY,
            radius: f64::INFINITY,
            nodes: MIN_NODES,
            is_line: true,
            line_abscissa: 0.5 * a,
            apollonius: Some((-n, p, 1.0)),
            orientation: 1.0,
        };
    }
    let center = n * p / (n - m);
    let radius = (m * p * n * (n + a)).sqrt() / (n - m).abs();
    // -N̂ and P are inverse points of the circle
    let far = center + radius;
    ContourSpec {
        center,
        radius,
        nodes: MIN_NODES,
        is_line: false,
        line_abscissa: f64::NAN,
        apollonius: Some((-n, p, (far + n).abs() / (far - p).abs())),
        orientation: if n < m { 1.0 } else { -1.0 },
    }
}

/// How the outer (`u₁`) integral is carried out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourMethod {
    /// Trapezoid rule on both level contours. Needs `N̂₁ > N̂₂`, and slows
    /// down as the two circles approach each other.
    OmegaCircles,
    /// The `u₁` contour is traded for minus a small circle around `P`, the
    /// only singularity it excludes (the integrand is `O(u₁^{-2})` at
    /// infinity). Valid for equal levels as well; the default.
    PoleComplement,
}

/// `θ^{-1}(2πi)^{-2} ∮∮ g₁(f₁(u₁)) g₂(f₂(u₂)) du₁du₂/(u₁-u₂)²` for polynomial
/// test functions `g₁, g₂` applied to the level-`N̂₁`, `N̂₂` values of `f`.
pub fn limit_covariance_with<G1, G2>(
    hp: &HatParams,
    theta: f64,
    a: (LevelHeight, &G1),
    b: (LevelHeight, &G2),
    method: ContourMethod,
) -> Result<f64>
where
    G1: Fn(Complex64) -> Complex64 + ?Sized,
    G2: Fn(Complex64) -> Complex64 + ?Sized,
{
    if !(theta > 0.0 && theta.is_finite()) {
        return domain(format!("theta must be positive, got {theta}"));
    }
    let (n1, g1) = a;
    let (n2, g2) = b;
    if n1 < n2 {
        return domain("limit covariance needs N̂₁ ≥ N̂₂");
    }
    if method == ContourMethod::OmegaCircles && n1 == n2 {
        return domain("equal levels cannot be put on two disjoint level contours");
    }
    let p = hp.alpha_hat + hp.m_hat;
    let c2_contour = level_contour(hp, n2);
    let h1 = |u: Complex64| g1(f_value(n1.get(), hp.alpha_hat, p, u));
    let h2 = |u: Complex64| g2(f_value(n2.get(), hp.alpha_hat, p, u));

    // value and the absolute mass of the summands, which sets the roundoff floor
    let evaluate = |n: usize| -> (Complex64, f64) {
        let outer = c2_contour.nodes_and_weights(n);
        let inner: Vec<(Complex64, Complex64)> = match method {
            ContourMethod::OmegaCircles => level_contour(hp, n1).nodes_and_weights(n),
            ContourMethod::PoleComplement => {
                let gap = outer
                    .iter()
                    .map(|(u, _)| (u - p).norm())
                    .fold(p + n1.get(), f64::min);
                let small = ContourSpec {
                    center: p,
                    radius: 0.5 * gap,
                    nodes: n,
                    is_line: false,
                    line_abscissa: f64::NAN,
                    apollonius: None,
                    orientation: -1.0,
                };
                small.nodes_and_weights(n.min(256))
            }
        };
        let inner: Vec<(Complex64, Complex64)> = inner.into_iter().map(|(u, w)| (u, h1(u) * w)).collect();
        let mut total = Complex64::new(0.0, 0.0);
        let mut mass = 0.0;
        for (u2, w2) in &outer {
            let (mut s, mut m) = (Complex64::new(0.0, 0.0), 0.0);
            for (u1, w1) in &inner {
                let t = w1 / (u1 - u2).powu(2);
                s += t;
                m += t.norm();
            }
            let hw = h2(*u2) * w2;
            total += hw * s;
            mass += hw.norm() * m;
        }
        let norm = 4.0 * PI * PI * theta;
        (total / (2.0 * PI * I).powu(2) / theta, mass / norm)
    };

    let mut n = MIN_NODES;
    let (mut prev, _) = evaluate(n);
    loop {
        n *= 2;
        let (cur, mass) = evaluate(n);
        let scale = cur.norm().max(1e-3 * mass);
        if (cur - prev).norm() <= CONTOUR_TOL * scale {
            if cur.im.abs() > 1e-10 * cur.re.abs().max(1.0) {
                return numeric(format!("contour integral has imaginary part {}", cur.im));
            }
            return Ok(cur.re);
        }
        if n >= MAX_NODES {
            return numeric(format!(
                "contour quadrature did not settle at {n} nodes (last change {:e})",
                (cur - prev).norm()
            ));
        }
        prev = cur;
    }
}

/// Limit of `Cov(p_{k₁}(N₁), p_{k₂}(N₂))` as `L → ∞`.
pub fn limit_covariance_p(
    hp: &HatParams,
    theta: f64,
    a: (LevelHeight, u32),
    b: (LevelHeight, u32),
) -> Result<f64> {
    if a.1 == 0 || b.1 == 0 {
        return domain("power-sum degrees must be at least 1");
    }
    let (k1, k2) = (a.1, b.1);
    let g1 = move |x: Complex64| x.powu(k1);
    let g2 = move |x: Complex64| x.powu(k2);
    let method = ContourMethod::PoleComplement;
    limit_covariance_with(hp, theta, (a.0, &g1), (b.0, &g2), method)
}

/// Endpoints `C₁ ∓ 2√C₂` of the level-`N̂` slice.
pub fn frozen_boundary(hp: &HatParams, nh: LevelHeight) -> (f64, f64) {
    let c = c1(hp, nh);
    let w = 2.0 * c2(hp, nh).sqrt();
    ((c - w).max(0.0), (c + w).min(1.0))
}

/// The point of the upper half-plane corresponding to `(x, N̂)`: the root of
/// `(x-1)u² + (x(N̂-α̂-M̂)+α̂)u - xN̂(α̂+M̂) = 0` with `Im u ≥ 0`.
pub fn omega(hp: &HatParams, nh: LevelHeight, x: f64) -> Result<Complex64> {
    let (l, r) = frozen_boundary(hp, nh);
    let slack = 1e-14;
    if !(x >= l - slack && x <= r + slack) {
        return domain(format!("x = {x} lies outside the slice [{l}, {r}]"));
    }
    let (n, al, m) = (nh.get(), hp.alpha_hat, hp.m_hat);
    let qa = x - 1.0;
    let qb = x * (n - al - m) + al;
    let qc = -x * n * (al + m);
    if qa.abs() < 1e-15 {
        if qb.abs() < 1e-15 {
            return domain("x = 1 on the level N̂ = M̂ is sent to the point at infinity");
        }
        return Ok(Complex64::new(-qc / qb, 0.0));
    }
    let disc = qb * qb - 4.0 * qa * qc;
    let im = (-disc).max(0.0).sqrt() / (2.0 * qa.abs());
    Ok(Complex64::new(-qb / (2.0 * qa), im))
}

/// `-(1/2π) ln|(z-w)/(z-w̄)|`.
pub fn gff_cov(z: Complex64, w: Complex64) -> Result<f64> {
    if !(z.im > 0.0 && w.im > 0.0) {
        return domain("GFF covariance needs points in the open upper half-plane");
    }
    if z == w {
        return domain("GFF covariance is singular on the diagonal");
    }
    Ok(-((z - w).norm() / (z - w.conj()).norm()).ln() / (2.0 * PI))
}

/// Covariance of `∫ x^{m₁} 𝓕(Ω(x, N̂₁)) dx` and `∫ x^{m₂} 𝓕(Ω(x, N̂₂)) dx`
/// over the two slices.
///
/// Each slice is parametrized by `x = C₁ + 2√C₂ cos φ`, which removes the
/// square-root behaviour of `Ω` at the endpoints. For equal levels the inner
/// integral is split at the logarithmic singularity and done by tanh–sinh.
pub fn height_cov(hp: &HatParams, a: (LevelHeight, u32), b: (LevelHeight, u32)) -> Result<f64> {
    // `None` is the point at infinity, where the kernel vanishes
    let slice = |nh: LevelHeight, m: u32| {
        let c = c1(hp, nh);
        let w = 2.0 * c2(hp, nh).sqrt();
        let line = level_contour(hp, nh).is_line;
        move |phi: f64| -> Result<(Option<Complex64>, f64)> {
            let x = (c + w * phi.cos()).clamp(0.0, 1.0);
            let z = if line && x >= 1.0 - 1e-15 {
                None
            } else {
                Some(omega(hp, nh, x)?)
            };
            Ok((z, x.powi(m as i32) * w * phi.sin()))
        }
    };
    let s1 = slice(a.0, a.1);
    let s2 = slice(b.0, b.1);
    let equal = a.0 == b.0;
    let tol = 1e-11;

    let mut failure = None;
    let mut kernel = |z: Option<Complex64>, w: Option<Complex64>| -> f64 {
        let (Some(z), Some(w)) = (z, w) else {
            return 0.0;
        };
        if z.im <= 0.0 || w.im <= 0.0 || z == w {
            return 0.0;
        }
        match gff_cov(z, w) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let mut errors = Vec::new();
    let outer = adaptive_gauss_kronrod(0.0, PI, 1e-13, 1e-10, |phi1| {
        let (z1, g1) = match s1(phi1) {
            Ok(v) => v,
            Err(e) => {
                errors.push(e);
                return 0.0;
            }
        };
        if g1 == 0.0 {
            return 0.0;
        }
        let mut inner = |phi2: f64| -> f64 {
            match s2(phi2) {
                Ok((z2, g2)) => kernel(z1, z2) * g2,
                Err(e) => {
                    errors.push(e);
                    0.0
                }
            }
        };
        let v = if equal {
            let left = tanh_sinh(0.0, phi1, tol, |t, _, _| inner(t));
            let right = tanh_sinh(phi1, PI, tol, |t, _, _| inner(t));
            match (left, right) {
                (Ok(l), Ok(r)) => l + r,
                (Err(e), _) | (_, Err(e)) => {
                    errors.push(e);
                    0.0
                }
            }
        } else {
            match adaptive_gauss_kronrod(0.0, PI, 1e-14, 1e-11, &mut inner) {
                Ok(v) => v,
                Err(e) => {
                    errors.push(e);
                    0.0
                }
            }
        };
        v * g1
    })?;
    if let Some(e) = errors.into_iter().next() {
        return Err(e);
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(outer)
}

/// `T_n(z)` by the three-term recurrence.
pub fn chebyshev_t(n: u32, z: Complex64) -> Complex64 {
    let (mut t0, mut t1) = (Complex64::new(1.0, 0.0), z);
    if n == 0 {
        return t0;
    }
    for _ in 1..n {
        let t2 = 2.0 * z * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    t1
}

/// `T̂_n(x) = T_n((x - C₁)/(2√C₂))` at level `N̂`.
pub fn chebyshev_hat(hp: &HatParams, nh: LevelHeight, n: u32, x: Complex64) -> Complex64 {
    let c = c1(hp, nh);
    let w = 2.0 * c2(hp, nh).sqrt();
    chebyshev_t(n, (x - c) / w)
}

/// Closed-form limit covariance of the Chebyshev statistics `𝒯(n₁, N̂₁)` and
/// `𝒯(n₂, N̂₂)`, `N̂₁ ≥ N̂₂`.
pub fn chebyshev_cov(hp: &HatParams, theta: f64, a: (u32, LevelHeight), b: (u32, LevelHeight)) -> Result<f64> {
    let (n1, h1) = a;
    let (n2, h2) = b;
    if n1 == 0 || n2 == 0 {
        return domain("Chebyshev degrees must be at least 1");
    }
    if h1 < h2 {
        return domain("chebyshev_cov needs N̂₁ ≥ N̂₂");
    }
    if n1 < n2 {
        return Ok(0.0);
    }
    let (al, m) = (hp.alpha_hat, hp.m_hat);
    let (b1, b2) = (h1.get(), h2.get());
    let x = (b2 - b1) / (b2 + al + m) * (m * (al + m) / (b1 * (al + b1))).sqrt();
    let y = (b1 + al + m) * (b2 * (al + b2)).sqrt() / ((b2 + al + m) * (b1 * (al + b1)).sqrt());
    let d = n1 - n2;
    // n₁!/((n₂-1)!(n₁-n₂)!) = n₂·C(n₁, n₂)
    let coef = n2 as f64 * binomial(n1, n2);
    let xd = if d == 0 { 1.0 } else { x.powi(d as i32) };
    Ok(coef / (4.0 * theta) * xd * y.powi(n2 as i32))
}

/// The same covariance by contour quadrature of `T̂_{n₁}(f₁) T̂_{n₂}(f₂)`.
pub fn chebyshev_contour_cov(
    hp: &HatParams,
    theta: f64,
    a: (u32, LevelHeight),
    b: (u32, LevelHeight),
) -> Result<f64> {
    let (n1, h1) = a;
    let (n2, h2) = b;
    let g1 = move |x: Complex64| chebyshev_hat(hp, h1, n1, x);
    let g2 = move |x: Complex64| chebyshev_hat(hp, h2, n2, x);
    let method = ContourMethod::PoleComplement;
    limit_covariance_with(hp, theta, (h1, &g1), (h2, &g2), method)
}

/// Coefficients `c₀..c_m` with `x^m = Σ c_j T̂_j(x)` at level `N̂`.
pub fn monomial_in_chebyshev(hp: &HatParams, nh: LevelHeight, m: u32) -> Vec<f64> {
    let c = c1(hp, nh);
    let w = 2.0 * c2(hp, nh).sqrt();
    let m = m as usize;
    let mut out = vec![0.0; m + 1];
    // x = c + w t and t^j = 2^{-j} Σ_i C(j, i) T_{|j-2i|}(t)
    for j in 0..=m {
        let outer = binomial(m as u32, j as u32) * c.powi((m - j) as i32) * w.powi(j as i32);
        let scale = 0.5f64.powi(j as i32);
        for i in 0..=j {
            let deg = (j as isize - 2 * i as isize).unsigned_abs();
            out[deg] += outer * scale * binomial(j as u32, i as u32);
        }
    }
    out
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
