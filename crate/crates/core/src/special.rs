//! Log-gamma based special functions.

pub use statrs::function::gamma::{gamma, ln_gamma};

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln k!`
pub fn ln_factorial(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// `x ln y` with the convention `0 · ln 0 = 0`.
#[inline]
pub fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Elementary symmetric polynomials `e_0..=e_n` of `xs`.
pub fn elementary_symmetric(xs: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; xs.len() + 1];
    e[0] = 1.0;
    for (n, &x) in xs.iter().enumerate() {
        for k in (1..=n + 1).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn esym_small() {
        let e = elementary_symmetric(&[0.2, 0.5]);
        assert!((e[1] - 0.7).abs() < 1e-15);
        assert!((e[2] - 0.1).abs() < 1e-15);
        let e = elementary_symmetric(&[1.0, 2.0, 3.0]);
        assert_eq!(e, vec![1.0, 6.0, 11.0, 6.0]);
    }

    #[test]
    fn beta_function() {
        // B(2,3) = 1/12
        assert!((ln_beta(2.0, 3.0).exp() - 1.0 / 12.0).abs() < 1e-14);
    }
}
