//! Freezing at large θ: Jacobi roots, the θ-scaled covariance of e₁ and
//! sampled fluctuations around the roots.
//!
//! Usage: `cargo run --release --example large_theta [theta samples]`

use jacobi_corners::beta_infinity::{cauchy_summary, fluctuation_report, jacobi_roots, theta_scaled_cov_sequence};
use jacobi_corners::model::ObservableSpec;
use jacobi_corners::sampler::SamplerConfig;
use jacobi_corners::EnsembleParams;
use num_rational::Rational64;

fn main() -> jacobi_corners::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let theta = args.first().copied().unwrap_or(1e4);
    let count = args.get(1).copied().unwrap_or(50_000.0) as usize;
    let (n, m, alpha) = (3, 3, 2.0);
    for level in 1..=n {
        println!("roots at level {level}: {:?}", jacobi_roots(level, m, alpha)?.roots);
    }

    let e1 = ObservableSpec::elementary(1, 1);
    let grid: Vec<Rational64> = [10, 100, 1_000, 10_000, 100_000].map(Rational64::from_integer).to_vec();
    let seq = theta_scaled_cov_sequence(Rational64::from_integer(2), m, &e1, &e1, &grid)?;
    for (t, v) in grid.iter().zip(&seq) {
        println!("θ = {t:>6}: θ Var e1(1) = {v:.12}");
    }
    let (monotone, last) = cauchy_summary(&seq);
    println!("monotone increments {monotone}, last relative increment {last:.2e}");

    let p = EnsembleParams::new(theta, alpha, m)?;
    let config = SamplerConfig {
        burn_in: 1000,
        thin: 5,
        ..SamplerConfig::with_seed(1)
    };
    let r = fluctuation_report(&p, n, &config, count, 5.0)?;
    println!("θ = {theta:e}: concentrated fraction {}", r.concentrated_fraction);
    for (i, (s, se)) in r.skewness.iter().enumerate() {
        println!("  skewness of coordinate {}: {s:+.4} ± {se:.4}", i + 1);
    }
    println!("  max |Cov - linearized| / s.e. = {:.2}", r.max_linearization_z());
    Ok(())
}
