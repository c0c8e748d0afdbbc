//! Exact moments from the difference operators.
//!
//! Usage: `cargo run --release --example exact_moments [L]`

use std::time::Instant;

use jacobi_corners::exact::{self, ArithmeticMode, EvalOptions};
use jacobi_corners::model::ObservableSpec;
use jacobi_corners::EnsembleParams;
use num_rational::Rational64;

fn main() -> jacobi_corners::Result<()> {
    let l: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(16);

    let p = EnsembleParams::from_ratios(Rational64::new(1, 2), Rational64::from_integer(3), 2)?;
    println!("theta = 1/2, alpha = 3, M = 2");
    println!("  E p1(1)      = {}", exact::expectation_p(&p, &[(1, 1)])?);
    println!("  Var p1(1)    = {}", exact::covariance_p(&p, (1, 1), (1, 1))?);
    println!("  E e2(2)      = {}", exact::expectation_e(&p, &[(2, 2)])?);
    println!("  E p2(4) p1(3) = {}", exact::expectation_p(&p, &[(4, 2), (3, 1)])?);

    // M = alpha = L, levels L and L/2
    let p = EnsembleParams::from_ratios(Rational64::from_integer(1), Rational64::from_integer(l as i64), l)?;
    for k in 1..=2 {
        for mode in modes(l) {
            let t = Instant::now();
            let c = exact::covariance(
                &p,
                &ObservableSpec::power(k, l),
                &ObservableSpec::power(k, l / 2),
                &EvalOptions::with_mode(mode),
            )?;
            println!(
                "L = {l}, k = {k}, {mode:?}: theta Cov = {:.15e} ({:.2?})",
                c.to_f64(),
                t.elapsed()
            );
        }
    }
    Ok(())
}

fn modes(l: usize) -> Vec<ArithmeticMode> {
    if l <= 16 {
        vec![ArithmeticMode::Float64, ArithmeticMode::MultiPrecision { bits: 256 }]
    } else {
        vec![ArithmeticMode::Float64]
    }
}
