//! Gibbs sampler against the exact moment oracle on a small corners process.
//!
//! Usage: `cargo run --release --example sampler_vs_exact [theta_num theta_den alpha M N samples]`

use jacobi_corners::exact::{self, EvalOptions};
use jacobi_corners::model::ObservableSpec;
use jacobi_corners::sampler::{estimate_observables, sample_observables, SamplerConfig};
use jacobi_corners::EnsembleParams;
use num_rational::Rational64;

fn main() -> jacobi_corners::Result<()> {
    let args: Vec<i64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let get = |i: usize, d: i64| args.get(i).copied().unwrap_or(d);
    let theta = Rational64::new(get(0, 1), get(1, 2));
    let alpha = Rational64::from_integer(get(2, 1));
    let m = get(3, 2) as usize;
    let n = get(4, 4) as usize;
    let count = get(5, 100_000) as usize;
    let p = EnsembleParams::from_ratios(theta, alpha, m)?;

    let mut specs = Vec::new();
    for level in 1..=n {
        specs.push(ObservableSpec::power(1, level));
        specs.push(ObservableSpec::power(2, level));
    }
    let t = std::time::Instant::now();
    let series = sample_observables(&p, n, &SamplerConfig::with_seed(1), count, &specs)?;
    let est = estimate_observables(&series)?;
    println!("{count} samples in {:.2?}", t.elapsed());
    println!("{:<10} {:>14} {:>14} {:>12} {:>8}", "statistic", "exact", "mc", "se", "z");
    let opts = EvalOptions::default();
    let row = |name: String, exact: f64, mc: f64, se: f64| {
        println!("{name:<10} {exact:>14.8} {mc:>14.8} {se:>12.2e} {:>8.2}", (mc - exact) / se);
    };
    for (j, s) in specs.iter().enumerate() {
        let e = exact::expectation(&p, &[*s], &opts)?.to_f64();
        row(format!("E {}", s.label()), e, est.means[j].mean, est.means[j].std_error);
    }
    for level in 1..=n {
        let j = 2 * (level - 1);
        let a = ObservableSpec::power(1, level);
        let v = exact::covariance(&p, &a, &a, &opts)?.to_f64();
        row(format!("Var p1({level})"), v, est.covariance[j][j].mean, est.covariance[j][j].std_error);
        if level > 1 {
            let b = ObservableSpec::power(1, level - 1);
            let c = exact::covariance(&p, &a, &b, &opts)?.to_f64();
            let e = &est.covariance[j][j - 2];
            row(format!("Cov {level},{}", level - 1), c, e.mean, e.std_error);
        }
    }
    Ok(())
}
