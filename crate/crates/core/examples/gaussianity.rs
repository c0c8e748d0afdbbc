//! Fluctuations of linear statistics at a large scale: standardized third and
//! fourth cumulants, and the Monte Carlo covariance against the exact value.
//!
//! Usage: `cargo run --release --example gaussianity [L samples thin burn_in]`

use jacobi_corners::exact::{self, ArithmeticMode, EvalOptions};
use jacobi_corners::model::ObservableSpec;
use jacobi_corners::sampler::{empirical_cumulants, estimate_observables, sample_observables, SamplerConfig};
use jacobi_corners::{EnsembleParams, HatParams};

fn main() -> jacobi_corners::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let l = args.first().copied().unwrap_or(16);
    let count = args.get(1).copied().unwrap_or(20_000);
    let thin = args.get(2).copied().unwrap_or(1);
    let hat = HatParams::new(1.0, 1.0)?;
    let p: EnsembleParams = hat.at_scale(1.0, l)?;
    let (n1, n2) = (l, l / 2);
    let specs = [
        ObservableSpec::power(1, n1),
        ObservableSpec::power(2, n1),
        ObservableSpec::power(1, n2),
        ObservableSpec::power(2, n2),
    ];
    let config = SamplerConfig {
        thin,
        burn_in: args.get(3).copied().unwrap_or(2000),
        ..SamplerConfig::with_seed(7)
    };
    let t = std::time::Instant::now();
    let series = sample_observables(&p, n1, &config, count, &specs)?;
    println!("L = {l}: {count} samples (thin {thin}) in {:.2?}", t.elapsed());
    let est = estimate_observables(&series)?;
    let skew = empirical_cumulants(&series, 3)?;
    let kurt = empirical_cumulants(&series, 4)?;
    for (j, s) in specs.iter().enumerate() {
        println!(
            "{:<8} skewness {:+.4} ± {:.4}   excess kurtosis {:+.4} ± {:.4}   n_eff {:.0}",
            s.label(),
            skew[j].standardized,
            skew[j].std_error,
            kurt[j].standardized,
            kurt[j].std_error,
            est.means[j].n_effective
        );
    }
    let opts = EvalOptions::with_mode(ArithmeticMode::Float64);
    for (a, b) in [(0, 2), (1, 3)] {
        let exact = exact::covariance(&p, &specs[a], &specs[b], &opts)?.to_f64();
        let mc = &est.covariance[a][b];
        println!(
            "Cov({}, {}): exact {exact:.6}  mc {:.6} ± {:.6}",
            specs[a].label(),
            specs[b].label(),
            mc.mean,
            mc.std_error
        );
    }
    Ok(())
}
