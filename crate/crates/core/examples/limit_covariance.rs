//! Limit covariances of power sums by three routes: the double contour
//! integral, the Chebyshev expansion, and the GFF integral through Ω.
//!
//! Usage: `cargo run --release --example limit_covariance [M_hat alpha_hat]`

use jacobi_corners::asymptotics::{
    chebyshev_cov, height_cov, level_contour, limit_covariance_p, monomial_in_chebyshev,
};
use jacobi_corners::{HatParams, LevelHeight};

fn main() -> jacobi_corners::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let hp = HatParams::new(args.first().copied().unwrap_or(1.0), args.get(1).copied().unwrap_or(1.0))?;
    let theta = 1.0;
    let (h1, h2) = (LevelHeight::new(1.0)?, LevelHeight::new(0.5)?);
    for h in [h1, h2] {
        let c = level_contour(&hp, h);
        println!("N̂ = {}: contour center {:.4} radius {:.4} line {}", h.get(), c.center, c.radius, c.is_line);
    }
    println!("{:>3} {:>3} {:>16} {:>16} {:>16}", "k1", "k2", "contour", "chebyshev", "gff");
    for k1 in 1..=3u32 {
        for k2 in 1..=3u32 {
            let contour = limit_covariance_p(&hp, theta, (h1, k1), (h2, k2))?;
            let (a, b) = (monomial_in_chebyshev(&hp, h1, k1), monomial_in_chebyshev(&hp, h2, k2));
            let mut cheb = 0.0;
            for (i, x) in a.iter().enumerate().skip(1) {
                for (j, y) in b.iter().enumerate().skip(1) {
                    cheb += x * y * chebyshev_cov(&hp, theta, (i as u32, h1), (j as u32, h2))?;
                }
            }
            let gff = height_cov(&hp, (h1, k1 - 1), (h2, k2 - 1))? * (k1 * k2) as f64 / (theta * std::f64::consts::PI);
            println!("{k1:>3} {k2:>3} {contour:>16.12} {cheb:>16.12} {gff:>16.12}");
        }
    }
    Ok(())
}
