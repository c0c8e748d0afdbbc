//! Heckman–Opdam functions through the branching integral: principal
//! specialization, the Cauchy identity and the eigenrelation.
//!
//! Usage: `cargo run --release --example heckman_opdam [theta]`

use jacobi_corners::ho::{self, HOPoint};
use jacobi_corners::quadrature::QuadSpec;

fn main() -> jacobi_corners::Result<()> {
    let theta: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.7);
    let q = QuadSpec::default();
    let r = [1.6, 0.5];
    for m in 2..=3 {
        let p = HOPoint::new(r.to_vec(), ho::principal_point(m, theta), theta)?;
        println!(
            "principal M = {m}: integral {:.14} closed form {:.14}",
            ho::ho_eval(&p, &q)?,
            ho::principal_closed_form(&r, m, theta)
        );
    }
    let (lhs, rhs) = ho::cauchy_check(&[-0.4], &[-0.3], theta, &q)?;
    println!("Cauchy: {lhs:.14} vs {rhs:.14}");
    for k in 1..=2 {
        let (applied, expected) = ho::eigen_check(&r, theta, 2, k, &[0.3, -0.45], &q)?;
        println!("eigenrelation k = {k}: {applied:.14} vs {expected:.14}");
    }
    for step in [0.08, 0.04, 0.02] {
        println!("Calogero residual at step {step}: {:.3e}", ho::calogero_residual(&r, &[0.3, -0.45], theta, step, &q)?);
    }
    Ok(())
}
