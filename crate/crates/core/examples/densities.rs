//! Level densities, backward transitions and the Dixon integral.
//!
//! Usage: `cargo run --release --example densities`

use jacobi_corners::model::{dixon_check, log_joint_density, log_level_density, log_selberg, CornersArray};
use jacobi_corners::EnsembleParams;

fn main() -> jacobi_corners::Result<()> {
    let p = EnsembleParams::new(0.5, 1.5, 2)?;
    println!("ln S_2(1.5, 0.5, 0.5) = {:.12}", log_selberg(2, 1.5, 0.5, 0.5)?);

    let corners = CornersArray::new(vec![vec![0.4], vec![0.2, 0.7], vec![0.1, 0.5]], 2)?;
    let top = log_level_density(&p, 3, corners.level(3))?;
    let joint = log_joint_density(&p, 3, &corners)?;
    println!("top level ln density {top:.10}, joint ln density {joint:.10}");

    for (alphas, a, b) in [
        (vec![0.7, 1.3], vec![0.0, 1.0], None),
        (vec![0.5, 0.8, 1.1], vec![0.0, 0.4, 1.0], Some(2.0)),
    ] {
        let (numeric, closed) = dixon_check(&alphas, &a, b)?;
        println!("Dixon α={alphas:?} a={a:?} b={b:?}: quadrature {numeric:.12} closed form {closed:.12}");
    }
    Ok(())
}
