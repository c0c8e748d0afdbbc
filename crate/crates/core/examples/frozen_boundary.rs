//! Frozen boundary `[l(N̂), r(N̂)]` of the limit shape for three parameter choices.
//!
//! Usage: `cargo run --release --example frozen_boundary`

use jacobi_corners::asymptotics::frozen_boundary;
use jacobi_corners::{HatParams, LevelHeight};

fn main() -> jacobi_corners::Result<()> {
    for (m, a) in [(0.1, 1.0), (1.0, 1.0), (1.0, 0.1)] {
        let hp = HatParams::new(m, a)?;
        println!("M̂ = {m}, α̂ = {a}");
        for j in 1..=8 {
            let h = 0.25 * j as f64;
            let (l, r) = frozen_boundary(&hp, LevelHeight::new(h)?);
            println!("  N̂ = {h:.2}: [{l:.6}, {r:.6}]");
        }
    }
    Ok(())
}
