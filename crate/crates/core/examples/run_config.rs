//! Driving the command-line layer from code: a custom configuration, one
//! command, and its check summary.
//!
//! Usage: `cargo run --release --example run_config [out_dir]`

use jacobi_corners::cli::{run, Command, RunConfig};

fn main() -> jacobi_corners::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/run_config".into());
    let mut config = RunConfig::default();
    config.seed = 3;
    config.asymptotics.levels = vec![0.4, 1.0, 1.6];
    config.asymptotics.max_degree = 3;
    let checks = run(Command::Asymptotics, &config, out.as_ref())?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failed} failed, tables in {out}", checks.len());
    println!("{}", serde_json::to_string_pretty(&config.asymptotics).expect("config serializes"));
    Ok(())
}
