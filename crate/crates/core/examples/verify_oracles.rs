//! Runs the full oracle suite and prints one line per check.
//!
//! cargo run --release --example verify_oracles -- [seed]

fn main() -> chainopt::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let checks = chainopt::verify::run_suite(seed)?;
    for c in &checks {
        println!("{c}");
    }
    if checks.iter().any(|c| !c.passed) {
        std::process::exit(1);
    }
    Ok(())
}
