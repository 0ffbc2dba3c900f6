//! Uniform refinement study driven by a run configuration.
//!
//! Usage: `cargo run --release --example uniform_study -- configs/example1.toml`

use elastodtn::adapt::uniform_study;
use elastodtn::config::load_config;

fn main() -> elastodtn::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/example1.toml".into());
    let config = load_config(&path)?;
    let records = uniform_study(&config.problem, &config.study_sizes, config.adapt.dtn_tol)?;
    println!("{:>5} {:>8} {:>8} {:>12} {:>12} {:>6}", "level", "h", "dof", "eps_h", "e_h", "rate");
    for r in &records {
        println!(
            "{:>5} {:>8.4} {:>8} {:>12.4e} {:>12} {:>6}",
            r.level,
            r.h,
            r.dof,
            r.eps_h,
            r.e_h.map_or("-".into(), |e| format!("{e:.4e}")),
            r.rate.map_or("-".into(), |x| format!("{x:.3}"))
        );
    }
    Ok(())
}
