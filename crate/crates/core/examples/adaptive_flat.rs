//! Adaptive run on the flat grating, printing e_h, ε_h and the effectivity.
//!
//! Usage: `cargo run --release --example adaptive_flat -- [omega] [max_dof]`

use std::f64::consts::PI;

use elastodtn::adapt::{adaptive_solve_with, AdaptConfig, Problem};
use elastodtn::analytic::IncidentWave;
use elastodtn::dtn::ElasticMedium;
use elastodtn::mesh::SurfaceProfile;

fn main() -> elastodtn::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let omega: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let max_dof: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50_000);
    let problem = Problem::new(
        ElasticMedium::new(2.0, 1.0, omega)?,
        IncidentWave::compressional(PI / 3.0),
        SurfaceProfile::flat(0.5, 0.0)?,
        0.25,
    )?;
    let config = AdaptConfig {
        tolerance: 1e-6,
        max_dof,
        ..AdaptConfig::default()
    };
    println!("{:>4} {:>7} {:>3} {:>11} {:>11} {:>7}", "iter", "dof", "N", "eps_h", "e_h", "eff");
    let out = adaptive_solve_with(&problem, &config, |r, _| {
        let e = r.e_h.unwrap_or(f64::NAN);
        println!(
            "{:>4} {:>7} {:>3} {:>11.4e} {:>11.4e} {:>7.3}",
            r.iteration, r.dof, r.n, r.eps_h, e, r.eps_h / e
        );
    })?;
    println!("stopped: {}", out.termination);
    Ok(())
}
