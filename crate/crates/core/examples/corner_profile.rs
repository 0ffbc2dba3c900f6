//! Adaptive run on the piecewise-linear grating with interior corners,
//! reporting how strongly the final mesh concentrates at each corner.
//!
//! Usage: `cargo run --release --example corner_profile -- [omega] [max_dof]`

use std::f64::consts::PI;

use elastodtn::adapt::{adaptive_solve_with, AdaptConfig, Problem};
use elastodtn::analytic::IncidentWave;
use elastodtn::dtn::ElasticMedium;
use elastodtn::mesh::{Mesh, SurfaceProfile};

fn mean_diameter(mesh: &Mesh, keep: impl Fn([f64; 2]) -> bool) -> f64 {
    let d: Vec<f64> = (0..mesh.triangles().len())
        .filter(|&t| {
            let [a, b, c] = mesh.corners(t);
            keep([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0])
        })
        .map(|t| mesh.diameter(t))
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}

fn main() -> elastodtn::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let omega: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let max_dof: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50_000);
    let profile = SurfaceProfile::new(vec![
        [0.0, 0.0],
        [0.125, 0.1],
        [0.25, 0.0],
        [0.375, 0.1],
        [0.5, 0.0],
    ])?;
    let problem = Problem::new(
        ElasticMedium::new(1.0, 2.0, omega)?,
        IncidentWave::compressional(PI / 3.0),
        profile.clone(),
        0.25,
    )?;
    let config = AdaptConfig {
        tolerance: 1e-6,
        max_dof,
        ..AdaptConfig::default()
    };
    println!("{:>4} {:>7} {:>3} {:>11}", "iter", "dof", "N", "eps_h");
    let out = adaptive_solve_with(&problem, &config, |r, _| {
        println!("{:>4} {:>7} {:>3} {:>11.4e}", r.iteration, r.dof, r.n, r.eps_h);
    })?;
    println!("stopped: {}", out.termination);
    let mesh = &out.solution.mesh;
    let global = mean_diameter(mesh, |_| true);
    println!("global mean diameter {global:.4e}");
    for c in profile.corners() {
        let near = mean_diameter(mesh, |p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt() < 0.05);
        println!("corner ({}, {}): mean diameter {near:.4e}, ratio {:.3}", c[0], c[1], near / global);
    }
    Ok(())
}
