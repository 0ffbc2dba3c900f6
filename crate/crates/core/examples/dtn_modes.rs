//! DtN mode table and truncation scan for a grating.
//!
//! Usage: `cargo run --example dtn_modes -- [lambda] [mu] [omega] [theta_deg]`

use elastodtn::adapt::Problem;
use elastodtn::analytic::IncidentWave;
use elastodtn::dtn::{min_truncation_order, symmetrized_block, truncation_error, DtnMode, ElasticMedium};
use elastodtn::linalg::hermitian2_eigenvalues;
use elastodtn::mesh::SurfaceProfile;

fn main() -> elastodtn::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let arg = |k: usize, d: f64| args.get(k).copied().unwrap_or(d);
    let medium = ElasticMedium::new(arg(0, 2.0), arg(1, 1.0), arg(2, 2.0))?;
    let problem = Problem::new(
        medium,
        IncidentWave::compressional(arg(3, 60.0).to_radians()),
        SurfaceProfile::flat(0.5, 0.0)?,
        0.25,
    )?;
    let qp = problem.quasi_periodicity();
    println!("kappa_p = {:.6}, kappa_s = {:.6}, alpha = {:.6}", medium.kappa_p(), medium.kappa_s(), qp.alpha);

    println!("{:>4} {:>10} {:>22} {:>22} {:>24}", "n", "alpha_n", "beta1", "beta2", "eig -(M+M^H)/2");
    for n in -4..=4 {
        let mode = DtnMode::new(&medium, &qp, n)?;
        let h = symmetrized_block(&mode.matrix);
        let ev = hermitian2_eigenvalues(&h);
        println!(
            "{n:>4} {:>10.4} {:>22} {:>22} {:>11.4} {:>11.4}",
            mode.alpha_n,
            format!("{:.4}", mode.beta1),
            format!("{:.4}", mode.beta2),
            ev[0],
            ev[1]
        );
    }

    let gap = problem.b - problem.b_prime();
    let uinc = problem.incident_h1_norm();
    let n_min = min_truncation_order(&medium, &qp);
    println!("N_min = {n_min}");
    for n in n_min..n_min + 8 {
        println!("N = {n:>2}  eps_N = {:.3e}", truncation_error(&medium, &qp, n, gap, uinc)?);
    }
    let chosen = problem.truncation(1e-8)?;
    println!("selected N = {} (eps_N = {:.3e})", chosen.order, chosen.error);
    Ok(())
}
