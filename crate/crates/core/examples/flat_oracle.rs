//! Uniform-mesh solves of the flat grating against its closed-form solution.

use std::f64::consts::PI;

use elastodtn::analytic::{h1_error, plane_wave_h1_norm, ExactFlatSolution, IncidentWave};
use elastodtn::assembly::{solve, LinearSystem};
use elastodtn::dtn::{select_truncation, DtnOperator, ElasticMedium};
use elastodtn::mesh::{build_initial_mesh, SurfaceProfile};
use elastodtn::space::{DofMap, QuasiPeriodicParams};

fn main() -> elastodtn::Result<()> {
    let medium = ElasticMedium::new(2.0, 1.0, 2.0)?;
    let theta = PI / 3.0;
    let (period, b) = (0.5, 0.25);
    let incident = IncidentWave::compressional(theta);
    let qp = QuasiPeriodicParams::new(incident.alpha(&medium), period);
    let profile = SurfaceProfile::flat(period, 0.0)?;
    let uinc = plane_wave_h1_norm(profile.area_below(b), incident.wavenumber(&medium));
    let trunc = select_truncation(&medium, &qp, b, 0.0, 1e-8, uinc)?;
    let exact = ExactFlatSolution::new(&medium, theta);
    println!("N = {}, eps_N = {:.3e}", trunc.order, trunc.error);
    println!("{:>8} {:>8} {:>12} {:>6}", "h", "dof", "e_h", "rate");
    let mut prev: Option<f64> = None;
    for k in [10, 20, 40, 80] {
        let h = 1.0 / k as f64;
        let mesh = build_initial_mesh(&profile, b, h)?;
        let dofmap = DofMap::build(&mesh, qp)?;
        let dtn = DtnOperator::new(&medium, trunc.order, &mesh, &dofmap)?;
        let system = LinearSystem::assemble(&mesh, &dofmap, &medium, &dtn, &incident)?;
        let (field, _) = solve(&system, &dofmap)?;
        let e = h1_error(&mesh, &field.values, |p| exact.scattered(p));
        let rate = prev.map(|p| (p / e).log2());
        println!(
            "{h:>8.4} {:>8} {e:>12.4e} {:>6}",
            dofmap.ndof(),
            rate.map_or(String::from("-"), |r| format!("{r:.3}"))
        );
        prev = Some(e);
    }
    Ok(())
}
