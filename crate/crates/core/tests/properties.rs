use elastodtn::adapt::{mark, IterationRecord};
use elastodtn::assembly::assemble_interior;
use elastodtn::dtn::{edge_moments, ElasticMedium};
use elastodtn::linalg::C64;
use elastodtn::mesh::{build_initial_mesh, MarkSet, Mesh, SurfaceProfile};
use elastodtn::output::{convergence_csv, parse_convergence_csv};
use elastodtn::space::{DofMap, QuasiPeriodicParams};
use proptest::prelude::*;

fn sawtooth() -> SurfaceProfile {
    SurfaceProfile::new(vec![[0.0, 0.0], [0.125, 0.1], [0.25, 0.0], [0.375, 0.1], [0.5, 0.0]]).unwrap()
}

/// Refines with marks drawn from `picks`, interpreted modulo the current triangle count.
fn refine(mut mesh: Mesh, rounds: &[Vec<usize>]) -> Mesh {
    for picks in rounds {
        let n = mesh.triangles().len();
        let mut marks: Vec<usize> = picks.iter().map(|p| p % n).collect();
        marks.sort_unstable();
        marks.dedup();
        mesh = mesh.bisect(&MarkSet(marks));
    }
    mesh
}

fn rounds() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(any::<usize>(), 1..12), 1..7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_refinement_keeps_mesh_valid(rounds in rounds()) {
        let coarse = build_initial_mesh(&sawtooth(), 0.25, 0.1).unwrap();
        let area = coarse.total_area();
        let fine = refine(coarse.clone(), &rounds);
        prop_assert!(fine.validate().is_empty(), "{:?}", fine.validate());
        prop_assert!(fine.min_angle_deg() >= 15.0);
        prop_assert!(fine.triangles().len() > coarse.triangles().len());
        prop_assert!((fine.total_area() - area).abs() <= 1e-12 * area);
        for &(l, r) in fine.periodic_pairs() {
            let (pl, pr) = (fine.vertices()[l], fine.vertices()[r]);
            prop_assert_eq!(pl[1], pr[1]);
            prop_assert_eq!(pl[0], 0.0);
            prop_assert_eq!(pr[0], 0.5);
        }
    }

    #[test]
    fn interior_matrix_is_hermitian(
        rounds in rounds(),
        lambda in 0.5f64..4.0,
        mu in 0.5f64..3.0,
        omega in 0.5f64..6.0,
        alpha in -3.0f64..3.0,
    ) {
        let mesh = refine(build_initial_mesh(&sawtooth(), 0.25, 0.1).unwrap(), &rounds);
        let medium = ElasticMedium::new(lambda, mu, omega).unwrap();
        let dofmap = DofMap::build(&mesh, QuasiPeriodicParams::new(alpha, 0.5)).unwrap();
        let a = assemble_interior(&mesh, &dofmap, &medium).unwrap();
        prop_assert!(a.hermitian_defect() <= 1e-13 * a.max_abs());
    }

    #[test]
    fn marking_is_max_strategy(eta in prop::collection::vec(0.0f64..10.0, 1..60), tau in 0.01f64..0.99) {
        let max = eta.iter().copied().fold(0.0, f64::max);
        prop_assume!(max > 0.0);
        let MarkSet(marked) = mark(&eta, tau).unwrap();
        prop_assert!(!marked.is_empty());
        for (k, &e) in eta.iter().enumerate() {
            prop_assert_eq!(marked.binary_search(&k).is_ok(), e > tau * max);
        }
    }

    #[test]
    fn edge_moments_match_quadrature(x0 in 0.0f64..0.5, h in 1e-4f64..0.1, a in -60.0f64..60.0) {
        let (m0, m1) = edge_moments(x0, h, a);
        // composite Simpson of ∫ φ(x) e^{-iax} dx with φ the two hat halves
        let n = 400;
        let (mut q0, mut q1) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for k in 0..=n {
            let s = k as f64 / n as f64;
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            let e = C64::from_polar(w * h / (3.0 * n as f64), -a * (x0 + s * h));
            q0 += e * (1.0 - s);
            q1 += e * s;
        }
        let tol = 1e-9 * h;
        prop_assert!((m0 - q0).norm() <= tol && (m1 - q1).norm() <= tol);
    }

    #[test]
    fn convergence_csv_round_trips(
        rows in prop::collection::vec(
            (0usize..100, 0usize..1_000_000, 1usize..40, any::<f64>(), 0.0f64..1e3, prop::option::of(0.0f64..1e3), 0.0f64..1e-6, 0.0f64..1e4),
            0..20,
        )
    ) {
        let records: Vec<IterationRecord> = rows
            .into_iter()
            .filter(|r| r.3.is_finite())
            .map(|(iteration, dof, n, eps_n, eps_h, e_h, rel_residual, seconds)| IterationRecord {
                iteration, dof, n, eps_n, eps_h, e_h, rel_residual, seconds,
            })
            .collect();
        prop_assert_eq!(parse_convergence_csv(&convergence_csv(&records)).unwrap(), records);
    }
}
