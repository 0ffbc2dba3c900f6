//! Galerkin assembly of the truncated DtN problem and its direct solve.

use rayon::prelude::*;

use crate::analytic::IncidentWave;
use crate::dtn::{DtnOperator, ElasticMedium};
use crate::error::{Error, Result};
use crate::linalg::{mat2_vec, solve_sparse, CVec2, SolveReport, SparseMatrix, C64, ZERO};
use crate::mesh::{BoundaryTag, Mesh};
use crate::p1::barycentric_gradients;
use crate::space::DofMap;

/// Default bound on ‖Ax − b‖/‖b‖ accepted from the direct solver.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// 6×6 real element matrix of μ∇u:∇v + (λ+μ) div u div v − ω² u·v, indexed
/// by 2·(local vertex) + component.
pub fn element_matrix(p: &[[f64; 2]; 3], medium: &ElasticMedium) -> [[f64; 6]; 6] {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let g = barycentric_gradients(p);
    let (mu, lm, w2) = (medium.mu, medium.lambda + medium.mu, medium.omega * medium.omega);
    let mut k = [[0.0; 6]; 6];
    for a in 0..3 {
        for b in 0..3 {
            let dot = g[a][0] * g[b][0] + g[a][1] * g[b][1];
            let mass = if a == b { area / 6.0 } else { area / 12.0 };
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = lm * g[a][i] * g[b][j] * area;
                    if i == j {
                        v += mu * dot * area - w2 * mass;
                    }
                    k[2 * a + i][2 * b + j] = v;
                }
            }
        }
    }
    k
}

fn check_triangles(mesh: &Mesh) -> Result<()> {
    let scale = mesh.period().max(mesh.top().abs()).powi(2);
    for t in 0..mesh.triangles().len() {
        let area = mesh.area(t);
        if !(area > 1e-14 * scale) {
            return Err(Error::DegenerateTriangle { index: t, area });
        }
    }
    Ok(())
}

/// Element contributions in triangle order; rows are test unknowns, columns trial unknowns.
fn element_triplets(mesh: &Mesh, dofmap: &DofMap, medium: &ElasticMedium) -> Vec<Vec<(usize, usize, C64)>> {
    (0..mesh.triangles().len())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangles()[t];
            let k = element_matrix(&mesh.corners(t), medium);
            let dofs = tri.map(|v| dofmap.vertex_dof(v));
            let mut out = Vec::with_capacity(36);
            for a in 0..3 {
                let Some((ka, ma)) = dofs[a] else { continue };
                for b in 0..3 {
                    let Some((kb, mb)) = dofs[b] else { continue };
                    let w = ma.conj() * mb;
                    for i in 0..2 {
                        for j in 0..2 {
                            out.push((2 * ka + i, 2 * kb + j, w * k[2 * a + i][2 * b + j]));
                        }
                    }
                }
            }
            out
        })
        .collect()
}

/// Interior part of the sesquilinear form on the free unknowns.
pub fn assemble_interior(mesh: &Mesh, dofmap: &DofMap, medium: &ElasticMedium) -> Result<SparseMatrix> {
    check_triangles(mesh)?;
    let triplets: Vec<_> = element_triplets(mesh, dofmap, medium).into_iter().flatten().collect();
    let n = dofmap.ndof();
    Ok(SparseMatrix::from_triplets(n, n, &triplets))
}

/// Boundary block B with B_{ji} = (1/Λ) Σ_n conj(c_{j,n}) M^{(n)} c_{i,n}.
pub fn assemble_dtn(dofmap: &DofMap, dtn: &DtnOperator) -> Result<SparseMatrix> {
    let verts = dtn.gamma_vertices();
    let moments = dtn.moments();
    if moments.len() != verts.len() || moments.iter().any(|m| m.len() != dtn.modes().len()) {
        return Err(Error::ModeMismatch(format!(
            "{} boundary vertices, {} moment rows, {} modes",
            verts.len(),
            moments.len(),
            dtn.modes().len()
        )));
    }
    let mut index = Vec::with_capacity(verts.len());
    for &v in verts {
        match dofmap.vertex_dof(v) {
            Some((k, m)) if m == C64::new(1.0, 0.0) => index.push(k),
            _ => {
                return Err(Error::ModeMismatch(format!("boundary vertex {v} is not a free vertex")));
            }
        }
    }
    let inv = 1.0 / dtn.period();
    let rows: Vec<Vec<(usize, usize, C64)>> = (0..verts.len())
        .into_par_iter()
        .map(|j| {
            let mut out = Vec::with_capacity(4 * verts.len());
            for i in 0..verts.len() {
                let mut block = [[ZERO; 2]; 2];
                for (k, mode) in dtn.modes().iter().enumerate() {
                    let w = moments[j][k].conj() * moments[i][k] * inv;
                    for r in 0..2 {
                        for c in 0..2 {
                            block[r][c] += w * mode.matrix[r][c];
                        }
                    }
                }
                for r in 0..2 {
                    for c in 0..2 {
                        out.push((2 * index[j] + r, 2 * index[i] + c, block[r][c]));
                    }
                }
            }
            out
        })
        .collect();
    let triplets: Vec<_> = rows.into_iter().flatten().collect();
    let n = dofmap.ndof();
    Ok(SparseMatrix::from_triplets(n, n, &triplets))
}

/// Dirichlet data −u^inc at surface vertices and the right-hand side obtained
/// by moving the constrained columns of the interior form across.
pub fn assemble_lift(
    mesh: &Mesh,
    dofmap: &DofMap,
    incident: &IncidentWave,
    medium: &ElasticMedium,
) -> (Vec<C64>, Vec<CVec2>) {
    let mut dirichlet = vec![[ZERO; 2]; mesh.vertices().len()];
    for v in mesh.vertices_on(BoundaryTag::Surface) {
        let (u, _) = incident.field(medium, mesh.vertices()[v]);
        dirichlet[v] = [-u[0], -u[1]];
    }
    let rhs = lift_rhs(mesh, dofmap, medium, &dirichlet);
    (rhs, dirichlet)
}

/// −a(g, ψ_k) for the P1 extension g of the given per-vertex surface values.
pub fn lift_rhs(mesh: &Mesh, dofmap: &DofMap, medium: &ElasticMedium, dirichlet: &[CVec2]) -> Vec<C64> {
    let parts: Vec<Vec<(usize, C64)>> = (0..mesh.triangles().len())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangles()[t];
            let dofs = tri.map(|v| dofmap.vertex_dof(v));
            if dofs.iter().all(Option::is_some) {
                return Vec::new();
            }
            let k = element_matrix(&mesh.corners(t), medium);
            let mut out = Vec::new();
            for a in 0..3 {
                let Some((ka, ma)) = dofs[a] else { continue };
                for b in 0..3 {
                    if dofs[b].is_some() {
                        continue;
                    }
                    let g = dirichlet[tri[b]];
                    for i in 0..2 {
                        let s = k[2 * a + i][2 * b] * g[0] + k[2 * a + i][2 * b + 1] * g[1];
                        out.push((2 * ka + i, -ma.conj() * s));
                    }
                }
            }
            out
        })
        .collect();
    let mut rhs = vec![ZERO; dofmap.ndof()];
    for (r, v) in parts.into_iter().flatten() {
        rhs[r] += v;
    }
    rhs
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    /// A_interior − B
    pub matrix: SparseMatrix,
    pub rhs: Vec<C64>,
    /// Per-vertex values, nonzero only on the surface.
    pub dirichlet_values: Vec<CVec2>,
}

impl LinearSystem {
    pub fn assemble(
        mesh: &Mesh,
        dofmap: &DofMap,
        medium: &ElasticMedium,
        dtn: &DtnOperator,
        incident: &IncidentWave,
    ) -> Result<Self> {
        let a = assemble_interior(mesh, dofmap, medium)?;
        let b = assemble_dtn(dofmap, dtn)?;
        let (rhs, dirichlet_values) = assemble_lift(mesh, dofmap, incident, medium);
        Ok(Self {
            matrix: a.add_scaled(&b, C64::new(-1.0, 0.0)),
            rhs,
            dirichlet_values,
        })
    }
}

/// Solution coefficients together with the reconstructed per-vertex field.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub free: Vec<C64>,
    /// Values at every mesh vertex (slave and Dirichlet vertices included).
    pub values: Vec<CVec2>,
}

impl DiscreteField {
    pub fn new(dofmap: &DofMap, free: Vec<C64>, dirichlet: &[CVec2]) -> Self {
        let values = dofmap.apply_constraints(&free, dirichlet);
        Self { free, values }
    }
}

pub fn solve(system: &LinearSystem, dofmap: &DofMap) -> Result<(DiscreteField, SolveReport)> {
    let report = solve_sparse(&system.matrix, &system.rhs, SOLVE_TOLERANCE)?;
    let field = DiscreteField::new(dofmap, report.solution.clone(), &system.dirichlet_values);
    Ok((field, report))
}

/// Residual of the discrete equations tested against every free basis
/// function: a_N(u_h, ψ_k) − ℓ(ψ_k).
pub fn galerkin_residual(system: &LinearSystem, field: &DiscreteField) -> Vec<C64> {
    system
        .matrix
        .mul_vec(&field.free)
        .into_iter()
        .zip(&system.rhs)
        .map(|(a, b)| a - b)
        .collect()
}

/// Boundary form ∫_Γ 𝒯_N u · conj(v) for two free vectors, evaluated through the modes.
pub fn dtn_form(dtn: &DtnOperator, u: &[CVec2], v: &[CVec2]) -> C64 {
    let cu = dtn.trace_coefficients(u);
    let cv = dtn.trace_coefficients(v);
    dtn.modes()
        .iter()
        .zip(cu.iter().zip(&cv))
        .map(|(m, (a, b))| {
            let ma = mat2_vec(&m.matrix, a);
            (ma[0] * b[0].conj() + ma[1] * b[1].conj()) * dtn.period()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtn::DtnMode;
    use crate::linalg::norm2;
    use crate::mesh::Mesh;
    use crate::space::QuasiPeriodicParams;
    use std::f64::consts::PI;

    fn setup(alpha: f64, nx: usize, ny: usize) -> (Mesh, DofMap, ElasticMedium) {
        let m = Mesh::rectangle(0.5, 0.25, nx, ny).unwrap();
        let d = DofMap::build(&m, QuasiPeriodicParams::new(alpha, 0.5)).unwrap();
        (m, d, ElasticMedium::new(2.0, 1.0, 2.0).unwrap())
    }

    #[test]
    fn reference_mass_block() {
        // two frequencies share the stiffness, so the difference is 3 × mass
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let with = element_matrix(&p, &ElasticMedium::new(2.0, 1.0, 1.0).unwrap());
        let without = element_matrix(&p, &ElasticMedium::new(2.0, 1.0, 2.0).unwrap());
        let area: f64 = 0.5;
        for a in 0..3 {
            for b in 0..3 {
                let expect = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                let got = (with[2 * a][2 * b] - without[2 * a][2 * b]) / 3.0;
                assert!((got - expect).abs() < 1e-15);
                assert_eq!(with[2 * a][2 * b + 1], without[2 * a][2 * b + 1]);
            }
        }
    }

    #[test]
    fn interior_is_hermitian() {
        for alpha in [0.0, 0.866, 3.1] {
            let (m, d, med) = setup(alpha, 6, 3);
            let a = assemble_interior(&m, &d, &med).unwrap();
            assert!(a.hermitian_defect() <= 1e-13 * a.max_abs());
        }
    }

    #[test]
    fn constant_field_quadratic_forms() {
        let m = Mesh::rectangle(0.5, 0.25, 1, 1).unwrap();
        // keep every vertex free by dropping the surface tag
        let edges: Vec<_> = m
            .boundary_edges()
            .iter()
            .map(|e| {
                let mut e = *e;
                if e.tag == BoundaryTag::Surface {
                    e.tag = BoundaryTag::Top;
                }
                e
            })
            .collect();
        let m = Mesh::from_parts(m.vertices().to_vec(), m.triangles().to_vec(), edges, 0.5, 0.25);
        let d = DofMap::build(&m, QuasiPeriodicParams::new(0.0, 0.5)).unwrap();
        let c = [C64::new(0.3, -0.4), C64::new(1.0, 0.2)];
        let u: Vec<C64> = (0..d.free_count()).flat_map(|_| c).collect();
        let full = ElasticMedium::new(2.0, 1.0, 2.0).unwrap();
        let a = assemble_interior(&m, &d, &full).unwrap();
        let mass_value = 4.0 * (c[0].norm_sqr() + c[1].norm_sqr()) * 0.125;
        assert!((a.form(&u, &u) + mass_value).norm() < 1e-14);
        // stiffness alone is the difference between two frequencies
        let other = ElasticMedium::new(2.0, 1.0, 1.0).unwrap();
        let b = assemble_interior(&m, &d, &other).unwrap();
        let stiff = b.form(&u, &u) + (1.0 / 4.0) * mass_value;
        assert!(stiff.norm() < 1e-14);
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let v = vec![[0.0, 0.0], [0.5, 0.0], [0.25, 0.0], [0.0, 0.25]];
        let m = Mesh::from_parts(v, vec![[0, 1, 2], [0, 1, 3]], vec![], 0.5, 0.25);
        let d = DofMap::build(&m, QuasiPeriodicParams::new(0.0, 0.5)).unwrap();
        let med = ElasticMedium::new(2.0, 1.0, 2.0).unwrap();
        assert!(matches!(
            assemble_interior(&m, &d, &med),
            Err(Error::DegenerateTriangle { index: 0, .. })
        ));
    }

    #[test]
    fn empty_mode_set_gives_zero_block() {
        let (m, d, _) = setup(0.3, 4, 2);
        let dtn = DtnOperator::from_modes(vec![], &m, &d).unwrap();
        let b = assemble_dtn(&d, &dtn).unwrap();
        assert_eq!(b.max_abs(), 0.0);
    }

    #[test]
    fn single_vertex_block_is_scaled_matrix() {
        let (_, d, med) = setup(0.0, 1, 1);
        let mode = DtnMode::new(&med, d.params(), 1).unwrap();
        let v = d.gamma_vertices()[0];
        let dtn = DtnOperator::from_parts(vec![mode], vec![v], vec![vec![C64::new(0.5, 0.0)]], 0.5).unwrap();
        let b = assemble_dtn(&d, &dtn).unwrap();
        let (k, _) = d.vertex_dof(v).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((b.get(2 * k + r, 2 * k + c) - 0.5 * mode.matrix[r][c]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn dtn_block_matches_mode_form() {
        let (m, d, med) = setup(0.866, 8, 2);
        let dtn = DtnOperator::new(&med, 3, &m, &d).unwrap();
        let b = assemble_dtn(&d, &dtn).unwrap();
        let u: Vec<C64> = (0..d.ndof()).map(|k| C64::new((k as f64).sin(), (0.3 * k as f64).cos())).collect();
        let v: Vec<C64> = (0..d.ndof()).map(|k| C64::new(0.1 * k as f64, 1.0)).collect();
        let fu = d.apply_constraints(&u, &[]);
        let fv = d.apply_constraints(&v, &[]);
        let direct = dtn_form(&dtn, &fu, &fv);
        assert!((b.form(&v, &u) - direct).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn zero_incident_gives_zero() {
        let (m, d, med) = setup(0.0, 4, 2);
        let dirichlet = vec![[ZERO; 2]; m.vertices().len()];
        assert!(lift_rhs(&m, &d, &med, &dirichlet).iter().all(|&z| z == ZERO));
    }

    #[test]
    fn lift_and_solution_are_linear() {
        let med = ElasticMedium::new(2.0, 1.0, 2.0).unwrap();
        let inc = IncidentWave::compressional(PI / 3.0);
        let m = Mesh::rectangle(0.5, 0.25, 8, 4).unwrap();
        let d = DofMap::build(&m, QuasiPeriodicParams::new(inc.alpha(&med), 0.5)).unwrap();
        let dtn = DtnOperator::new(&med, 6, &m, &d).unwrap();
        let sys = LinearSystem::assemble(&m, &d, &med, &dtn, &inc).unwrap();
        let s = C64::new(0.7, -2.0);
        let scaled_dirichlet: Vec<CVec2> = sys.dirichlet_values.iter().map(|g| [s * g[0], s * g[1]]).collect();
        let rhs2 = lift_rhs(&m, &d, &med, &scaled_dirichlet);
        for (a, b) in rhs2.iter().zip(&sys.rhs) {
            assert!((a - s * b).norm() <= 1e-15 * (1.0 + b.norm()));
        }
        let (u1, r1) = solve(&sys, &d).unwrap();
        let sys2 = LinearSystem {
            rhs: rhs2,
            dirichlet_values: scaled_dirichlet,
            ..sys.clone()
        };
        let (u2, _) = solve(&sys2, &d).unwrap();
        assert!(r1.relative_residual <= SOLVE_TOLERANCE);
        let diff: Vec<C64> = u2.free.iter().zip(&u1.free).map(|(a, b)| a - s * b).collect();
        assert!(norm2(&diff) <= 1e-9 * norm2(&u2.free));
        let res = galerkin_residual(&sys, &u1);
        assert!(norm2(&res) <= 1e-9 * norm2(&sys.rhs));
    }
}
