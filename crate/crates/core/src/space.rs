//! Quasi-periodic P1 vector space: vertex statuses and unknown numbering.

use crate::error::{Error, Result};
use crate::linalg::{CVec2, C64, ZERO};
use crate::mesh::{BoundaryTag, Mesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiPeriodicParams {
    pub alpha: f64,
    pub period: f64,
    /// e^{iαΛ}
    pub phase: C64,
}

impl QuasiPeriodicParams {
    pub fn new(alpha: f64, period: f64) -> Self {
        Self {
            alpha,
            period,
            phase: C64::from_polar(1.0, alpha * period),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VertexStatus {
    /// Owns unknowns `2k` (x-component) and `2k + 1` (y-component).
    Free(usize),
    /// Value is `phase` times the value at `master`.
    Slave { master: usize, phase: C64 },
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    status: Vec<VertexStatus>,
    free_count: usize,
    gamma_vertices: Vec<usize>,
    qp: QuasiPeriodicParams,
}

impl DofMap {
    /// Surface vertices are Dirichlet, right-side vertices are slaved to their
    /// left partners, everything else is free in mesh-vertex order.
    pub fn build(mesh: &Mesh, qp: QuasiPeriodicParams) -> Result<Self> {
        let nv = mesh.vertices().len();
        let mut on = vec![[false; 4]; nv];
        for e in mesh.boundary_edges() {
            let slot = match e.tag {
                BoundaryTag::Surface => 0,
                BoundaryTag::Top => 1,
                BoundaryTag::Left => 2,
                BoundaryTag::Right => 3,
            };
            for &v in &e.vertices {
                on[v][slot] = true;
            }
        }
        if let Some(v) = (0..nv).find(|&v| on[v][0] && on[v][1]) {
            return Err(Error::InvalidGeometry(format!(
                "vertex {v} lies on both the surface and the top boundary"
            )));
        }
        let mut master_of = vec![None; nv];
        for &(l, r) in mesh.periodic_pairs() {
            master_of[r] = Some(l);
        }

        let mut status = vec![VertexStatus::Dirichlet; nv];
        let mut free_count = 0;
        for v in 0..nv {
            if on[v][0] {
                continue;
            }
            if on[v][3] {
                continue;
            }
            status[v] = VertexStatus::Free(free_count);
            free_count += 1;
        }
        for v in 0..nv {
            if on[v][0] || !on[v][3] {
                continue;
            }
            let master = master_of[v].ok_or_else(|| {
                Error::InvalidGeometry(format!("right boundary vertex {v} has no periodic partner"))
            })?;
            if !matches!(status[master], VertexStatus::Free(_)) {
                return Err(Error::InvalidGeometry(format!(
                    "periodic partner {master} of vertex {v} is not free"
                )));
            }
            status[v] = VertexStatus::Slave {
                master,
                phase: qp.phase,
            };
        }

        let mut gamma_vertices: Vec<usize> = (0..nv)
            .filter(|&v| on[v][1] && matches!(status[v], VertexStatus::Free(_)))
            .collect();
        gamma_vertices.sort_by(|&a, &b| mesh.vertices()[a][0].total_cmp(&mesh.vertices()[b][0]));

        Ok(Self {
            status,
            free_count,
            gamma_vertices,
            qp,
        })
    }

    pub fn status(&self) -> &[VertexStatus] {
        &self.status
    }

    pub fn free_count(&self) -> usize {
        self.free_count
    }

    /// Number of scalar complex unknowns.
    pub fn ndof(&self) -> usize {
        2 * self.free_count
    }

    /// Free vertices on y = b sorted by x.
    pub fn gamma_vertices(&self) -> &[usize] {
        &self.gamma_vertices
    }

    pub fn params(&self) -> &QuasiPeriodicParams {
        &self.qp
    }

    /// Unknown block index and multiplier carried by a vertex, `None` for Dirichlet vertices.
    pub fn vertex_dof(&self, v: usize) -> Option<(usize, C64)> {
        match self.status[v] {
            VertexStatus::Free(k) => Some((k, C64::new(1.0, 0.0))),
            VertexStatus::Slave { master, phase } => match self.status[master] {
                VertexStatus::Free(k) => Some((k, phase)),
                _ => unreachable!("slave of a non-free vertex"),
            },
            VertexStatus::Dirichlet => None,
        }
    }

    /// Expands free unknowns into per-vertex values; `dirichlet` holds the
    /// boundary values indexed by vertex (entries at non-Dirichlet vertices are ignored).
    pub fn apply_constraints(&self, free: &[C64], dirichlet: &[CVec2]) -> Vec<CVec2> {
        assert_eq!(free.len(), self.ndof(), "free vector length");
        self.status
            .iter()
            .enumerate()
            .map(|(v, s)| match *s {
                VertexStatus::Free(k) => [free[2 * k], free[2 * k + 1]],
                VertexStatus::Slave { master, phase } => {
                    let VertexStatus::Free(k) = self.status[master] else {
                        unreachable!()
                    };
                    [phase * free[2 * k], phase * free[2 * k + 1]]
                }
                VertexStatus::Dirichlet => dirichlet.get(v).copied().unwrap_or([ZERO, ZERO]),
            })
            .collect()
    }

    /// Extracts the free unknowns from a full per-vertex field.
    pub fn restrict(&self, full: &[CVec2]) -> Vec<C64> {
        let mut out = vec![ZERO; self.ndof()];
        for (v, s) in self.status.iter().enumerate() {
            if let VertexStatus::Free(k) = *s {
                out[2 * k] = full[v][0];
                out[2 * k + 1] = full[v][1];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryEdge, Mesh};

    fn two_triangle_mesh() -> Mesh {
        let v = vec![[0.0, 0.0], [0.5, 0.0], [0.5, 0.25], [0.0, 0.25]];
        let t = vec![[0, 1, 2], [0, 2, 3]];
        let be = vec![
            BoundaryEdge { vertices: [0, 1], tag: BoundaryTag::Surface },
            BoundaryEdge { vertices: [3, 2], tag: BoundaryTag::Top },
            BoundaryEdge { vertices: [0, 3], tag: BoundaryTag::Left },
            BoundaryEdge { vertices: [1, 2], tag: BoundaryTag::Right },
        ];
        Mesh::from_parts(v, t, be, 0.5, 0.25)
    }

    #[test]
    fn two_triangle_statuses() {
        let m = two_triangle_mesh();
        assert!(m.validate().is_empty(), "{:?}", m.validate());
        let qp = QuasiPeriodicParams::new(0.7, 0.5);
        let d = DofMap::build(&m, qp).unwrap();
        assert_eq!(d.free_count(), 1);
        assert_eq!(d.status()[3], VertexStatus::Free(0));
        assert_eq!(d.status()[2], VertexStatus::Slave { master: 3, phase: qp.phase });
        assert_eq!(d.status()[0], VertexStatus::Dirichlet);
        assert_eq!(d.status()[1], VertexStatus::Dirichlet);
        assert_eq!(d.gamma_vertices(), &[3]);
    }

    #[test]
    fn normal_incidence_has_unit_phase() {
        let qp = QuasiPeriodicParams::new(0.0, 0.5);
        assert_eq!(qp.phase, C64::new(1.0, 0.0));
    }

    #[test]
    fn four_by_two_count() {
        let m = Mesh::rectangle(0.5, 0.25, 4, 2).unwrap();
        assert_eq!(m.vertices().len(), 15);
        let d = DofMap::build(&m, QuasiPeriodicParams::new(0.3, 0.5)).unwrap();
        assert_eq!(d.free_count(), 15 - 5 - 2);
        let xs: Vec<f64> = d.gamma_vertices().iter().map(|&v| m.vertices()[v][0]).collect();
        assert_eq!(xs, vec![0.0, 0.125, 0.25, 0.375]);
    }

    #[test]
    fn constraints_carry_the_phase() {
        let m = Mesh::rectangle(0.5, 0.25, 4, 2).unwrap();
        let qp = QuasiPeriodicParams::new(1.3, 0.5);
        let d = DofMap::build(&m, qp).unwrap();
        let c = C64::new(0.4, -1.2);
        let full = d.apply_constraints(&vec![c; d.ndof()], &[]);
        for &(l, r) in m.periodic_pairs() {
            if d.vertex_dof(l).is_some() {
                assert_eq!(full[l], [c, c]);
                assert_eq!(full[r], [c * qp.phase, c * qp.phase]);
            }
        }
        let zero = d.apply_constraints(&vec![ZERO; d.ndof()], &[]);
        assert!(zero.iter().all(|v| v[0] == ZERO && v[1] == ZERO));

        // a single master on x = 0 lights up exactly its partner among slaves
        let (l, r) = m.periodic_pairs()[1];
        let Some((k, _)) = d.vertex_dof(l) else { panic!() };
        let mut free = vec![ZERO; d.ndof()];
        free[2 * k] = c;
        let full = d.apply_constraints(&free, &[]);
        for (v, s) in d.status().iter().enumerate() {
            if let VertexStatus::Slave { .. } = s {
                let nonzero = full[v][0] != ZERO;
                assert_eq!(nonzero, v == r);
            }
        }
        assert_eq!(full[r][0], qp.phase * full[l][0]);
        assert_eq!(d.restrict(&full), free);
    }

    #[test]
    fn surface_touching_top_is_rejected() {
        let v = vec![[0.0, 0.0], [0.5, 0.0], [0.25, 0.25]];
        let be = vec![
            BoundaryEdge { vertices: [0, 1], tag: BoundaryTag::Surface },
            BoundaryEdge { vertices: [1, 2], tag: BoundaryTag::Surface },
            BoundaryEdge { vertices: [2, 0], tag: BoundaryTag::Top },
        ];
        let m = Mesh::from_parts(v, vec![[0, 1, 2]], be, 0.5, 0.25);
        assert!(DofMap::build(&m, QuasiPeriodicParams::new(0.0, 0.5)).is_err());
    }
}
