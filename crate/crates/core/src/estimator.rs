//! Residual a posteriori indicators: element residual plus interior, Γ and
//! periodic-side jump terms.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::dtn::{DtnOperator, ElasticMedium};
use crate::error::{Error, Result};
use crate::linalg::{CMat2, CVec2};
use crate::mesh::{BoundaryTag, Edge, Mesh, Point};
use crate::p1::{element_gradient, GAUSS5};
use crate::space::QuasiPeriodicParams;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IndicatorParts {
    /// h_K ‖𝓡u_h‖_{L²(K)}
    pub residual: f64,
    /// (½ Σ_{e⊂∂K} h_e ‖J_e‖²)^{1/2}
    pub jump: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorIndicators {
    pub eta: Vec<f64>,
    pub eps_h: f64,
    pub breakdown: Vec<IndicatorParts>,
}

pub fn element_gradients(mesh: &Mesh, values: &[CVec2]) -> Vec<CMat2> {
    (0..mesh.triangles().len())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangles()[t];
            element_gradient(&mesh.corners(t), &tri.map(|v| values[v]))
        })
        .collect()
}

/// h_K ω² ‖u_h‖_{L²(K)}, exact through the P1 mass matrix.
pub fn element_residual(mesh: &Mesh, t: usize, values: &[CVec2], medium: &ElasticMedium) -> f64 {
    let tri = mesh.triangles()[t];
    let area = mesh.area(t);
    let mut sq = 0.0;
    for i in 0..2 {
        let u = tri.map(|v| values[v][i]);
        for a in 0..3 {
            for b in 0..3 {
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                sq += m * (u[a].conj() * u[b]).re;
            }
        }
    }
    mesh.diameter(t) * medium.omega * medium.omega * sq.max(0.0).sqrt()
}

/// μGν + (λ+μ)(∇·u)ν for a constant gradient.
pub fn traction(g: &CMat2, normal: [f64; 2], medium: &ElasticMedium) -> CVec2 {
    let div = g[0][0] + g[1][1];
    let lm = medium.lambda + medium.mu;
    [
        medium.mu * (g[0][0] * normal[0] + g[0][1] * normal[1]) + lm * div * normal[0],
        medium.mu * (g[1][0] * normal[0] + g[1][1] * normal[1]) + lm * div * normal[1],
    ]
}

fn length(a: Point, b: Point) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

fn sq_norm(v: &CVec2) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

/// Unit normal of an edge pointing away from triangle t.
fn outward_normal(mesh: &Mesh, t: usize, e: [usize; 2]) -> [f64; 2] {
    let p = mesh.vertices();
    let (a, b) = (p[e[0]], p[e[1]]);
    let l = length(a, b);
    let mut n = [(b[1] - a[1]) / l, -(b[0] - a[0]) / l];
    let tri = mesh.triangles()[t];
    let c = tri.iter().copied().find(|&v| v != e[0] && v != e[1]).expect("edge of triangle");
    let to_c = [p[c][0] - a[0], p[c][1] - a[1]];
    if n[0] * to_c[0] + n[1] * to_c[1] > 0.0 {
        n = [-n[0], -n[1]];
    }
    n
}

/// ‖J_e‖_{L²(e)} across an interior edge; J_e is constant for P1 fields.
pub fn interior_jump(mesh: &Mesh, edge: &Edge, gradients: &[CMat2], medium: &ElasticMedium) -> f64 {
    let (Some(k1), Some(k2)) = (edge.triangles[0], edge.triangles[1]) else {
        return 0.0;
    };
    let n1 = outward_normal(mesh, k1, edge.vertices);
    let n2 = [-n1[0], -n1[1]];
    let t1 = traction(&gradients[k1], n1, medium);
    let t2 = traction(&gradients[k2], n2, medium);
    let j = [t1[0] + t2[0], t1[1] + t2[1]];
    let p = mesh.vertices();
    (length(p[edge.vertices[0]], p[edge.vertices[1]]) * sq_norm(&j)).sqrt()
}

fn gauss_sq(f: &dyn Fn(f64) -> CVec2, a: f64, b: f64) -> f64 {
    GAUSS5.iter().map(|&(s, w)| w * sq_norm(&f(a + s * (b - a)))).sum::<f64>() * (b - a)
}

/// Five-point Gauss on [a, b], checked against the two-halves value and split
/// further where they disagree.
fn adaptive_sq(f: &dyn Fn(f64) -> CVec2, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = gauss_sq(f, a, m);
    let right = gauss_sq(f, m, b);
    let halves = left + right;
    if depth == 0 || (halves - whole).abs() <= 1e-10 * halves.max(f64::MIN_POSITIVE) {
        return halves;
    }
    adaptive_sq(f, a, m, left, depth - 1) + adaptive_sq(f, m, b, right, depth - 1)
}

/// ‖2(𝒯_N u_h − ℬu_h)‖_{L²(e)} on a top edge, with ℬu = μ∂_y u + (λ+μ)(0,1)ᵀ∇·u
/// taken from the adjacent element.
pub fn gamma_jump(
    mesh: &Mesh,
    edge: &Edge,
    gradients: &[CMat2],
    dtn: &DtnOperator,
    coefficients: &[CVec2],
    medium: &ElasticMedium,
) -> f64 {
    let Some(k) = edge.triangles[0] else { return 0.0 };
    let bu = traction(&gradients[k], [0.0, 1.0], medium);
    let p = mesh.vertices();
    let (x0, x1) = {
        let (a, b) = (p[edge.vertices[0]][0], p[edge.vertices[1]][0]);
        (a.min(b), a.max(b))
    };
    let f = |x: f64| {
        let t = dtn.evaluate(coefficients, x);
        [2.0 * (t[0] - bu[0]), 2.0 * (t[1] - bu[1])]
    };
    let whole = gauss_sq(&f, x0, x1);
    adaptive_sq(&f, x0, x1, whole, 6).sqrt()
}

/// Jump norms for a left edge and its partner on x = Λ:
/// J_e = t(K₁) − e^{−iαΛ} t(K₂) and J_{e′} = e^{iαΛ} t(K₁) − t(K₂), with t the
/// x-traction μ∂_x u + (λ+μ)(1,0)ᵀ∇·u.
pub fn periodic_jump(
    mesh: &Mesh,
    left: &Edge,
    right: &Edge,
    gradients: &[CMat2],
    qp: &QuasiPeriodicParams,
    medium: &ElasticMedium,
) -> (f64, f64) {
    let (Some(k1), Some(k2)) = (left.triangles[0], right.triangles[0]) else {
        return (0.0, 0.0);
    };
    let t1 = traction(&gradients[k1], [1.0, 0.0], medium);
    let t2 = traction(&gradients[k2], [1.0, 0.0], medium);
    let back = qp.phase.conj();
    let je = [t1[0] - back * t2[0], t1[1] - back * t2[1]];
    let jp = [qp.phase * t1[0] - t2[0], qp.phase * t1[1] - t2[1]];
    let p = mesh.vertices();
    let l = length(p[left.vertices[0]], p[left.vertices[1]]);
    ((l * sq_norm(&je)).sqrt(), (l * sq_norm(&jp)).sqrt())
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// η_K = h_K‖𝓡u_h‖ + (½ Σ_{e⊂∂K} h_e‖J_e‖²)^{1/2} for every triangle.
pub fn indicators(
    mesh: &Mesh,
    values: &[CVec2],
    dtn: &DtnOperator,
    medium: &ElasticMedium,
    qp: &QuasiPeriodicParams,
) -> Result<ErrorIndicators> {
    let nt = mesh.triangles().len();
    let gradients = element_gradients(mesh, values);
    let coefficients = dtn.trace_coefficients(values);
    let edges = mesh.edges();
    let index: HashMap<(usize, usize), usize> =
        edges.iter().enumerate().map(|(i, e)| (key(e.vertices[0], e.vertices[1]), i)).collect();
    let partner: HashMap<usize, usize> = mesh.periodic_pairs().iter().copied().collect();
    let p = mesh.vertices();

    // (triangle, ½ h_e ‖J_e‖²) contributions per edge, merged in edge order
    let contributions: Vec<Result<Vec<(usize, f64)>>> = edges
        .par_iter()
        .map(|e| {
            let h = length(p[e.vertices[0]], p[e.vertices[1]]);
            let out = match e.tag {
                None => {
                    let j = interior_jump(mesh, e, &gradients, medium);
                    let w = 0.5 * h * j * j;
                    e.triangles.iter().flatten().map(|&t| (t, w)).collect()
                }
                Some(BoundaryTag::Top) => {
                    let j = gamma_jump(mesh, e, &gradients, dtn, &coefficients, medium);
                    vec![(e.triangles[0].expect("boundary edge has a triangle"), 0.5 * h * j * j)]
                }
                Some(BoundaryTag::Left) => {
                    let [a, b] = e.vertices;
                    let (Some(&ra), Some(&rb)) = (partner.get(&a), partner.get(&b)) else {
                        return Err(Error::UnpairedEdge(a, b));
                    };
                    let Some(&ri) = index.get(&key(ra, rb)) else {
                        return Err(Error::UnpairedEdge(a, b));
                    };
                    let right = &edges[ri];
                    let (je, jp) = periodic_jump(mesh, e, right, &gradients, qp, medium);
                    vec![
                        (e.triangles[0].expect("boundary edge has a triangle"), 0.5 * h * je * je),
                        (right.triangles[0].expect("boundary edge has a triangle"), 0.5 * h * jp * jp),
                    ]
                }
                Some(BoundaryTag::Right) | Some(BoundaryTag::Surface) => Vec::new(),
            };
            Ok(out)
        })
        .collect();

    let mut jump_sq = vec![0.0; nt];
    for c in contributions {
        for (t, w) in c? {
            jump_sq[t] += w;
        }
    }
    let breakdown: Vec<IndicatorParts> = (0..nt)
        .into_par_iter()
        .map(|t| IndicatorParts {
            residual: element_residual(mesh, t, values, medium),
            jump: jump_sq[t].sqrt(),
        })
        .collect();
    let eta: Vec<f64> = breakdown.iter().map(|b| b.residual + b.jump).collect();
    let eps_h = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
    Ok(ErrorIndicators { eta, eps_h, breakdown })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{C64, ZERO};
    use crate::analytic::ExactFlatSolution;
    use crate::dtn::DtnOperator;
    use crate::space::DofMap;
    use std::f64::consts::PI;

    fn medium() -> ElasticMedium {
        ElasticMedium::new(2.0, 1.0, 2.0).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn residual_of_simple_fields() {
        let m = Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![], 1.0, 1.0);
        let med = medium();
        assert_eq!(element_residual(&m, 0, &[[ZERO; 2]; 3], &med), 0.0);
        let k = [c(0.3, 0.4), c(0.0, -1.0)];
        let got = element_residual(&m, 0, &[k; 3], &med);
        let expect = 2f64.sqrt() * 4.0 * (1.25f64).sqrt() * 0.5f64.sqrt();
        assert!((got - expect).abs() < 1e-14);
        let one = [c(1.0, 0.0), ZERO];
        let got = element_residual(&m, 0, &[one, [ZERO; 2], [ZERO; 2]], &med);
        let expect = 2f64.sqrt() * 4.0 * (0.5f64 / 6.0).sqrt();
        assert!((got - expect).abs() < 1e-14);
    }

    fn two_triangles() -> Mesh {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        Mesh::from_parts(v, vec![[0, 1, 2], [0, 2, 3]], vec![], 1.0, 1.0)
    }

    #[test]
    fn interior_jump_cases() {
        let m = two_triangles();
        let med = medium();
        let edge = m.edges().into_iter().find(|e| e.triangles[1].is_some()).unwrap();
        let g: CMat2 = [[c(1.0, 0.5), c(-0.2, 0.0)], [c(0.0, 0.3), c(2.0, 0.0)]];
        assert_eq!(interior_jump(&m, &edge, &[g, g], &med), 0.0);

        // zero on the first triangle, gradient G on the second
        let z = [[ZERO; 2]; 2];
        let got = interior_jump(&m, &edge, &[z, g], &med);
        let s = 0.5f64.sqrt();
        let nu2 = [-s, s];
        let div = g[0][0] + g[1][1];
        let t = [
            1.0 * (g[0][0] * nu2[0] + g[0][1] * nu2[1]) + 3.0 * div * nu2[0],
            1.0 * (g[1][0] * nu2[0] + g[1][1] * nu2[1]) + 3.0 * div * nu2[1],
        ];
        let expect = (2f64.sqrt() * (t[0].norm_sqr() + t[1].norm_sqr())).sqrt();
        assert!((got - expect).abs() < 1e-13);

        let swapped = Edge {
            triangles: [edge.triangles[1], edge.triangles[0]],
            ..edge
        };
        assert!((interior_jump(&m, &swapped, &[z, g], &med) - got).abs() < 1e-14);
    }

    fn flat_problem(n: usize) -> (Mesh, DofMap, DtnOperator, ExactFlatSolution, QuasiPeriodicParams) {
        let med = medium();
        let exact = ExactFlatSolution::new(&med, PI / 3.0);
        let qp = QuasiPeriodicParams::new(exact.alpha, 0.5);
        let m = Mesh::rectangle(0.5, 0.25, 2 * n, n).unwrap();
        let d = DofMap::build(&m, qp).unwrap();
        let dtn = DtnOperator::new(&med, 6, &m, &d).unwrap();
        (m, d, dtn, exact, qp)
    }

    fn interpolate(m: &Mesh, exact: &ExactFlatSolution) -> Vec<CVec2> {
        m.vertices().iter().map(|&p| exact.scattered(p).0).collect()
    }

    #[test]
    fn zero_field_has_zero_indicators() {
        let (m, _, dtn, _, qp) = flat_problem(4);
        let ind = indicators(&m, &vec![[ZERO; 2]; m.vertices().len()], &dtn, &medium(), &qp).unwrap();
        assert!(ind.eta.iter().all(|&e| e == 0.0));
        assert_eq!(ind.eps_h, 0.0);
    }

    #[test]
    fn jumps_of_the_interpolated_oracle_shrink() {
        let med = medium();
        let mut gamma = Vec::new();
        let mut periodic = Vec::new();
        for n in [4, 8, 16] {
            let (m, _, dtn, exact, qp) = flat_problem(n);
            let u = interpolate(&m, &exact);
            let g = element_gradients(&m, &u);
            let coeff = dtn.trace_coefficients(&u);
            let edges = m.edges();
            let gsum: f64 = edges
                .iter()
                .filter(|e| e.tag == Some(BoundaryTag::Top))
                .map(|e| gamma_jump(&m, e, &g, &dtn, &coeff, &med).powi(2))
                .sum();
            gamma.push(gsum.sqrt());
            let idx: HashMap<_, _> = edges.iter().map(|e| (key(e.vertices[0], e.vertices[1]), e)).collect();
            let pair: HashMap<usize, usize> = m.periodic_pairs().iter().copied().collect();
            let mut psum = 0.0;
            for e in edges.iter().filter(|e| e.tag == Some(BoundaryTag::Left)) {
                let r = idx[&key(pair[&e.vertices[0]], pair[&e.vertices[1]])];
                let (a, b) = periodic_jump(&m, e, r, &g, &qp, &med);
                assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
                psum += a * a;
            }
            periodic.push(psum.sqrt());
        }
        assert!(gamma[1] < 0.7 * gamma[0] && gamma[2] < 0.7 * gamma[1], "{gamma:?}");
        assert!(periodic[1] < 0.7 * periodic[0] && periodic[2] < 0.7 * periodic[1], "{periodic:?}");
    }

    #[test]
    fn linear_periodic_field_has_no_jumps() {
        // u = (y, 2y) is periodic in x and linear, so α = 0 jumps vanish
        let med = medium();
        let m = Mesh::rectangle(0.5, 0.25, 4, 2).unwrap();
        let qp = QuasiPeriodicParams::new(0.0, 0.5);
        let u: Vec<CVec2> = m.vertices().iter().map(|p| [c(p[1], 0.0), c(2.0 * p[1], 0.0)]).collect();
        let g = element_gradients(&m, &u);
        let edges = m.edges();
        for e in edges.iter().filter(|e| e.tag.is_none()) {
            assert!(interior_jump(&m, e, &g, &med) < 1e-13);
        }
        let idx: HashMap<_, _> = edges.iter().map(|e| (key(e.vertices[0], e.vertices[1]), e)).collect();
        let pair: HashMap<usize, usize> = m.periodic_pairs().iter().copied().collect();
        for e in edges.iter().filter(|e| e.tag == Some(BoundaryTag::Left)) {
            let r = idx[&key(pair[&e.vertices[0]], pair[&e.vertices[1]])];
            assert_eq!(periodic_jump(&m, e, r, &g, &qp, &med), (0.0, 0.0));
        }
    }

    #[test]
    fn jumps_scale_linearly_and_eta_bounds_parts() {
        let med = medium();
        let (m, _, dtn, exact, qp) = flat_problem(4);
        let u = interpolate(&m, &exact);
        let u2: Vec<CVec2> = u.iter().map(|v| [v[0] * 2.0, v[1] * 2.0]).collect();
        let a = indicators(&m, &u, &dtn, &med, &qp).unwrap();
        let b = indicators(&m, &u2, &dtn, &med, &qp).unwrap();
        for (x, y) in a.eta.iter().zip(&b.eta) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y);
        }
        for (e, part) in a.eta.iter().zip(&a.breakdown) {
            assert!(*e >= part.residual && *e >= part.jump);
        }
        let sum: f64 = a.eta.iter().map(|e| e * e).sum();
        assert!((sum.sqrt() - a.eps_h).abs() <= 1e-14 * a.eps_h);
    }

    #[test]
    fn unpaired_left_edge_is_reported() {
        let (m, _, dtn, exact, qp) = flat_problem(2);
        let u = interpolate(&m, &exact);
        // nudging a right vertex off its partner's height breaks the pairing
        let mut v = m.vertices().to_vec();
        let (_, r) = m.periodic_pairs()[1];
        v[r][1] += 1e-9;
        let broken = Mesh::from_parts(v, m.triangles().to_vec(), m.boundary_edges().to_vec(), 0.5, 0.25);
        assert!(matches!(
            indicators(&broken, &u, &dtn, &medium(), &qp),
            Err(Error::UnpairedEdge(..))
        ));
    }
}
