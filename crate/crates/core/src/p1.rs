//! Linear Lagrange element helpers and triangle quadrature.

use crate::linalg::{CMat2, CVec2, C64, ZERO};
use crate::mesh::Point;

/// Gradients of the three barycentric coordinates of a triangle.
pub fn barycentric_gradients(p: &[Point; 3]) -> [[f64; 2]; 3] {
    let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let inv = 1.0 / two_area;
    [
        [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
        [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
        [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
    ]
}

/// Constant gradient G[i][j] = ∂_j u_i of the P1 interpolant of nodal values.
pub fn element_gradient(p: &[Point; 3], values: &[CVec2; 3]) -> CMat2 {
    let g = barycentric_gradients(p);
    let mut out = [[ZERO; 2]; 2];
    for (k, gk) in g.iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += values[k][i] * gk[j];
            }
        }
    }
    out
}

pub fn divergence(g: &CMat2) -> C64 {
    g[0][0] + g[1][1]
}

/// Weights normalised to sum to one and barycentric points.
pub struct TriangleRule {
    pub points: &'static [([f64; 3], f64)],
}

const A4: f64 = 0.445948490915965;
const B4: f64 = 0.108103018168070;
const C4: f64 = 0.091576213509771;
const D4: f64 = 0.816847572980459;
const W4A: f64 = 0.223381589678011;
const W4B: f64 = 0.109951743655322;

/// Six-point rule exact for degree 4.
pub const DEGREE4: TriangleRule = TriangleRule {
    points: &[
        ([B4, A4, A4], W4A),
        ([A4, B4, A4], W4A),
        ([A4, A4, B4], W4A),
        ([D4, C4, C4], W4B),
        ([C4, D4, C4], W4B),
        ([C4, C4, D4], W4B),
    ],
};

const A5: f64 = 0.470142064105115;
const B5: f64 = 0.059715871789770;
const C5: f64 = 0.101286507323456;
const D5: f64 = 0.797426985353087;
const W5A: f64 = 0.132394152788506;
const W5B: f64 = 0.125939180544827;

/// Seven-point rule exact for degree 5.
pub const DEGREE5: TriangleRule = TriangleRule {
    points: &[
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([B5, A5, A5], W5A),
        ([A5, B5, A5], W5A),
        ([A5, A5, B5], W5A),
        ([D5, C5, C5], W5B),
        ([C5, D5, C5], W5B),
        ([C5, C5, D5], W5B),
    ],
};

pub fn barycentric_point(p: &[Point; 3], l: &[f64; 3]) -> Point {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

/// Gauss–Legendre nodes on [0, 1] with weights summing to one.
pub const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332_0, 0.118_463_442_528_094_5),
];
