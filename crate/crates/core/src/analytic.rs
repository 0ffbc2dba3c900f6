//! Incident plane waves, the closed-form flat-surface solution and H¹ error
//! norms against a known field.

use crate::dtn::ElasticMedium;
use crate::linalg::{CMat2, CVec2, C64, I, ZERO};
use crate::mesh::{Mesh, Point};
use crate::p1::{barycentric_point, element_gradient, TriangleRule, DEGREE4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveKind {
    Compressional,
    Shear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentWave {
    pub kind: WaveKind,
    /// Angle in (−π/2, π/2) measured from the downward vertical.
    pub theta: f64,
}

impl IncidentWave {
    pub fn compressional(theta: f64) -> Self {
        Self {
            kind: WaveKind::Compressional,
            theta,
        }
    }

    pub fn shear(theta: f64) -> Self {
        Self {
            kind: WaveKind::Shear,
            theta,
        }
    }

    /// Propagation direction (sin θ, −cos θ).
    pub fn direction(&self) -> [f64; 2] {
        [self.theta.sin(), -self.theta.cos()]
    }

    /// Polarisation: d for P waves, d⊥ = (cos θ, sin θ) for S waves.
    pub fn polarization(&self) -> [f64; 2] {
        match self.kind {
            WaveKind::Compressional => self.direction(),
            WaveKind::Shear => [self.theta.cos(), self.theta.sin()],
        }
    }

    pub fn wavenumber(&self, medium: &ElasticMedium) -> f64 {
        match self.kind {
            WaveKind::Compressional => medium.kappa_p(),
            WaveKind::Shear => medium.kappa_s(),
        }
    }

    /// Quasi-periodicity wavenumber α = κ sin θ.
    pub fn alpha(&self, medium: &ElasticMedium) -> f64 {
        self.wavenumber(medium) * self.theta.sin()
    }

    /// Value and gradient (G[i][j] = ∂_j u_i) at a point.
    pub fn field(&self, medium: &ElasticMedium, p: Point) -> (CVec2, CMat2) {
        let k = self.wavenumber(medium);
        let d = self.direction();
        let pol = self.polarization();
        let e = C64::from_polar(1.0, k * (p[0] * d[0] + p[1] * d[1]));
        let value = [pol[0] * e, pol[1] * e];
        let mut grad = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                grad[i][j] = I * k * d[j] * value[i];
            }
        }
        (value, grad)
    }
}

/// Reflected P and S waves off a rigid flat surface y = 0 for P incidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactFlatSolution {
    pub kappa_p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub r_p: f64,
    pub r_s: f64,
}

impl ExactFlatSolution {
    pub fn new(medium: &ElasticMedium, theta: f64) -> Self {
        let k1 = medium.kappa_p();
        let k2 = medium.kappa_s();
        let alpha = k1 * theta.sin();
        let beta = k1 * theta.cos();
        let gamma = (k2 * k2 - alpha * alpha).sqrt();
        let denom = alpha * alpha + beta * gamma;
        Self {
            kappa_p: k1,
            alpha,
            beta,
            gamma,
            r_p: (alpha * alpha - beta * gamma) / denom,
            r_s: 2.0 * alpha * beta / denom,
        }
    }

    /// Scattered displacement and its gradient. Adding the incident P wave
    /// gives a total field that vanishes on y = 0.
    pub fn scattered(&self, p: Point) -> (CVec2, CMat2) {
        let (x, y) = (p[0], p[1]);
        let cp = -self.r_p / self.kappa_p;
        let cs = -self.r_s / self.kappa_p;
        let ep = C64::from_polar(1.0, self.alpha * x + self.beta * y);
        let es = C64::from_polar(1.0, self.alpha * x + self.gamma * y);
        let vp = [cp * self.alpha * ep, cp * self.beta * ep];
        let vs = [cs * self.gamma * es, -cs * self.alpha * es];
        let kp = [self.alpha, self.beta];
        let ks = [self.alpha, self.gamma];
        let mut grad = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                grad[i][j] = I * (kp[j] * vp[i] + ks[j] * vs[i]);
            }
        }
        ([vp[0] + vs[0], vp[1] + vs[1]], grad)
    }

    /// Mode-0 Fourier coefficient of the scattered trace at height y.
    pub fn trace_coefficient(&self, y: f64) -> CVec2 {
        let (v, _) = self.scattered([0.0, y]);
        v
    }
}

/// (Σ_K ∫_K |u − u_h|² + |∇u − ∇u_h|²)^{1/2} for a P1 field given per vertex.
pub fn h1_error<F>(mesh: &Mesh, field: &[CVec2], exact: F) -> f64
where
    F: Fn(Point) -> (CVec2, CMat2),
{
    h1_error_with_rule(mesh, field, exact, &DEGREE4)
}

pub fn h1_error_with_rule<F>(mesh: &Mesh, field: &[CVec2], exact: F, rule: &TriangleRule) -> f64
where
    F: Fn(Point) -> (CVec2, CMat2),
{
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.corners(t);
        let vals = [field[tri[0]], field[tri[1]], field[tri[2]]];
        let gh = element_gradient(&p, &vals);
        let area = mesh.area(t);
        let mut local = 0.0;
        for (l, w) in rule.points {
            let q = barycentric_point(&p, l);
            let (u, g) = exact(q);
            let mut s = 0.0;
            for i in 0..2 {
                let uh = l[0] * vals[0][i] + l[1] * vals[1][i] + l[2] * vals[2][i];
                s += (u[i] - uh).norm_sqr();
                for j in 0..2 {
                    s += (g[i][j] - gh[i][j]).norm_sqr();
                }
            }
            local += w * s;
        }
        total += area * local;
    }
    total.sqrt()
}

/// Closed-form ‖u^inc‖_{H¹} of a unit plane wave over a region of the given
/// area: |u|² = 1 and |∇u|² = κ² pointwise.
pub fn plane_wave_h1_norm(area: f64, kappa: f64) -> f64 {
    (area * (1.0 + kappa * kappa)).sqrt()
}
