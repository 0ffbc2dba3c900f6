//! Mode-level pieces of the Dirichlet-to-Neumann map on y = b: vertical
//! wavenumbers, the 2×2 mode matrices, the truncation bound and the Fourier
//! moments of P1 traces.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{mat2_adjoint, mat2_vec, CMat2, CVec2, C64, I, ZERO};
use crate::mesh::{BoundaryTag, Mesh};
use crate::space::{DofMap, QuasiPeriodicParams, VertexStatus};

const RESONANCE_TOL: f64 = 1e-12;

/// Homogeneous isotropic medium with unit density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticMedium {
    pub lambda: f64,
    pub mu: f64,
    pub omega: f64,
}

impl ElasticMedium {
    pub fn new(lambda: f64, mu: f64, omega: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if !(lambda + mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda + mu must be positive, got {}",
                lambda + mu
            )));
        }
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        Ok(Self { lambda, mu, omega })
    }

    /// Compressional wavenumber ω / (λ + 2μ)^{1/2}.
    pub fn kappa_p(&self) -> f64 {
        self.omega / (self.lambda + 2.0 * self.mu).sqrt()
    }

    /// Shear wavenumber ω / μ^{1/2}.
    pub fn kappa_s(&self) -> f64 {
        self.omega / self.mu.sqrt()
    }
}

/// Vertical wavenumber: (κ² − α²)^{1/2} for propagating modes, i(α² − κ²)^{1/2}
/// for evanescent ones.
pub fn beta(kappa: f64, alpha_n: f64) -> Result<C64> {
    let gap = alpha_n.abs() - kappa;
    if gap.abs() <= RESONANCE_TOL * kappa {
        return Err(Error::Resonance { kappa, alpha_n });
    }
    // (κ−|α|)(κ+|α|) avoids cancellation near the cutoff
    let s = (gap.abs() * (kappa + alpha_n.abs())).sqrt();
    Ok(if gap < 0.0 { C64::new(s, 0.0) } else { C64::new(0.0, s) })
}

/// χ_n = α_n² + β₁β₂, evaluated without cancellation when both modes are evanescent.
pub fn chi(medium: &ElasticMedium, alpha_n: f64) -> Result<C64> {
    let (k1, k2) = (medium.kappa_p(), medium.kappa_s());
    let b1 = beta(k1, alpha_n)?;
    let b2 = beta(k2, alpha_n)?;
    let a2 = alpha_n * alpha_n;
    let value = if b1.re == 0.0 && b2.re == 0.0 {
        let s = b1.im * b2.im;
        C64::new((a2 * (k1 * k1 + k2 * k2) - k1 * k1 * k2 * k2) / (a2 + s), 0.0)
    } else {
        a2 + b1 * b2
    };
    if value.norm() <= RESONANCE_TOL * a2.max(k2 * k2) {
        return Err(Error::Resonance { kappa: k2, alpha_n });
    }
    Ok(value)
}

/// The 2×2 DtN matrix of a single mode.
pub fn dtn_matrix(medium: &ElasticMedium, alpha_n: f64) -> Result<CMat2> {
    let b1 = beta(medium.kappa_p(), alpha_n)?;
    let b2 = beta(medium.kappa_s(), alpha_n)?;
    let chi = chi(medium, alpha_n)?;
    Ok(assemble_matrix(medium, alpha_n, b1, b2, chi))
}

fn assemble_matrix(medium: &ElasticMedium, alpha_n: f64, b1: C64, b2: C64, chi: C64) -> CMat2 {
    let w2 = medium.omega * medium.omega;
    let s = I / chi;
    let off = medium.mu * alpha_n * chi - w2 * alpha_n;
    [[s * w2 * b1, s * off], [-(s * off), s * w2 * b2]]
}

/// −(M + M*)/2.
pub fn symmetrized_block(m: &CMat2) -> CMat2 {
    let a = mat2_adjoint(m);
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = -0.5 * (m[r][c] + a[r][c]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtnMode {
    pub n: i64,
    pub alpha_n: f64,
    pub beta1: C64,
    pub beta2: C64,
    pub chi: C64,
    pub matrix: CMat2,
}

impl DtnMode {
    pub fn new(medium: &ElasticMedium, qp: &QuasiPeriodicParams, n: i64) -> Result<Self> {
        let alpha_n = alpha_n(qp, n);
        let beta1 = beta(medium.kappa_p(), alpha_n)?;
        let beta2 = beta(medium.kappa_s(), alpha_n)?;
        let chi = chi(medium, alpha_n)?;
        Ok(Self {
            n,
            alpha_n,
            beta1,
            beta2,
            chi,
            matrix: assemble_matrix(medium, alpha_n, beta1, beta2, chi),
        })
    }
}

pub fn alpha_n(qp: &QuasiPeriodicParams, n: i64) -> f64 {
    qp.alpha + n as f64 * (2.0 * PI / qp.period)
}

/// Smallest N ≥ 1 such that every mode with |n| > N is evanescent for the
/// shear wavenumber.
pub fn min_truncation_order(medium: &ElasticMedium, qp: &QuasiPeriodicParams) -> usize {
    let k2 = medium.kappa_s();
    let mut n = 1usize;
    loop {
        let m = n as i64 + 1;
        let evanescent = |k: i64| alpha_n(qp, k).abs() > k2 * (1.0 + RESONANCE_TOL);
        if evanescent(m) && evanescent(-m) {
            return n;
        }
        n += 1;
    }
}

/// |n| e^{−|β₂^{(n)}|(b − b′)}.
pub fn truncation_term(medium: &ElasticMedium, qp: &QuasiPeriodicParams, n: i64, gap: f64) -> Result<f64> {
    let b2 = beta(medium.kappa_s(), alpha_n(qp, n))?;
    Ok(n.unsigned_abs() as f64 * (-b2.norm() * gap).exp())
}

/// max_{|n|>N} |n| e^{−|β₂^{(n)}|(b−b′)} scaled by the incident-field norm. The
/// scan over |n| stops once both sign branches have decreased strictly for
/// three consecutive indices.
pub fn truncation_error(
    medium: &ElasticMedium,
    qp: &QuasiPeriodicParams,
    order: usize,
    gap: f64,
    uinc_h1_norm: f64,
) -> Result<f64> {
    let mut running = 0.0f64;
    let mut prev = [f64::INFINITY; 2];
    let mut streak = [0usize; 2];
    let mut m = order as i64 + 1;
    loop {
        for (branch, n) in [m, -m].into_iter().enumerate() {
            let t = truncation_term(medium, qp, n, gap)?;
            running = running.max(t);
            streak[branch] = if t < prev[branch] { streak[branch] + 1 } else { 0 };
            prev[branch] = t;
        }
        // the first index has no predecessor, so require three genuine decreases
        if m > order as i64 + 1 && streak[0] > 3 && streak[1] > 3 {
            break;
        }
        m += 1;
    }
    Ok(running * uinc_h1_norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub order: usize,
    pub error: f64,
}

/// Smallest N ≥ N_min whose truncation bound does not exceed `tol`.
pub fn select_truncation(
    medium: &ElasticMedium,
    qp: &QuasiPeriodicParams,
    b: f64,
    b_prime: f64,
    tol: f64,
    uinc_h1_norm: f64,
) -> Result<Truncation> {
    if !(b > b_prime) {
        return Err(Error::InvalidGeometry(format!("b = {b} must exceed b' = {b_prime}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation tolerance must be positive, got {tol}")));
    }
    let gap = b - b_prime;
    let mut order = min_truncation_order(medium, qp);
    loop {
        let error = truncation_error(medium, qp, order, gap, uinc_h1_norm)?;
        if error <= tol {
            return Ok(Truncation { order, error });
        }
        order += 1;
        if order > 1_000_000 {
            return Err(Error::InvalidParameter(format!(
                "no truncation order below 10^6 reaches tolerance {tol:e}"
            )));
        }
    }
}

/// Exact ∫₀^h φ(t) e^{−iα(x₀+t)} dt for the two P1 hat functions of the edge
/// [x₀, x₀ + h]: (1 − t/h) on the left vertex and t/h on the right.
pub fn edge_moments(x0: f64, h: f64, alpha_n: f64) -> (C64, C64) {
    let shift = C64::from_polar(1.0, -alpha_n * x0);
    let theta = -alpha_n * h;
    let w = C64::new(0.0, theta);
    // i0 = ∫₀¹ e^{ws} ds and i1 = ∫₀¹ s e^{ws} ds, both scaled by h below
    let (i0, i1) = if theta.abs() < 1e-6 {
        let w2 = w * w;
        let w3 = w2 * w;
        (
            1.0 + w / 2.0 + w2 / 6.0 + w3 / 24.0,
            0.5 + w / 3.0 + w2 / 8.0 + w3 / 30.0,
        )
    } else if theta.abs() < 1.0 {
        // the closed form cancels badly here; sum the series to roundoff
        let mut term = C64::new(1.0, 0.0);
        let (mut i0, mut i1) = (ZERO, ZERO);
        for k in 0..40 {
            i0 += term / (k + 1) as f64;
            i1 += term / (k + 2) as f64;
            term *= w / (k + 1) as f64;
            if term.norm() < 1e-18 {
                break;
            }
        }
        (i0, i1)
    } else {
        let half = 0.5 * theta;
        let ew = C64::from_polar(1.0, theta);
        let em1 = C64::new(-2.0 * half.sin() * half.sin(), theta.sin());
        let i0 = em1 / w;
        let i1 = (ew - i0) / w;
        (i0, i1)
    };
    (shift * h * (i0 - i1), shift * h * i1)
}

/// Truncated DtN operator on the current mesh: mode table plus the Fourier
/// moments of the boundary basis functions of every master vertex on y = b.
#[derive(Debug, Clone)]
pub struct DtnOperator {
    modes: Vec<DtnMode>,
    gamma_vertices: Vec<usize>,
    /// moments[i][k] = ∫_Γ ψ_i e^{−iα_n x} dx for vertex i and mode k
    moments: Vec<Vec<C64>>,
    period: f64,
}

impl DtnOperator {
    /// Modes |n| ≤ `order` with moments integrated exactly over the top edges.
    pub fn new(medium: &ElasticMedium, order: usize, mesh: &Mesh, dofmap: &DofMap) -> Result<Self> {
        let qp = dofmap.params();
        let n = order as i64;
        let modes = (-n..=n)
            .map(|k| DtnMode::new(medium, qp, k))
            .collect::<Result<Vec<_>>>()?;
        Self::from_modes(modes, mesh, dofmap)
    }

    pub fn from_modes(modes: Vec<DtnMode>, mesh: &Mesh, dofmap: &DofMap) -> Result<Self> {
        let gamma_vertices = dofmap.gamma_vertices().to_vec();
        let mut row = vec![usize::MAX; mesh.vertices().len()];
        for (i, &v) in gamma_vertices.iter().enumerate() {
            row[v] = i;
        }
        let mut moments = vec![vec![ZERO; modes.len()]; gamma_vertices.len()];
        let pts = mesh.vertices();
        for e in mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Top) {
            let [mut a, mut b] = e.vertices;
            if pts[a][0] > pts[b][0] {
                std::mem::swap(&mut a, &mut b);
            }
            let x0 = pts[a][0];
            let h = pts[b][0] - x0;
            for (k, mode) in modes.iter().enumerate() {
                let (cl, cr) = edge_moments(x0, h, mode.alpha_n);
                for (v, c) in [(a, cl), (b, cr)] {
                    let (master, mult) = match dofmap.status()[v] {
                        VertexStatus::Free(_) => (v, C64::new(1.0, 0.0)),
                        VertexStatus::Slave { master, phase } => (master, phase),
                        VertexStatus::Dirichlet => {
                            return Err(Error::InvalidGeometry(format!("top vertex {v} is constrained")));
                        }
                    };
                    let i = row[master];
                    if i == usize::MAX {
                        return Err(Error::ModeMismatch(format!(
                            "top vertex {v} maps to non-boundary master {master}"
                        )));
                    }
                    moments[i][k] += mult * c;
                }
            }
        }
        Ok(Self {
            modes,
            gamma_vertices,
            moments,
            period: mesh.period(),
        })
    }

    /// Operator with externally supplied moments (for synthetic checks).
    pub fn from_parts(modes: Vec<DtnMode>, gamma_vertices: Vec<usize>, moments: Vec<Vec<C64>>, period: f64) -> Result<Self> {
        if moments.len() != gamma_vertices.len() || moments.iter().any(|m| m.len() != modes.len()) {
            return Err(Error::ModeMismatch("moment table does not match modes and vertices".into()));
        }
        Ok(Self {
            modes,
            gamma_vertices,
            moments,
            period,
        })
    }

    pub fn modes(&self) -> &[DtnMode] {
        &self.modes
    }

    pub fn gamma_vertices(&self) -> &[usize] {
        &self.gamma_vertices
    }

    pub fn moments(&self) -> &[Vec<C64>] {
        &self.moments
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Fourier coefficients u^{(n)}(b) of the P1 trace of a full per-vertex field.
    pub fn trace_coefficients(&self, field: &[CVec2]) -> Vec<CVec2> {
        let inv = 1.0 / self.period;
        (0..self.modes.len())
            .map(|k| {
                let mut acc = [ZERO; 2];
                for (i, &v) in self.gamma_vertices.iter().enumerate() {
                    let c = self.moments[i][k];
                    acc[0] += field[v][0] * c;
                    acc[1] += field[v][1] * c;
                }
                [acc[0] * inv, acc[1] * inv]
            })
            .collect()
    }

    /// 𝒯_N applied to the trace with the given coefficients, at abscissa x.
    pub fn evaluate(&self, coefficients: &[CVec2], x: f64) -> CVec2 {
        let mut out = [ZERO; 2];
        for (mode, u) in self.modes.iter().zip(coefficients) {
            let e = C64::from_polar(1.0, mode.alpha_n * x);
            let mu = mat2_vec(&mode.matrix, u);
            out[0] += mu[0] * e;
            out[1] += mu[1] * e;
        }
        out
    }
}
