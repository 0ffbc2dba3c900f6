//! The adaptive loop: truncation selection, solve, estimate, mark, bisect.

use std::time::Instant;

use crate::analytic::{h1_error, plane_wave_h1_norm, ExactFlatSolution, IncidentWave, WaveKind};
use crate::assembly::{solve, DiscreteField, LinearSystem};
use crate::dtn::{select_truncation, DtnOperator, ElasticMedium, Truncation};
use crate::error::{Error, Result};
use crate::estimator::{indicators, ErrorIndicators};
use crate::linalg::SolveReport;
use crate::mesh::{build_initial_mesh, MarkSet, Mesh, SurfaceProfile};
use crate::space::{DofMap, QuasiPeriodicParams};

/// Physical and geometric data of one grating problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub medium: ElasticMedium,
    pub incident: IncidentWave,
    pub profile: SurfaceProfile,
    /// Height of the artificial boundary Γ.
    pub b: f64,
}

impl Problem {
    pub fn new(medium: ElasticMedium, incident: IncidentWave, profile: SurfaceProfile, b: f64) -> Result<Self> {
        profile.check_height(b)?;
        if !(incident.theta.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!(
                "incident angle {} outside (-pi/2, pi/2)",
                incident.theta
            )));
        }
        Ok(Self {
            medium,
            incident,
            profile,
            b,
        })
    }

    pub fn quasi_periodicity(&self) -> QuasiPeriodicParams {
        QuasiPeriodicParams::new(self.incident.alpha(&self.medium), self.profile.period())
    }

    /// b′ = max f.
    pub fn b_prime(&self) -> f64 {
        self.profile.max_height()
    }

    pub fn incident_h1_norm(&self) -> f64 {
        plane_wave_h1_norm(self.profile.area_below(self.b), self.incident.wavenumber(&self.medium))
    }

    pub fn truncation(&self, tol: f64) -> Result<Truncation> {
        select_truncation(
            &self.medium,
            &self.quasi_periodicity(),
            self.b,
            self.b_prime(),
            tol,
            self.incident_h1_norm(),
        )
    }

    /// Closed-form solution when the surface is the line y = 0 under P incidence.
    pub fn exact_solution(&self) -> Option<ExactFlatSolution> {
        let flat_at_zero = self.profile.is_flat() && self.profile.max_height() == 0.0;
        (flat_at_zero && self.incident.kind == WaveKind::Compressional)
            .then(|| ExactFlatSolution::new(&self.medium, self.incident.theta))
    }
}

/// Everything produced by one solve on a fixed mesh.
#[derive(Debug, Clone)]
pub struct Solution {
    pub mesh: Mesh,
    pub dofmap: DofMap,
    pub dtn: DtnOperator,
    pub field: DiscreteField,
    pub report: SolveReport,
    pub indicators: ErrorIndicators,
    pub system: LinearSystem,
}

pub fn solve_on_mesh(problem: &Problem, mesh: Mesh, order: usize) -> Result<Solution> {
    let qp = problem.quasi_periodicity();
    let dofmap = DofMap::build(&mesh, qp)?;
    let dtn = DtnOperator::new(&problem.medium, order, &mesh, &dofmap)?;
    let system = LinearSystem::assemble(&mesh, &dofmap, &problem.medium, &dtn, &problem.incident)?;
    let (field, report) = solve(&system, &dofmap)?;
    let indicators = indicators(&mesh, &field.values, &dtn, &problem.medium, &qp)?;
    Ok(Solution {
        mesh,
        dofmap,
        dtn,
        field,
        report,
        indicators,
        system,
    })
}

impl Solution {
    /// H¹ error against the closed-form solution, when one exists.
    pub fn h1_error(&self, problem: &Problem) -> Option<f64> {
        let exact = problem.exact_solution()?;
        Some(h1_error(&self.mesh, &self.field.values, |p| exact.scattered(p)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    /// Stop once ε_h falls to this value.
    pub tolerance: f64,
    pub tau: f64,
    pub dtn_tol: f64,
    pub max_iterations: usize,
    pub max_dof: usize,
    /// Initial mesh size.
    pub h0: f64,
    /// Re-select N each iteration with dtn_tol = min(dtn_tol, 0.1 ε_h).
    pub retighten_dtn: bool,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            tau: 0.5,
            dtn_tol: 1e-8,
            max_iterations: 50,
            max_dof: 50_000,
            h0: 0.1,
            retighten_dtn: false,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau out of (0,1): {}", self.tau));
        }
        if !(self.dtn_tol > 0.0) {
            return bad(format!("dtn_tol must be positive, got {}", self.dtn_tol));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        if !(self.h0 > 0.0) {
            return bad(format!("h0 must be positive, got {}", self.h0));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub dof: usize,
    pub n: usize,
    pub eps_n: f64,
    pub eps_h: f64,
    pub e_h: Option<f64>,
    pub rel_residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    MaxDof,
    /// ε_h failed to drop by 1% over three iterations.
    Stagnated(String),
}

impl Termination {
    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::Stagnated(_))
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::Converged => write!(f, "converged"),
            Termination::MaxIterations => write!(f, "max_iterations"),
            Termination::MaxDof => write!(f, "max_dof"),
            Termination::Stagnated(m) => write!(f, "stagnated: {m}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub records: Vec<IterationRecord>,
    pub solution: Solution,
    pub termination: Termination,
}

/// {K : η_K > τ max η}.
pub fn mark(eta: &[f64], tau: f64) -> Result<MarkSet> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau out of (0,1): {tau}")));
    }
    let max = eta.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::Stagnation("all indicators are zero".into()));
    }
    let threshold = tau * max;
    Ok(MarkSet(
        eta.iter()
            .enumerate()
            .filter(|(_, &e)| e > threshold)
            .map(|(k, _)| k)
            .collect(),
    ))
}

const STAGNATION_WINDOW: usize = 3;
const STAGNATION_FACTOR: f64 = 0.99;

pub fn adaptive_solve(problem: &Problem, config: &AdaptConfig) -> Result<AdaptOutcome> {
    adaptive_solve_with(problem, config, |_, _| {})
}

/// As [`adaptive_solve`], calling `observe` after every solve.
pub fn adaptive_solve_with<F>(problem: &Problem, config: &AdaptConfig, mut observe: F) -> Result<AdaptOutcome>
where
    F: FnMut(&IterationRecord, &Solution),
{
    config.validate()?;
    let mut trunc = problem.truncation(config.dtn_tol)?;
    log::info!("truncation order N = {} (eps_N = {:.3e})", trunc.order, trunc.error);
    let mut mesh = build_initial_mesh(&problem.profile, problem.b, config.h0)?;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut iteration = 0;
    loop {
        let start = Instant::now();
        let sol = solve_on_mesh(problem, mesh, trunc.order)?;
        let e_h = sol.h1_error(problem);
        let record = IterationRecord {
            iteration,
            dof: sol.dofmap.ndof(),
            n: trunc.order,
            eps_n: trunc.error,
            eps_h: sol.indicators.eps_h,
            e_h,
            rel_residual: sol.report.relative_residual,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "iter {} dof {} eps_h {:.4e} e_h {}",
            record.iteration,
            record.dof,
            record.eps_h,
            e_h.map_or("-".to_string(), |e| format!("{e:.4e}"))
        );
        observe(&record, &sol);
        records.push(record);

        let eps_h = sol.indicators.eps_h;
        let done = if eps_h <= config.tolerance {
            Some(Termination::Converged)
        } else if records.len() >= config.max_iterations {
            Some(Termination::MaxIterations)
        } else if sol.dofmap.ndof() >= config.max_dof {
            Some(Termination::MaxDof)
        } else if records.len() > STAGNATION_WINDOW
            && eps_h > STAGNATION_FACTOR * records[records.len() - 1 - STAGNATION_WINDOW].eps_h
        {
            Some(Termination::Stagnated(format!(
                "eps_h {eps_h:.4e} after {STAGNATION_WINDOW} iterations from {:.4e}",
                records[records.len() - 1 - STAGNATION_WINDOW].eps_h
            )))
        } else {
            None
        };
        if let Some(termination) = done {
            return Ok(AdaptOutcome {
                records,
                solution: sol,
                termination,
            });
        }

        let marks = match mark(&sol.indicators.eta, config.tau) {
            Ok(m) => m,
            Err(Error::Stagnation(m)) => {
                return Ok(AdaptOutcome {
                    records,
                    solution: sol,
                    termination: Termination::Stagnated(m),
                })
            }
            Err(e) => return Err(e),
        };
        mesh = sol.mesh.bisect(&marks);
        if config.retighten_dtn {
            trunc = problem.truncation(config.dtn_tol.min(0.1 * eps_h))?;
        }
        iteration += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub level: usize,
    /// Longest edge of the mesh.
    pub h: f64,
    pub dof: usize,
    pub eps_h: f64,
    pub e_h: Option<f64>,
    /// Observed order log(err_prev/err)/log(h_prev/h), using e_h when known and ε_h otherwise.
    pub rate: Option<f64>,
    pub rel_residual: f64,
}

/// Solves on uniform structured meshes with the given target edge lengths.
pub fn uniform_study(problem: &Problem, sizes: &[f64], dtn_tol: f64) -> Result<Vec<StudyRecord>> {
    let trunc = problem.truncation(dtn_tol)?;
    let mut out: Vec<StudyRecord> = Vec::new();
    for (level, &h0) in sizes.iter().enumerate() {
        let mesh = build_initial_mesh(&problem.profile, problem.b, h0)?;
        let h = mesh.max_edge_length();
        let sol = solve_on_mesh(problem, mesh, trunc.order)?;
        let e_h = sol.h1_error(problem);
        let err = e_h.unwrap_or(sol.indicators.eps_h);
        let rate = out
            .last()
            .map(|p| (p.e_h.unwrap_or(p.eps_h) / err).ln() / (p.h / h).ln());
        log::info!("level {level} h {h:.4} dof {} error {err:.4e}", sol.dofmap.ndof());
        out.push(StudyRecord {
            level,
            h,
            dof: sol.dofmap.ndof(),
            eps_h: sol.indicators.eps_h,
            e_h,
            rate,
            rel_residual: sol.report.relative_residual,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn marking_rule() {
        assert_eq!(mark(&[1.0, 0.6, 0.4], 0.5).unwrap().0, vec![0, 1]);
        assert_eq!(mark(&[0.3; 4], 0.5).unwrap().0, vec![0, 1, 2, 3]);
        assert_eq!(mark(&[1.0, 0.0, 0.0], 0.99).unwrap().0, vec![0]);
        assert!(matches!(mark(&[0.0, 0.0], 0.5), Err(Error::Stagnation(_))));
        assert!(mark(&[1.0], 1.5).is_err());
        // ties at the threshold are excluded
        assert_eq!(mark(&[1.0, 0.5], 0.5).unwrap().0, vec![0]);
    }

    fn example1() -> Problem {
        let medium = ElasticMedium::new(2.0, 1.0, 2.0).unwrap();
        let profile = SurfaceProfile::flat(0.5, 0.0).unwrap();
        Problem::new(medium, IncidentWave::compressional(PI / 3.0), profile, 0.25).unwrap()
    }

    #[test]
    fn huge_tolerance_stops_after_one_solve() {
        let cfg = AdaptConfig {
            tolerance: 1e6,
            ..AdaptConfig::default()
        };
        let out = adaptive_solve(&example1(), &cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.termination, Termination::Converged);
    }

    #[test]
    fn short_run_is_monotone_and_deterministic() {
        let cfg = AdaptConfig {
            tolerance: 1e-12,
            max_iterations: 6,
            ..AdaptConfig::default()
        };
        let p = example1();
        let a = adaptive_solve(&p, &cfg).unwrap();
        let b = adaptive_solve(&p, &cfg).unwrap();
        assert_eq!(a.records.len(), 6);
        assert_eq!(a.termination, Termination::MaxIterations);
        let n = p.truncation(cfg.dtn_tol).unwrap().order;
        for w in a.records.windows(2) {
            assert!(w[1].dof > w[0].dof);
            assert!(w[1].eps_h < w[0].eps_h);
        }
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.n, n);
            assert!(x.eps_n <= cfg.dtn_tol);
            assert_eq!((x.dof, x.eps_h, x.e_h, x.rel_residual), (y.dof, y.eps_h, y.e_h, y.rel_residual));
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let p = example1();
        for cfg in [
            AdaptConfig { tau: 1.5, ..AdaptConfig::default() },
            AdaptConfig { tolerance: 0.0, ..AdaptConfig::default() },
            AdaptConfig { h0: -1.0, ..AdaptConfig::default() },
        ] {
            assert!(adaptive_solve(&p, &cfg).is_err());
        }
    }
}
