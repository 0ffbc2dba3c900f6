//! Run orchestration behind the command-line front end.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use crate::adapt::{adaptive_solve_with, solve_on_mesh, uniform_study, IterationRecord, Solution, Termination};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::mesh::build_initial_mesh;
use crate::output::{
    convergence_csv, convergence_gnuplot, convergence_row, study_csv, study_gnuplot, write_matrix_market,
    write_vtk, ArtifactSet, CONVERGENCE_HEADER,
};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    /// Overrides the configured output directory.
    pub out: Option<PathBuf>,
    /// Recorded in the manifest; every algorithm in the run is deterministic.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub termination: Option<Termination>,
}

pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunSummary> {
    let out_dir = options
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    let mut artifacts = ArtifactSet::create(&out_dir)?;
    let p = &config.problem;
    let mode_name = match options.mode {
        Mode::Solve => "solve",
        Mode::Adapt => "adapt",
        Mode::Study => "study",
    };
    let mut header = vec![
        ("mode", mode_name.to_string()),
        ("seed", options.seed.map_or("none".into(), |s| s.to_string())),
        ("kappa_p", format!("{:?}", p.medium.kappa_p())),
        ("kappa_s", format!("{:?}", p.medium.kappa_s())),
    ];
    log::info!(
        "kappa_p = {}, kappa_s = {}, alpha = {}",
        p.medium.kappa_p(),
        p.medium.kappa_s(),
        p.incident.alpha(&p.medium)
    );

    let result = match options.mode {
        Mode::Solve => run_solve(config, &mut artifacts).map(|_| None),
        Mode::Adapt => run_adapt(config, &mut artifacts).map(Some),
        Mode::Study => run_study(config, &mut artifacts).map(|_| None),
    };
    match result {
        Ok(termination) => {
            let failed = termination.as_ref().is_some_and(Termination::is_failure);
            if let Some(t) = &termination {
                header.push(("termination", t.to_string()));
            }
            artifacts.write_manifest(&header, !failed)?;
            if let Some(Termination::Stagnated(m)) = &termination {
                return Err(Error::Stagnation(m.clone()));
            }
            Ok(RunSummary {
                out_dir,
                files: artifacts.files().to_vec(),
                termination,
            })
        }
        Err(e) => {
            header.push(("error", e.to_string()));
            // best effort: the original error matters more than a manifest failure
            let _ = artifacts.write_manifest(&header, false);
            Err(e)
        }
    }
}

fn write_solution(config: &RunConfig, artifacts: &mut ArtifactSet, sol: &Solution, name: &str) -> Result<()> {
    if config.output.vtk {
        artifacts.write_with(name, |w| {
            write_vtk(w, &sol.mesh, Some(&sol.field.values), Some(&sol.indicators.eta))
        })?;
    }
    if config.output.matrix {
        artifacts.write_with("system.mtx", |w| write_matrix_market(w, &sol.system.matrix))?;
    }
    Ok(())
}

fn run_solve(config: &RunConfig, artifacts: &mut ArtifactSet) -> Result<()> {
    let p = &config.problem;
    let start = Instant::now();
    let trunc = p.truncation(config.adapt.dtn_tol)?;
    let mesh = build_initial_mesh(&p.profile, p.b, config.adapt.h0)?;
    let sol = solve_on_mesh(p, mesh, trunc.order)?;
    let record = IterationRecord {
        iteration: 0,
        dof: sol.dofmap.ndof(),
        n: trunc.order,
        eps_n: trunc.error,
        eps_h: sol.indicators.eps_h,
        e_h: sol.h1_error(p),
        rel_residual: sol.report.relative_residual,
        seconds: start.elapsed().as_secs_f64(),
    };
    artifacts.write_text("convergence.csv", &convergence_csv(&[record]))?;
    write_solution(config, artifacts, &sol, "solution.vtk")
}

fn run_adapt(config: &RunConfig, artifacts: &mut ArtifactSet) -> Result<Termination> {
    let p = &config.problem;
    let mut csv = artifacts.open("convergence.csv")?;
    writeln!(csv, "{CONVERGENCE_HEADER}")?;
    let mut io_error: Option<std::io::Error> = None;
    let outcome = adaptive_solve_with(p, &config.adapt, |r, _| {
        if io_error.is_none() {
            if let Err(e) = writeln!(csv, "{}", convergence_row(r)).and_then(|_| csv.flush()) {
                io_error = Some(e);
            }
        }
    });
    csv.flush()?;
    drop(csv);
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let outcome = outcome?;
    write_solution(config, artifacts, &outcome.solution, "final.vtk")?;
    artifacts.write_text(
        "convergence.gp",
        &convergence_gnuplot("convergence.csv", "convergence.png", p.exact_solution().is_some()),
    )?;
    Ok(outcome.termination)
}

fn run_study(config: &RunConfig, artifacts: &mut ArtifactSet) -> Result<()> {
    let records = uniform_study(&config.problem, &config.study_sizes, config.adapt.dtn_tol)?;
    artifacts.write_text("study.csv", &study_csv(&records))?;
    artifacts.write_text("study.gp", &study_gnuplot("study.csv", "study.png"))?;
    Ok(())
}

/// Rayon pool size; 0 keeps the default of one thread per core.
pub fn configure_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}
