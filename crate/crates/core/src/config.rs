//! Run configuration: TOML with dotted sections, validated at load.
//!
//! ```toml
//! [medium]
//! lambda = 2.0
//! mu = 1.0
//! omega = 2.0
//!
//! [incidence]
//! kind = "compressional"   # or "shear"
//! theta_deg = 60.0         # or theta (radians)
//!
//! [geometry]
//! period = 0.5
//! b = 0.25
//! profile = [[0.0, 0.0], [0.5, 0.0]]   # optional, flat at y = 0 when absent
//!
//! [adapt]        # every key optional
//! tolerance = 1e-3
//! tau = 0.5
//! dtn_tol = 1e-8
//! max_iterations = 50
//! max_dof = 50000
//! h0 = 0.1
//! retighten_dtn = false
//!
//! [study]
//! sizes = [0.1, 0.05, 0.025, 0.0125]
//!
//! [output]
//! directory = "out"
//! vtk = true
//! matrix = false
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::adapt::{AdaptConfig, Problem};
use crate::analytic::{IncidentWave, WaveKind};
use crate::dtn::ElasticMedium;
use crate::error::{Error, Result};
use crate::mesh::SurfaceProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Solve,
    Adapt,
    Study,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "solve" => Ok(Mode::Solve),
            "adapt" => Ok(Mode::Adapt),
            "study" => Ok(Mode::Study),
            other => Err(format!("unknown mode `{other}` (expected solve, adapt or study)")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub lambda: f64,
    pub mu: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidenceSection {
    pub kind: WaveKind,
    pub theta: Option<f64>,
    pub theta_deg: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub period: f64,
    pub b: f64,
    pub profile: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptSection {
    pub tolerance: Option<f64>,
    pub tau: Option<f64>,
    pub dtn_tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub max_dof: Option<usize>,
    pub h0: Option<f64>,
    pub retighten_dtn: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub sizes: Vec<f64>,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            sizes: vec![0.1, 0.05, 0.025, 0.0125],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "yes")]
    pub vtk: bool,
    #[serde(default)]
    pub matrix: bool,
}

fn default_directory() -> String {
    "out".into()
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            vtk: true,
            matrix: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    medium: MediumSection,
    incidence: IncidenceSection,
    geometry: GeometrySection,
    #[serde(default)]
    adapt: AdaptSection,
    #[serde(default)]
    study: StudySection,
    #[serde(default)]
    output: OutputSection,
}

/// A validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub problem: Problem,
    pub adapt: AdaptConfig,
    pub study_sizes: Vec<f64>,
    pub output: OutputSection,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}

/// Parses and validates configuration text; `origin` names the source in errors.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig> {
    let fail = |message: String| Error::Config {
        path: origin.to_string(),
        message,
    };
    let raw: RawConfig = toml::from_str(text).map_err(|e| fail(e.to_string().trim_end().to_string()))?;

    let medium = ElasticMedium::new(raw.medium.lambda, raw.medium.mu, raw.medium.omega)
        .map_err(|e| fail(format!("medium: {e}")))?;

    let theta = match (raw.incidence.theta, raw.incidence.theta_deg) {
        (Some(t), None) => t,
        (None, Some(d)) => d.to_radians(),
        _ => return Err(fail("incidence: give exactly one of `theta` or `theta_deg`".into())),
    };
    if !(theta.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(fail(format!("incidence.theta = {theta} outside (-pi/2, pi/2)")));
    }
    let incident = IncidentWave {
        kind: raw.incidence.kind,
        theta,
    };

    let g = &raw.geometry;
    if !(g.period > 0.0) {
        return Err(fail(format!("geometry.period must be positive, got {}", g.period)));
    }
    let profile = match &g.profile {
        Some(points) => SurfaceProfile::new(points.clone()),
        None => SurfaceProfile::flat(g.period, 0.0),
    }
    .map_err(|e| fail(format!("geometry.profile: {e}")))?;
    if (profile.period() - g.period).abs() > 1e-12 * g.period {
        return Err(fail(format!(
            "geometry.profile ends at x = {} but geometry.period = {}",
            profile.period(),
            g.period
        )));
    }
    if !(g.b > profile.max_height()) {
        return Err(fail(format!(
            "geometry.b = {} must exceed max f = {}",
            g.b,
            profile.max_height()
        )));
    }
    let problem = Problem::new(medium, incident, profile, g.b).map_err(|e| fail(e.to_string()))?;

    let d = AdaptConfig::default();
    let a = &raw.adapt;
    let adapt = AdaptConfig {
        tolerance: a.tolerance.unwrap_or(d.tolerance),
        tau: a.tau.unwrap_or(d.tau),
        dtn_tol: a.dtn_tol.unwrap_or(d.dtn_tol),
        max_iterations: a.max_iterations.unwrap_or(d.max_iterations),
        max_dof: a.max_dof.unwrap_or(d.max_dof),
        h0: a.h0.unwrap_or(d.h0),
        retighten_dtn: a.retighten_dtn.unwrap_or(d.retighten_dtn),
    };
    adapt.validate().map_err(|e| match e {
        Error::InvalidParameter(m) => fail(format!("adapt: {m}")),
        other => fail(other.to_string()),
    })?;

    if raw.study.sizes.is_empty() || raw.study.sizes.iter().any(|&h| !(h > 0.0)) {
        return Err(fail("study.sizes must be a nonempty list of positive lengths".into()));
    }

    Ok(RunConfig {
        mode: raw.mode,
        problem,
        adapt,
        study_sizes: raw.study.sizes,
        output: raw.output,
    })
}
