use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid surface profile: {0}")]
    InvalidProfile(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resonance: |alpha_n| = {alpha_n} coincides with wavenumber {kappa}")]
    Resonance { kappa: f64, alpha_n: f64 },

    #[error("degenerate triangle {index}: area {area:e}")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("mode/moment mismatch: {0}")]
    ModeMismatch(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("adaptive loop stagnated: {0}")]
    Stagnation(String),

    #[error("unpaired periodic edge ({0}, {1})")]
    UnpairedEdge(usize, usize),

    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
