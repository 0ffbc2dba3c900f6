pub mod adapt;
pub mod analytic;
pub mod assembly;
pub mod config;
pub mod dtn;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod p1;
pub mod run;
pub mod space;

pub use error::{Error, Result};
