//! Batch front end for the `heatpinn-core` solvers: configuration, run
//! orchestration, snapshot and CSV/VTK output, and PINN-vs-FEM comparison.

use std::path::{Path, PathBuf};

pub mod compare;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod profile;
pub mod snapshot;
pub mod sweep;

pub use compare::{compare, ComparisonReport, ProbeGrid, TimeMetrics};
pub use config::SimulationConfig;
pub use profile::{extract_line_profile, FieldSource, LineProfile};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("cannot parse configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed snapshot ({reason})")]
    Snapshot { path: PathBuf, reason: String },
    #[error(transparent)]
    Train(#[from] heatpinn_core::training::TrainError),
    #[error(transparent)]
    Query(#[from] heatpinn_core::training::QueryError),
    #[error(transparent)]
    Fem(#[from] heatpinn_core::fem::FemError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
