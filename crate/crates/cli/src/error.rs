use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

use staysim_core::activity::ActivityError;
use staysim_core::assign::AssignError;
use staysim_core::detect::DetectError;
use staysim_core::evaluate::EvalError;
use staysim_core::inject::InjectError;
use staysim_core::sim::SimError;
use staysim_core::world::WorldError;

use crate::io::IoError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` is missing inputs: {}", display_paths(.missing))]
    MissingInputs { stage: String, missing: Vec<PathBuf> },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Activity(#[from] ActivityError),
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error(transparent)]
    Inject(#[from] InjectError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingInputs { .. } => "missing_inputs",
            CliError::Io(IoError::SchemaMismatch { .. } | IoError::ColumnType { .. }) => "schema",
            CliError::Io(_) | CliError::File { .. } | CliError::Json(_) => "io",
            CliError::Sim(_) | CliError::World(_) | CliError::Activity(_) | CliError::Assign(_) | CliError::Inject(_) => "simulation",
            CliError::Detect(_) => "detect",
            CliError::Eval(_) => "evaluate",
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::MissingInputs { stage, missing } => {
                v["stage"] = json!(stage);
                v["missing"] = json!(missing);
            }
            CliError::Io(IoError::SchemaMismatch { path, missing, extra }) => {
                v["path"] = json!(path);
                v["missing_columns"] = json!(missing);
                v["extra_columns"] = json!(extra);
            }
            _ => {}
        }
        v
    }
}
