//! Experiment configuration, presets, run and study drivers, and the
//! algebraic verification suite behind the command-line tool.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;
pub mod verify;

use std::path::Path;

use serde_json::Value;

pub use config::{ExperimentConfig, Scaled, SolverKind};
pub use presets::{preset, PRESETS};
pub use run::{run_convergence_study, run_experiment, RunReport, SolverOutcome, StudyReport};

use crate::error::{Error, Result};

/// Layers a preset, an optional JSON file, `key=value` overrides and an
/// epsilon override, in that order. Returns the merged document and the
/// validated config.
pub fn parse_config(
    preset_name: Option<&str>,
    file: Option<&Path>,
    overrides: &[String],
    epsilon: Option<f64>,
) -> Result<(Value, ExperimentConfig)> {
    let mut doc = match preset_name {
        Some(name) => preset(name)?,
        None => Value::Object(Default::default()),
    };
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config::merge(&mut doc, v);
    }
    for o in overrides {
        config::apply_override(&mut doc, o)?;
    }
    if let Some(eps) = epsilon {
        doc["epsilon"] = serde_json::json!(eps);
    }
    let cfg = ExperimentConfig::from_value(doc.clone())?;
    Ok((doc, cfg))
}
