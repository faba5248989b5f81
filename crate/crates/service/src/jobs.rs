//! Run execution shared by the command line and the service.

use std::collections::BTreeMap;
use std::path::Path;

use percept_core::pipeline::{compare_runs, run_prediction, ArtifactReport};
use percept_core::stereo::{run_stereo, StereoResult};
use percept_core::{RunConfig, RunMode, RunResult};
use serde_json::Value;

use crate::error::{Result, ServiceError};
use crate::export::{self, read_json, write_json, ComparisonSummary};

/// Effective configuration (defaults filled in) stored next to the outputs.
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.json";

/// Name of the single panel of a stereo run.
pub const STEREO_PANEL: &str = "stereo";

pub enum Outcome {
    Prediction(Box<RunResult>),
    Stereo(Box<StereoResult>),
}

impl Outcome {
    pub fn metrics(&self) -> BTreeMap<String, f64> {
        match self {
            Outcome::Prediction(r) => r.metrics.clone(),
            Outcome::Stereo(s) => {
                let mut m = BTreeMap::new();
                m.insert("velocity_deg_s".into(), s.velocity_deg_s);
                m.insert("estimate_deg".into(), s.series.estimate_deg);
                m.insert("error_deg".into(), s.series.error_deg);
                m.insert("error_arcmin".into(), s.series.error_deg * 60.0);
                m.insert("nominal_deg".into(), s.series.nominal_deg);
                m.insert("quantum_deg".into(), s.series.quantum_deg);
                m.insert("closed_form_deg".into(), s.closed_form_deg);
                m.insert("pair_samples".into(), s.series.pair_samples.len() as f64);
                m.insert("excluded_left_events".into(), s.series.excluded_left_events as f64);
                m
            }
        }
    }

    pub fn report(&self) -> Option<&ArtifactReport> {
        match self {
            Outcome::Prediction(r) => Some(&r.report),
            Outcome::Stereo(_) => None,
        }
    }

    pub fn panel_names(&self) -> Vec<String> {
        match self {
            Outcome::Prediction(r) => r.panels.iter().map(|p| p.meta.name.clone()).collect(),
            Outcome::Stereo(_) => vec![STEREO_PANEL.into()],
        }
    }
}

/// Validates and runs the prediction or stereo path, as selected by `mode`.
pub fn execute(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    Ok(match config.mode {
        RunMode::NonStereo => Outcome::Prediction(Box::new(run_prediction::<f64>(config)?)),
        RunMode::Stereo => Outcome::Stereo(Box::new(run_stereo(config)?)),
    })
}

pub fn write_outcome(dir: &Path, config: &RunConfig, outcome: &Outcome) -> Result<()> {
    write_json(&dir.join(EFFECTIVE_CONFIG_FILE), config)?;
    match outcome {
        Outcome::Prediction(r) => export::write_prediction(dir, r.as_ref()),
        Outcome::Stereo(s) => {
            export::write_stereo(dir, s)?;
            write_json(&dir.join(export::METRICS_FILE), &outcome.metrics())
        }
    }
}

/// [`execute`] followed by [`write_outcome`].
pub fn run_to_dir(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let outcome = execute(config)?;
    write_outcome(dir, config, &outcome)?;
    Ok(outcome)
}

/// Rebuilds a prediction run from a directory written by [`write_outcome`].
pub fn load_prediction(dir: &Path, run_id: &str) -> Result<RunResult> {
    let config: RunConfig = read_json(&dir.join(EFFECTIVE_CONFIG_FILE))?;
    if config.mode != RunMode::NonStereo {
        return Err(percept_core::Error::Incompatible(format!("run {run_id} is a stereo run and has no panels to compare")).into());
    }
    export::read_prediction(dir, run_id, config)
}

/// Compares runs and writes the bundle to `dir`.
pub fn compare_to_dir(master: Option<&RunResult>, others: &[&RunResult], dir: &Path, id: &str) -> Result<ComparisonSummary> {
    if others.is_empty() {
        return Err(ServiceError::Schema("at least one run is needed for a comparison".into()));
    }
    let cmp = compare_runs(master, others)?;
    export::write_comparison(dir, id, &cmp)
}

/// Short machine-readable summary of an outcome, as printed by the CLI.
pub fn summary(run_id: &str, outcome: &Outcome) -> Value {
    let mut v = serde_json::json!({
        "run_id": run_id,
        "metrics": outcome.metrics(),
        "panels": outcome.panel_names(),
    });
    if let Some(r) = outcome.report() {
        v["report"] = serde_json::to_value(r).unwrap_or(Value::Null);
        v["all_clear"] = Value::Bool(r.all_clear());
    }
    v
}
