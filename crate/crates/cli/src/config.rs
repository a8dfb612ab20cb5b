//! Flat run configuration: scenario plus training knobs in one file.

use std::path::Path;

use arm_alp::reward::{DecayMode, PenaltyParams, Schedule};
use arm_alp::sim::{PolicyUpdateParams, ScenarioSpec, TaskClass, TrainingConfig, TrainingMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

fn default_group_size() -> usize {
    8
}
fn default_groups_per_step() -> usize {
    16
}
fn default_mode() -> TrainingMode {
    TrainingMode::Alp
}
fn default_lambda() -> f64 {
    PenaltyParams::DEFAULT_LAMBDA
}
fn default_epsilon() -> f64 {
    PenaltyParams::DEFAULT_EPSILON
}
fn default_baseline() -> f64 {
    Schedule::DEFAULT_BASELINE
}
fn default_true() -> bool {
    true
}
fn default_learning_rate() -> f64 {
    PolicyUpdateParams::default().learning_rate
}
fn default_clip_ratio() -> f64 {
    PolicyUpdateParams::default().clip_ratio
}
fn default_epochs() -> usize {
    PolicyUpdateParams::default().epochs_per_batch
}

/// Everything needed to reproduce a run. The resolved form (defaults and
/// flag overrides applied) is embedded in every run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub task_classes: Vec<TaskClass>,
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    pub steps: u64,
    pub seed: u64,
    #[serde(default = "default_groups_per_step")]
    pub groups_per_step: usize,
    #[serde(default = "default_mode")]
    pub mode: TrainingMode,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub decay: DecayMode,
    #[serde(default = "default_baseline")]
    pub baseline: f64,
    #[serde(default = "default_true")]
    pub length_penalty: bool,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_clip_ratio")]
    pub clip_ratio: f64,
    #[serde(default = "default_epochs")]
    pub epochs_per_batch: usize,
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub steps: Option<u64>,
    pub seed: Option<u64>,
    pub mode: Option<TrainingMode>,
    pub lambda: Option<f64>,
    pub clip_ratio: Option<f64>,
    pub learning_rate: Option<f64>,
}

impl SimConfig {
    pub fn from_scenario(spec: &ScenarioSpec, cfg: &TrainingConfig) -> Self {
        SimConfig {
            task_classes: spec.task_classes.clone(),
            group_size: spec.group_size,
            steps: spec.steps,
            seed: spec.seed,
            groups_per_step: spec.groups_per_step,
            mode: cfg.mode,
            lambda: cfg.penalty.lambda,
            epsilon: cfg.penalty.epsilon,
            decay: cfg.decay,
            baseline: cfg.baseline,
            length_penalty: cfg.length_penalty,
            learning_rate: cfg.update.learning_rate,
            clip_ratio: cfg.update.clip_ratio,
            epochs_per_batch: cfg.update.epochs_per_batch,
        }
    }

    /// Parse TOML, or JSON when `name` ends in `.json`.
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let parsed = if name.ends_with(".json") {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::usage(format!("{name}: {}", e.trim_end())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.steps {
            self.steps = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.mode {
            self.mode = v;
        }
        if let Some(v) = o.lambda {
            self.lambda = v;
        }
        if let Some(v) = o.clip_ratio {
            self.clip_ratio = v;
        }
        if let Some(v) = o.learning_rate {
            self.learning_rate = v;
        }
    }

    /// Validate and split into library types. Errors name the offending key.
    pub fn resolve(&self) -> Result<(ScenarioSpec, TrainingConfig)> {
        let invalid =
            |field: &str, msg: &dyn std::fmt::Display| CliError::usage(format!("invalid config: {field}: {msg}"));
        let spec = ScenarioSpec {
            task_classes: self.task_classes.clone(),
            group_size: self.group_size,
            steps: self.steps,
            seed: self.seed,
            groups_per_step: self.groups_per_step,
        };
        spec.validate().map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", &format!("must be a non-negative number, got {}", self.lambda)));
        }
        let penalty = PenaltyParams::new(self.lambda, self.epsilon).map_err(|e| invalid("epsilon", &e))?;
        if !self.baseline.is_finite() {
            return Err(invalid("baseline", &"must be finite"));
        }
        let update = PolicyUpdateParams {
            learning_rate: self.learning_rate,
            clip_ratio: self.clip_ratio,
            epochs_per_batch: self.epochs_per_batch,
        };
        update.validate().map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
        let training = TrainingConfig {
            mode: self.mode,
            penalty,
            decay: self.decay,
            baseline: self.baseline,
            length_penalty: self.length_penalty,
            update,
        };
        Ok((spec, training))
    }
}
