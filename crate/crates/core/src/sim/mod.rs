//! Desk-scale simulator of format selection under group-relative training.
//!
//! The simulated policy chooses only a reasoning format per task class;
//! accuracy and response length are drawn from the scenario's per-format
//! profiles. This isolates the effect of reward shaping on format choice.

pub mod policy;
pub mod rng;
pub mod scenario;
pub mod train;

pub use policy::{grpo_step, ClassPolicy, PolicyState, PolicyUpdateParams, ShapedGroup};
pub use scenario::{sample_group, FormatProfile, ScenarioError, ScenarioSpec, TaskClass};
pub use train::{
    lambda_sweep, run_training, RunConfig, RunLog, RunSummary, StepRecord, SweepReport, TrainingConfig, TrainingMode,
};
