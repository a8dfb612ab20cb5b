//! Categorical format policy and its clipped-surrogate update.
//!
//! Each task class owns a softmax distribution over the formats available to
//! it. An update maximizes the summed clipped surrogate
//!
//! ```text
//! sum_i min(rho_i * A_i, clip(rho_i, 1 - c, 1 + c) * A_i),   rho_i = pi(f_i) / pi_old(f_i)
//! ```
//!
//! by gradient ascent on the logits, with `pi_old` frozen at the start of the
//! batch.

use serde::{Deserialize, Serialize};

use crate::format::ReasoningFormat;
use crate::reward::{RewardTrace, RolloutGroup};

use super::scenario::{ScenarioError, ScenarioSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPolicy {
    pub class: String,
    pub formats: Vec<ReasoningFormat>,
    pub logits: Vec<f64>,
}

impl ClassPolicy {
    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.logits)
    }

    pub fn index_of(&self, format: ReasoningFormat) -> Option<usize> {
        self.formats.iter().position(|&f| f == format)
    }

    pub fn probability_of(&self, format: ReasoningFormat) -> f64 {
        self.index_of(format).map_or(0.0, |i| self.probabilities()[i])
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probabilities())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub classes: Vec<ClassPolicy>,
    pub step: u64,
}

impl PolicyState {
    /// Zero logits, i.e. a uniform choice among each class's formats.
    pub fn uniform(spec: &ScenarioSpec) -> Self {
        PolicyState {
            classes: spec
                .task_classes
                .iter()
                .map(|c| {
                    let formats = c.format_list();
                    let logits = vec![0.0; formats.len()];
                    ClassPolicy { class: c.name.clone(), formats, logits }
                })
                .collect(),
            step: 0,
        }
    }
}

/// Numerically stable softmax. If any logit is `+inf` the mass is split
/// evenly among the infinite entries.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        let n = logits.iter().filter(|&&l| l == f64::INFINITY).count() as f64;
        return logits.iter().map(|&l| if l == f64::INFINITY { 1.0 / n } else { 0.0 }).collect();
    }
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyUpdateParams {
    pub learning_rate: f64,
    pub clip_ratio: f64,
    pub epochs_per_batch: usize,
}

impl Default for PolicyUpdateParams {
    fn default() -> Self {
        PolicyUpdateParams { learning_rate: 0.05, clip_ratio: 0.2, epochs_per_batch: 1 }
    }
}

impl PolicyUpdateParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ScenarioError::new("learning_rate", format!("must be positive, got {}", self.learning_rate)));
        }
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return Err(ScenarioError::new("clip_ratio", format!("must lie in (0, 1), got {}", self.clip_ratio)));
        }
        if self.epochs_per_batch == 0 {
            return Err(ScenarioError::new("epochs_per_batch", "must be positive"));
        }
        Ok(())
    }
}

/// One rollout's contribution to a class's surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateSample {
    pub format_idx: usize,
    pub advantage: f64,
}

fn clipped_term(ratio: f64, advantage: f64, clip: f64) -> (f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// Summed clipped surrogate for one class.
pub fn surrogate_objective(logits: &[f64], old_probs: &[f64], samples: &[SurrogateSample], clip: f64) -> f64 {
    let probs = softmax(logits);
    samples.iter().map(|s| clipped_term(probs[s.format_idx] / old_probs[s.format_idx], s.advantage, clip).0).sum()
}

/// Analytic gradient of [`surrogate_objective`] with respect to `logits`.
///
/// With `rho = pi_f / pi_old_f`, `d rho / d logit_j = rho * (1[j = f] - pi_j)`.
/// Rollouts whose clipped branch is active contribute nothing.
pub fn surrogate_gradient(logits: &[f64], old_probs: &[f64], samples: &[SurrogateSample], clip: f64) -> Vec<f64> {
    let probs = softmax(logits);
    let mut grad = vec![0.0; logits.len()];
    for s in samples {
        let ratio = probs[s.format_idx] / old_probs[s.format_idx];
        let (_, active) = clipped_term(ratio, s.advantage, clip);
        if !active || s.advantage == 0.0 {
            continue;
        }
        let scale = s.advantage * ratio;
        for (j, g) in grad.iter_mut().enumerate() {
            let indicator = if j == s.format_idx { 1.0 } else { 0.0 };
            *g += scale * (indicator - probs[j]);
        }
    }
    grad
}

/// A sampled group together with its shaped rewards.
#[derive(Debug, Clone)]
pub struct ShapedGroup {
    pub class: usize,
    pub group: RolloutGroup,
    pub traces: Vec<RewardTrace>,
}

/// One clipped-surrogate ascent update over a batch of shaped groups.
pub fn grpo_step(policy: &PolicyState, batch: &[ShapedGroup], up: &PolicyUpdateParams) -> PolicyState {
    let mut next = policy.clone();
    let mut per_class: Vec<Vec<SurrogateSample>> = vec![Vec::new(); policy.classes.len()];
    for sg in batch {
        let cp = &policy.classes[sg.class];
        for (rollout, trace) in sg.group.rollouts().iter().zip(&sg.traces) {
            // Malformed rollouts are not a policy choice in the simulator.
            if let Some(format_idx) = cp.index_of(rollout.format) {
                per_class[sg.class].push(SurrogateSample { format_idx, advantage: trace.advantage });
            }
        }
    }

    for (cp, samples) in next.classes.iter_mut().zip(&per_class) {
        if samples.is_empty() {
            continue;
        }
        let old_probs = cp.probabilities();
        for _ in 0..up.epochs_per_batch {
            let grad = surrogate_gradient(&cp.logits, &old_probs, samples, up.clip_ratio);
            for (l, g) in cp.logits.iter_mut().zip(grad) {
                *l += up.learning_rate * g;
            }
        }
    }
    next.step += 1;
    next
}
