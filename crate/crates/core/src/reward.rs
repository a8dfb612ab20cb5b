//! Group-relative reward shaping.
//!
//! For a group of `G` rollouts sampled for one question, each rollout's
//! binary reward `r` is reshaped in four steps:
//!
//! * format encouragement `alpha = G / F(format)`, where `F` counts how many
//!   rollouts in the group share the format;
//! * length penalty `beta = exp(-lambda * (l - l_min) / (l_max - l_min + eps))`;
//! * cosine decay of the amplification toward a baseline `b` over training,
//!   `b + 0.5 * (v - b) * (1 + cos(pi * t / T))`;
//! * group z-score of the decayed rewards, giving the advantage.
//!
//! Malformed rollouts always score `r = 0` with `alpha = 1`. They count toward
//! `G` and the length extremes but never toward another format's `F`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::format::ReasoningFormat;

/// Population standard deviations below this are treated as zero.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("group needs at least 2 rollouts, got {0}")]
    GroupTooSmall(usize),
    #[error("invalid penalty parameters: {0}")]
    InvalidPenalty(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub id: u64,
    pub format: ReasoningFormat,
    #[serde(default)]
    pub answer: String,
    pub correct: bool,
    pub length: u64,
}

impl Rollout {
    pub fn new(id: u64, format: ReasoningFormat, correct: bool, length: u64) -> Self {
        Rollout { id, format, answer: String::new(), correct, length }
    }

    /// Base reward in `{0, 1}`; malformed rollouts never score.
    pub fn base_reward(&self) -> f64 {
        if self.correct && !self.format.is_malformed() {
            1.0
        } else {
            0.0
        }
    }
}

/// `G >= 2` rollouts for one question along with their format census and
/// length extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    question_id: String,
    rollouts: Vec<Rollout>,
    census: BTreeMap<ReasoningFormat, usize>,
    l_min: u64,
    l_max: u64,
}

impl RolloutGroup {
    pub fn new(question_id: impl Into<String>, rollouts: Vec<Rollout>) -> Result<Self, RewardError> {
        if rollouts.len() < 2 {
            return Err(RewardError::GroupTooSmall(rollouts.len()));
        }
        let mut census = BTreeMap::new();
        for r in &rollouts {
            *census.entry(r.format).or_insert(0) += 1;
        }
        let l_min = rollouts.iter().map(|r| r.length).min().unwrap_or(0);
        let l_max = rollouts.iter().map(|r| r.length).max().unwrap_or(0);
        Ok(RolloutGroup { question_id: question_id.into(), rollouts, census, l_min, l_max })
    }

    pub fn question_id(&self) -> &str {
        &self.question_id
    }

    pub fn rollouts(&self) -> &[Rollout] {
        &self.rollouts
    }

    pub fn size(&self) -> usize {
        self.rollouts.len()
    }

    /// Count per format, `Malformed` included, summing to `G`.
    pub fn census(&self) -> &BTreeMap<ReasoningFormat, usize> {
        &self.census
    }

    pub fn count(&self, format: ReasoningFormat) -> usize {
        self.census.get(&format).copied().unwrap_or(0)
    }

    pub fn l_min(&self) -> u64 {
        self.l_min
    }

    pub fn l_max(&self) -> u64 {
        self.l_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub lambda: f64,
    pub epsilon: f64,
}

impl PenaltyParams {
    pub const DEFAULT_LAMBDA: f64 = 0.5;
    pub const DEFAULT_EPSILON: f64 = 1e-6;

    pub fn new(lambda: f64, epsilon: f64) -> Result<Self, RewardError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(RewardError::InvalidPenalty(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(RewardError::InvalidPenalty(format!("epsilon must be finite and > 0, got {epsilon}")));
        }
        Ok(PenaltyParams { lambda, epsilon })
    }

    pub fn with_lambda(lambda: f64) -> Result<Self, RewardError> {
        Self::new(lambda, Self::DEFAULT_EPSILON)
    }
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams { lambda: Self::DEFAULT_LAMBDA, epsilon: Self::DEFAULT_EPSILON }
    }
}

/// Position in training for the cosine decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub step: u64,
    pub total_steps: u64,
    pub baseline: f64,
}

impl Schedule {
    pub const DEFAULT_BASELINE: f64 = 1.0;

    pub fn new(step: u64, total_steps: u64, baseline: f64) -> Result<Self, RewardError> {
        if total_steps == 0 {
            return Err(RewardError::InvalidSchedule("total_steps must be positive".into()));
        }
        if step > total_steps {
            return Err(RewardError::InvalidSchedule(format!("step {step} exceeds total_steps {total_steps}")));
        }
        if !baseline.is_finite() {
            return Err(RewardError::InvalidSchedule("baseline must be finite".into()));
        }
        Ok(Schedule { step, total_steps, baseline })
    }

    pub fn at(step: u64, total_steps: u64) -> Result<Self, RewardError> {
        Self::new(step, total_steps, Self::DEFAULT_BASELINE)
    }

    /// Weight on the undecayed value: `0.5 * (1 + cos(pi * t / T))`, from 1 at
    /// `t = 0` down to 0 at `t = T`.
    pub fn weight(&self) -> f64 {
        if self.step == 0 {
            return 1.0;
        }
        if self.step == self.total_steps {
            return 0.0;
        }
        0.5 * (1.0 + (PI * self.step as f64 / self.total_steps as f64).cos())
    }
}

/// What the cosine schedule decays.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// Decay the amplification `alpha * beta` toward the baseline, then
    /// multiply by `r`. Incorrect rollouts stay at zero for the whole run.
    #[default]
    Factor,
    /// Decay `r'' = alpha * beta * r` itself. Incorrect rollouts drift up to
    /// the baseline as `t -> T`, which erases the correctness signal.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTrace {
    pub rollout_id: u64,
    pub format: ReasoningFormat,
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r_prime: f64,
    pub r_double_prime: f64,
    pub r_tilde: f64,
    pub advantage: f64,
}

pub fn format_encouragement(group: &RolloutGroup, i: usize) -> f64 {
    let format = group.rollouts[i].format;
    if format.is_malformed() {
        return 1.0;
    }
    group.size() as f64 / group.count(format) as f64
}

pub fn length_penalty(group: &RolloutGroup, i: usize, p: &PenaltyParams) -> f64 {
    let l = group.rollouts[i].length as f64;
    let lo = group.l_min as f64;
    let hi = group.l_max as f64;
    (-p.lambda * (l - lo) / (hi - lo + p.epsilon)).exp()
}

pub fn cosine_decay(value: f64, sched: &Schedule) -> f64 {
    // `b + (v - b)` need not round back to `v`.
    if sched.step == 0 {
        return value;
    }
    let b = sched.baseline;
    b + (value - b) * sched.weight()
}

/// Z-score of `rewards` using the population standard deviation. Uniform
/// groups yield all-zero advantages.
pub fn group_advantage(rewards: &[f64]) -> Result<Vec<f64>, RewardError> {
    if rewards.len() < 2 {
        return Err(RewardError::GroupTooSmall(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < DEGENERATE_STD {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Full shaping chain for every rollout in the group, advantages included.
pub fn shape_group(group: &RolloutGroup, p: &PenaltyParams, sched: &Schedule, mode: DecayMode) -> Vec<RewardTrace> {
    let mut traces: Vec<RewardTrace> = group
        .rollouts
        .iter()
        .enumerate()
        .map(|(i, rollout)| {
            let r = rollout.base_reward();
            let alpha = format_encouragement(group, i);
            let beta = length_penalty(group, i, p);
            let r_prime = alpha * r;
            let r_double_prime = beta * r_prime;
            let r_tilde = match mode {
                DecayMode::Factor => cosine_decay(alpha * beta, sched) * r,
                DecayMode::Literal => cosine_decay(r_double_prime, sched),
            };
            RewardTrace {
                rollout_id: rollout.id,
                format: rollout.format,
                r,
                alpha,
                beta,
                r_prime,
                r_double_prime,
                r_tilde,
                advantage: 0.0,
            }
        })
        .collect();
    fill_advantages(&mut traces);
    traces
}

/// Unshaped baseline: `alpha = beta = 1` and `r~ = r`.
pub fn plain_traces(group: &RolloutGroup) -> Vec<RewardTrace> {
    let mut traces: Vec<RewardTrace> = group
        .rollouts
        .iter()
        .map(|rollout| {
            let r = rollout.base_reward();
            RewardTrace {
                rollout_id: rollout.id,
                format: rollout.format,
                r,
                alpha: 1.0,
                beta: 1.0,
                r_prime: r,
                r_double_prime: r,
                r_tilde: r,
                advantage: 0.0,
            }
        })
        .collect();
    fill_advantages(&mut traces);
    traces
}

fn fill_advantages(traces: &mut [RewardTrace]) {
    let rewards: Vec<f64> = traces.iter().map(|t| t.r_tilde).collect();
    // Groups are constructed with G >= 2.
    let adv = group_advantage(&rewards).expect("group size checked at construction");
    for (t, a) in traces.iter_mut().zip(adv) {
        t.advantage = a;
    }
}
