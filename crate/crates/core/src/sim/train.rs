//! Training loop, run logs and penalty-strength sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::format::ReasoningFormat;
use crate::reward::{plain_traces, shape_group, DecayMode, PenaltyParams, Schedule};

use super::policy::{grpo_step, PolicyState, PolicyUpdateParams, ShapedGroup};
use super::rng::{stream, Stream, RNG_ALGORITHM};
use super::scenario::{sample_categorical, sample_class, sample_group, sample_length, ScenarioSpec};

/// Rollouts drawn per class from the final policy for the run summary.
pub const EVAL_ROLLOUTS_PER_CLASS: usize = 512;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// Binary correctness reward, no shaping.
    PlainGrpo,
    /// Format encouragement, length penalty and cosine decay.
    Alp,
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingMode::PlainGrpo => "plain_grpo",
            TrainingMode::Alp => "alp",
        })
    }
}

impl FromStr for TrainingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "plain_grpo" | "plain" | "grpo" => Ok(TrainingMode::PlainGrpo),
            "alp" | "grpo_alp" => Ok(TrainingMode::Alp),
            other => Err(format!("unknown training mode `{other}` (expected plain_grpo or alp)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub mode: TrainingMode,
    pub penalty: PenaltyParams,
    pub decay: DecayMode,
    pub baseline: f64,
    /// Ablation switch; `false` forces `beta = 1`.
    pub length_penalty: bool,
    pub update: PolicyUpdateParams,
}

impl TrainingConfig {
    pub fn new(mode: TrainingMode) -> Self {
        TrainingConfig {
            mode,
            penalty: PenaltyParams::default(),
            decay: DecayMode::Factor,
            baseline: Schedule::DEFAULT_BASELINE,
            length_penalty: true,
            update: PolicyUpdateParams::default(),
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.penalty.lambda = lambda;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub training: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledStats {
    pub groups: usize,
    pub rollouts: usize,
    pub accuracy: f64,
    pub mean_length: f64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSnapshot {
    pub class: String,
    pub expected_accuracy: f64,
    pub expected_length: f64,
    pub entropy: f64,
    pub distribution: BTreeMap<ReasoningFormat, f64>,
    /// Batch statistics for the update that produced this policy; absent on
    /// the initial snapshot and for classes the batch did not visit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled: Option<SampledStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub classes: Vec<ClassSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthHistogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub rollouts: usize,
    pub accuracy: f64,
    pub mean_length: f64,
    pub format_counts: BTreeMap<ReasoningFormat, usize>,
    pub histogram: LengthHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: String,
    pub expected_accuracy: f64,
    pub expected_length: f64,
    pub entropy: f64,
    pub distribution: BTreeMap<ReasoningFormat, f64>,
    pub eval: EvalStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub training_steps: u64,
    /// Class-weighted expected accuracy under the final policy.
    pub expected_accuracy: f64,
    /// Class-weighted expected response length under the final policy.
    pub expected_length: f64,
    pub classes: Vec<ClassSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub run_id: String,
    pub rng: String,
    pub config: RunConfig,
    pub steps: Vec<StepRecord>,
    pub summary: RunSummary,
    pub final_policy: PolicyState,
}

impl RunLog {
    pub fn final_class(&self, name: &str) -> Option<&ClassSummary> {
        self.summary.classes.iter().find(|c| c.class == name)
    }
}

fn snapshot(spec: &ScenarioSpec, policy: &PolicyState, c: usize, sampled: Option<SampledStats>) -> ClassSnapshot {
    let class = &spec.task_classes[c];
    let cp = &policy.classes[c];
    let probs = cp.probabilities();
    let mut expected_accuracy = 0.0;
    let mut expected_length = 0.0;
    for (f, p) in cp.formats.iter().zip(&probs) {
        let profile = &class.formats[f];
        expected_accuracy += p * profile.accuracy;
        expected_length += p * profile.length_mean;
    }
    ClassSnapshot {
        class: class.name.clone(),
        expected_accuracy,
        expected_length,
        entropy: super::policy::entropy(&probs),
        distribution: cp.formats.iter().copied().zip(probs).collect(),
        sampled,
    }
}

fn evaluate(spec: &ScenarioSpec, policy: &PolicyState) -> Vec<EvalStats> {
    let mut rng = stream(spec.seed, Stream::Evaluation);
    spec.task_classes
        .iter()
        .zip(&policy.classes)
        .map(|(class, cp)| {
            let upper = class.formats.values().map(|p| p.length_mean + 3.0 * p.spread()).fold(1.0, f64::max).ceil();
            let bin_width = upper / HISTOGRAM_BINS as f64;
            let mut counts = vec![0u64; HISTOGRAM_BINS];
            let mut format_counts = BTreeMap::new();
            let mut correct = 0usize;
            let mut total_len = 0u64;
            let probs = cp.probabilities();
            for _ in 0..EVAL_ROLLOUTS_PER_CLASS {
                let f = cp.formats[sample_categorical(&probs, &mut rng)];
                let profile = &class.formats[&f];
                if rand::Rng::random::<f64>(&mut rng) < profile.accuracy {
                    correct += 1;
                }
                let len = sample_length(profile, &mut rng);
                total_len += len;
                let bin = ((len as f64 / bin_width) as usize).min(HISTOGRAM_BINS - 1);
                counts[bin] += 1;
                *format_counts.entry(f).or_insert(0) += 1;
            }
            let n = EVAL_ROLLOUTS_PER_CLASS as f64;
            EvalStats {
                rollouts: EVAL_ROLLOUTS_PER_CLASS,
                accuracy: correct as f64 / n,
                mean_length: total_len as f64 / n,
                format_counts,
                histogram: LengthHistogram { bin_width, counts },
            }
        })
        .collect()
}

fn run_id(spec: &ScenarioSpec, cfg: &TrainingConfig) -> String {
    format!("{}-seed{}-lambda{}-T{}", cfg.mode, spec.seed, cfg.penalty.lambda, spec.steps)
}

/// Train a fresh uniform policy for `spec.steps` updates.
///
/// The log holds `steps + 1` records: the initial policy at step 0, then the
/// policy after each update.
pub fn run_training(spec: &ScenarioSpec, cfg: &TrainingConfig) -> RunLog {
    let mut policy = PolicyState::uniform(spec);
    let mut rng = stream(spec.seed, Stream::Training);
    let n_classes = spec.task_classes.len();
    let mut steps = Vec::with_capacity(spec.steps as usize + 1);
    steps.push(StepRecord { step: 0, classes: (0..n_classes).map(|c| snapshot(spec, &policy, c, None)).collect() });

    for s in 0..spec.steps {
        let sched = Schedule::new(s, spec.steps, cfg.baseline).expect("step < total_steps");
        let mut batch = Vec::with_capacity(spec.groups_per_step);
        for g in 0..spec.groups_per_step {
            let class = sample_class(spec, &mut rng);
            let group = sample_group(spec, &policy, class, format!("s{s}-g{g}"), &mut rng);
            let traces = match cfg.mode {
                TrainingMode::PlainGrpo => plain_traces(&group),
                TrainingMode::Alp => {
                    let penalty =
                        if cfg.length_penalty { cfg.penalty } else { PenaltyParams { lambda: 0.0, ..cfg.penalty } };
                    shape_group(&group, &penalty, &sched, cfg.decay)
                }
            };
            batch.push(ShapedGroup { class, group, traces });
        }

        let mut sampled: Vec<Option<SampledStats>> = vec![None; n_classes];
        for (c, slot) in sampled.iter_mut().enumerate() {
            let groups: Vec<&ShapedGroup> = batch.iter().filter(|g| g.class == c).collect();
            if groups.is_empty() {
                continue;
            }
            let rollouts: Vec<_> = groups.iter().flat_map(|g| g.group.rollouts()).collect();
            let rewards: Vec<f64> = groups.iter().flat_map(|g| g.traces.iter().map(|t| t.r_tilde)).collect();
            let n = rollouts.len() as f64;
            *slot = Some(SampledStats {
                groups: groups.len(),
                rollouts: rollouts.len(),
                accuracy: rollouts.iter().filter(|r| r.correct).count() as f64 / n,
                mean_length: rollouts.iter().map(|r| r.length as f64).sum::<f64>() / n,
                mean_reward: rewards.iter().sum::<f64>() / n,
            });
        }

        policy = grpo_step(&policy, &batch, &cfg.update);
        steps.push(StepRecord {
            step: s + 1,
            classes: sampled.into_iter().enumerate().map(|(c, st)| snapshot(spec, &policy, c, st)).collect(),
        });
    }

    let last = steps.last().expect("initial snapshot always present");
    let evals = evaluate(spec, &policy);
    let classes: Vec<ClassSummary> = last
        .classes
        .iter()
        .zip(evals)
        .map(|(snap, eval)| ClassSummary {
            class: snap.class.clone(),
            expected_accuracy: snap.expected_accuracy,
            expected_length: snap.expected_length,
            entropy: snap.entropy,
            distribution: snap.distribution.clone(),
            eval,
        })
        .collect();
    let weights = spec.task_classes.iter().map(|c| c.weight);
    let expected_accuracy = classes.iter().zip(weights.clone()).map(|(c, w)| w * c.expected_accuracy).sum();
    let expected_length = classes.iter().zip(weights).map(|(c, w)| w * c.expected_length).sum();

    RunLog {
        run_id: run_id(spec, cfg),
        rng: RNG_ALGORITHM.to_string(),
        config: RunConfig { scenario: spec.clone(), training: *cfg },
        steps,
        summary: RunSummary { training_steps: spec.steps, expected_accuracy, expected_length, classes },
        final_policy: policy,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepClassRow {
    pub class: String,
    pub expected_length: f64,
    pub expected_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub expected_length: f64,
    pub expected_accuracy: f64,
    pub classes: Vec<SweepClassRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn class_lengths(&self, class: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.classes.iter().find(|c| c.class == class).map(|c| c.expected_length))
            .collect()
    }
}

/// One ALP run per `lambda`, all on `spec.seed`. Runs execute on separate
/// threads; each owns its state.
pub fn lambda_sweep(spec: &ScenarioSpec, lambdas: &[f64], base: &TrainingConfig) -> SweepReport {
    let logs: Vec<RunLog> = std::thread::scope(|scope| {
        let handles: Vec<_> = lambdas
            .iter()
            .map(|&lambda| {
                let cfg = TrainingConfig { mode: TrainingMode::Alp, ..*base }.with_lambda(lambda);
                scope.spawn(move || run_training(spec, &cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });
    SweepReport {
        seed: spec.seed,
        rows: lambdas
            .iter()
            .zip(logs)
            .map(|(&lambda, log)| SweepRow {
                lambda,
                expected_length: log.summary.expected_length,
                expected_accuracy: log.summary.expected_accuracy,
                classes: log
                    .summary
                    .classes
                    .iter()
                    .map(|c| SweepClassRow {
                        class: c.class.clone(),
                        expected_length: c.expected_length,
                        expected_accuracy: c.expected_accuracy,
                    })
                    .collect(),
            })
            .collect(),
    }
}
