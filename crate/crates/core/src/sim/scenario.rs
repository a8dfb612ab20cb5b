//! World model for the simulator: task classes with per-format accuracy and
//! response-length distributions.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::format::ReasoningFormat;
use crate::reward::{Rollout, RolloutGroup};

use super::policy::PolicyState;

/// Length spread as a fraction of the mean when a profile does not set one.
pub const DEFAULT_SPREAD_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ScenarioError {
    pub field: String,
    pub message: String,
}

impl ScenarioError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatProfile {
    pub accuracy: f64,
    pub length_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_spread: Option<f64>,
}

impl FormatProfile {
    pub fn new(accuracy: f64, length_mean: f64) -> Self {
        FormatProfile { accuracy, length_mean, length_spread: None }
    }

    pub fn spread(&self) -> f64 {
        self.length_spread.unwrap_or(DEFAULT_SPREAD_FRACTION * self.length_mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskClass {
    pub name: String,
    pub weight: f64,
    pub formats: BTreeMap<ReasoningFormat, FormatProfile>,
}

impl TaskClass {
    /// Formats the policy can choose for this class, in canonical order.
    pub fn format_list(&self) -> Vec<ReasoningFormat> {
        self.formats.keys().copied().collect()
    }

    pub fn best_accuracy(&self) -> f64 {
        self.formats.values().map(|p| p.accuracy).fold(0.0, f64::max)
    }
}

fn default_group_size() -> usize {
    8
}

fn default_groups_per_step() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub task_classes: Vec<TaskClass>,
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    pub steps: u64,
    pub seed: u64,
    #[serde(default = "default_groups_per_step")]
    pub groups_per_step: usize,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.task_classes.is_empty() {
            return Err(ScenarioError::new("task_classes", "at least one task class is required"));
        }
        if self.group_size < 2 {
            return Err(ScenarioError::new("group_size", format!("must be >= 2, got {}", self.group_size)));
        }
        if self.groups_per_step == 0 {
            return Err(ScenarioError::new("groups_per_step", "must be positive"));
        }
        let mut total = 0.0;
        for (i, class) in self.task_classes.iter().enumerate() {
            let at = |f: &str| format!("task_classes[{i}].{f}");
            if !(class.weight >= 0.0 && class.weight.is_finite()) {
                return Err(ScenarioError::new(at("weight"), "must be a non-negative probability"));
            }
            total += class.weight;
            if class.formats.is_empty() {
                return Err(ScenarioError::new(at("formats"), "at least one format is required"));
            }
            for (format, p) in &class.formats {
                let at = |f: &str| format!("task_classes[{i}].formats.{format}.{f}");
                if format.is_malformed() {
                    return Err(ScenarioError::new(at("accuracy"), "malformed is not a selectable format"));
                }
                if !(0.0..=1.0).contains(&p.accuracy) {
                    return Err(ScenarioError::new(at("accuracy"), format!("must lie in [0, 1], got {}", p.accuracy)));
                }
                if !(p.length_mean > 0.0 && p.length_mean.is_finite()) {
                    return Err(ScenarioError::new(at("length_mean"), "must be positive"));
                }
                if !(p.spread() >= 0.0 && p.spread().is_finite()) {
                    return Err(ScenarioError::new(at("length_spread"), "must be non-negative"));
                }
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(ScenarioError::new("task_classes", format!("weights must sum to 1, got {total}")));
        }
        Ok(())
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.task_classes.iter().position(|c| c.name == name)
    }

    /// Three difficulty classes where long chain of thought is the most
    /// accurate format everywhere, but by a slim margin on easy tasks where
    /// it costs far more tokens than the alternatives.
    pub fn collapse_benchmark() -> Self {
        use ReasoningFormat::*;
        let class = |name: &str, rows: [(ReasoningFormat, f64, f64); 5]| TaskClass {
            name: name.to_string(),
            weight: 1.0 / 3.0,
            formats: rows.iter().map(|&(f, acc, len)| (f, FormatProfile::new(acc, len))).collect(),
        };
        let mut spec = ScenarioSpec {
            task_classes: vec![
                class(
                    "easy",
                    [
                        (DirectAnswer, 0.86, 12.0),
                        (ShortCot, 0.88, 60.0),
                        (CodeText, 0.80, 160.0),
                        (CodeExec, 0.87, 140.0),
                        (LongCot, 0.92, 600.0),
                    ],
                ),
                class(
                    "medium",
                    [
                        (DirectAnswer, 0.40, 15.0),
                        (ShortCot, 0.62, 120.0),
                        (CodeText, 0.55, 220.0),
                        (CodeExec, 0.74, 200.0),
                        (LongCot, 0.82, 1200.0),
                    ],
                ),
                class(
                    "hard",
                    [
                        (DirectAnswer, 0.05, 20.0),
                        (ShortCot, 0.15, 250.0),
                        (CodeText, 0.20, 400.0),
                        (CodeExec, 0.48, 350.0),
                        (LongCot, 0.55, 3000.0),
                    ],
                ),
            ],
            group_size: 8,
            steps: 300,
            seed: 0,
            groups_per_step: 16,
        };
        // Exact thirds do not sum to 1 in floating point.
        spec.task_classes[2].weight = 1.0 - 2.0 / 3.0;
        spec
    }
}

/// Pick a class index according to the class weights.
pub fn sample_class<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, c) in spec.task_classes.iter().enumerate() {
        acc += c.weight;
        if u < acc {
            return i;
        }
    }
    spec.task_classes.len() - 1
}

/// Draw an index from a categorical distribution by inverse CDF.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave acc slightly below 1; fall back to the last
    // index with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Length drawn from a normal, clamped at 1 and rounded to whole tokens.
pub fn sample_length<R: Rng + ?Sized>(profile: &FormatProfile, rng: &mut R) -> u64 {
    let spread = profile.spread();
    let raw = if spread > 0.0 {
        Normal::new(profile.length_mean, spread).expect("spread validated as finite and positive").sample(rng)
    } else {
        profile.length_mean
    };
    raw.round().max(1.0) as u64
}

/// Sample `G` rollouts for one question of class `class_idx`.
pub fn sample_group<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    policy: &PolicyState,
    class_idx: usize,
    question_id: impl Into<String>,
    rng: &mut R,
) -> RolloutGroup {
    let class = &spec.task_classes[class_idx];
    let cp = &policy.classes[class_idx];
    let probs = cp.probabilities();
    let rollouts = (0..spec.group_size)
        .map(|i| {
            let format = cp.formats[sample_categorical(&probs, rng)];
            let profile = &class.formats[&format];
            let correct = rng.random::<f64>() < profile.accuracy;
            let length = sample_length(profile, rng);
            Rollout::new(i as u64, format, correct, length)
        })
        .collect();
    RolloutGroup::new(question_id, rollouts).expect("group_size validated >= 2")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::{stream, Stream};
    use ReasoningFormat::*;

    #[test]
    fn benchmark_validates() {
        let spec = ScenarioSpec::collapse_benchmark();
        spec.validate().unwrap();
        for class in &spec.task_classes {
            let long = class.formats[&LongCot].accuracy;
            assert!(class.formats.iter().all(|(f, p)| *f == LongCot || p.accuracy < long));
        }
    }

    #[test]
    fn validation_names_fields() {
        let mut spec = ScenarioSpec::collapse_benchmark();
        spec.task_classes.clear();
        assert_eq!(spec.validate().unwrap_err().field, "task_classes");

        let mut spec = ScenarioSpec::collapse_benchmark();
        spec.task_classes[1].formats.get_mut(&ShortCot).unwrap().accuracy = 1.5;
        assert_eq!(spec.validate().unwrap_err().field, "task_classes[1].formats.short_cot.accuracy");

        let mut spec = ScenarioSpec::collapse_benchmark();
        spec.task_classes[0].weight = 0.9;
        assert!(spec.validate().unwrap_err().message.contains("sum to 1"));

        let mut spec = ScenarioSpec::collapse_benchmark();
        spec.group_size = 1;
        assert_eq!(spec.validate().unwrap_err().field, "group_size");
    }

    #[test]
    fn degenerate_policy_yields_single_format_census() {
        let spec = ScenarioSpec::collapse_benchmark();
        let mut policy = PolicyState::uniform(&spec);
        let long = policy.classes[0].index_of(LongCot).unwrap();
        policy.classes[0].logits[long] = f64::INFINITY;
        let g = sample_group(&spec, &policy, 0, "q", &mut stream(1, Stream::Training));
        assert_eq!(g.count(LongCot), spec.group_size);
        assert_eq!(g.census().len(), 1);
    }

    #[test]
    fn perfect_accuracy_means_all_correct() {
        let mut spec = ScenarioSpec::collapse_benchmark();
        for p in spec.task_classes[2].formats.values_mut() {
            p.accuracy = 1.0;
        }
        let policy = PolicyState::uniform(&spec);
        let mut rng = stream(3, Stream::Training);
        for _ in 0..20 {
            let g = sample_group(&spec, &policy, 2, "q", &mut rng);
            assert!(g.rollouts().iter().all(|r| r.correct));
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let spec = ScenarioSpec::collapse_benchmark();
        let policy = PolicyState::uniform(&spec);
        let a = sample_group(&spec, &policy, 1, "q", &mut stream(42, Stream::Training));
        let b = sample_group(&spec, &policy, 1, "q", &mut stream(42, Stream::Training));
        assert_eq!(a, b);
    }

    #[test]
    fn lengths_are_positive_integers() {
        let p = FormatProfile { accuracy: 1.0, length_mean: 2.0, length_spread: Some(50.0) };
        let mut rng = stream(9, Stream::Training);
        assert!((0..500).all(|_| sample_length(&p, &mut rng) >= 1));
    }

    #[test]
    fn categorical_respects_zero_mass() {
        let mut rng = stream(5, Stream::Training);
        for _ in 0..200 {
            assert_eq!(sample_categorical(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }
}
