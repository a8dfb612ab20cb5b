use arm_alp::sim::policy::{softmax, surrogate_gradient, surrogate_objective, SurrogateSample};
use arm_alp::sim::{lambda_sweep, run_training, ScenarioSpec, TrainingConfig, TrainingMode};
use arm_alp::ReasoningFormat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn benchmark(seed: u64) -> ScenarioSpec {
    ScenarioSpec { seed, ..ScenarioSpec::collapse_benchmark() }
}

#[test]
fn identical_inputs_give_identical_logs() {
    let spec = ScenarioSpec { steps: 40, ..benchmark(11) };
    let cfg = TrainingConfig::new(TrainingMode::Alp);
    assert_eq!(run_training(&spec, &cfg), run_training(&spec, &cfg));
}

#[test]
fn probabilities_stay_on_the_simplex() {
    let spec = ScenarioSpec { steps: 60, ..benchmark(3) };
    for mode in [TrainingMode::PlainGrpo, TrainingMode::Alp] {
        let log = run_training(&spec, &TrainingConfig::new(mode));
        for rec in &log.steps {
            for c in &rec.classes {
                let sum: f64 = c.distribution.values().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                assert!(c.distribution.values().all(|&p| p >= 0.0));
            }
        }
    }
}

#[test]
fn zero_steps_logs_only_the_initial_policy() {
    let spec = ScenarioSpec { steps: 0, ..benchmark(0) };
    let log = run_training(&spec, &TrainingConfig::new(TrainingMode::Alp));
    assert_eq!(log.steps.len(), 1);
    assert_eq!(log.steps[0].step, 0);
    assert_eq!(log.final_policy.step, 0);
    assert!(log.steps[0].classes.iter().all(|c| (c.entropy - 5f64.ln()).abs() < 1e-12));
}

#[test]
fn steps_are_contiguous() {
    let spec = ScenarioSpec { steps: 25, ..benchmark(5) };
    let log = run_training(&spec, &TrainingConfig::new(TrainingMode::PlainGrpo));
    assert!(log.steps.iter().enumerate().all(|(i, s)| s.step == i as u64));
}

#[test]
fn zero_lambda_matches_disabled_penalty() {
    let spec = ScenarioSpec { steps: 80, ..benchmark(7) };
    let zero = run_training(&spec, &TrainingConfig::new(TrainingMode::Alp).with_lambda(0.0));
    let off = run_training(&spec, &TrainingConfig { length_penalty: false, ..TrainingConfig::new(TrainingMode::Alp) });
    assert_eq!(zero.steps, off.steps);
}

#[test]
fn single_lambda_sweep_has_one_row() {
    let spec = ScenarioSpec { steps: 20, ..benchmark(0) };
    let report = lambda_sweep(&spec, &[0.5], &TrainingConfig::new(TrainingMode::Alp));
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].lambda, 0.5);
}

#[test]
fn surrogate_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(2..=5);
        let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let old_logits: Vec<f64> = logits.iter().map(|l| l + rng.random_range(-0.1..0.1)).collect();
        let old = softmax(&old_logits);
        let samples: Vec<SurrogateSample> = (0..rng.random_range(1..16))
            .map(|_| SurrogateSample { format_idx: rng.random_range(0..k), advantage: rng.random_range(-2.0..2.0) })
            .collect();
        let grad = surrogate_gradient(&logits, &old, &samples, 0.2);
        let h = 1e-6;
        for j in 0..k {
            let (mut up, mut dn) = (logits.clone(), logits.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (surrogate_objective(&up, &old, &samples, 0.2) - surrogate_objective(&dn, &old, &samples, 0.2))
                / (2.0 * h);
            let err = (grad[j] - fd).abs() / grad[j].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn plain_grpo_entropy_settles() {
    // Sampling noise makes single updates jitter, so the check is on the
    // trend across the final 20% of steps of the seed-averaged entropy.
    let logs: Vec<_> =
        SEEDS.iter().map(|&s| run_training(&benchmark(s), &TrainingConfig::new(TrainingMode::PlainGrpo))).collect();
    let steps = logs[0].steps.len();
    for c in 0..3 {
        let avg: Vec<f64> = (steps - steps / 5..steps)
            .map(|i| logs.iter().map(|l| l.steps[i].classes[c].entropy).sum::<f64>() / SEEDS.len() as f64)
            .collect();
        let n = avg.len() as f64;
        let x_mean = (n - 1.0) / 2.0;
        let y_mean = avg.iter().sum::<f64>() / n;
        let slope = avg.iter().enumerate().map(|(i, y)| (i as f64 - x_mean) * (y - y_mean)).sum::<f64>()
            / avg.iter().enumerate().map(|(i, _)| (i as f64 - x_mean).powi(2)).sum::<f64>();
        assert!(slope <= 0.0, "class {c}: entropy slope {slope}");
        assert!(avg[avg.len() - 1] <= avg[0], "class {c}: {} -> {}", avg[0], avg[avg.len() - 1]);
    }
}

#[test]
fn alp_keeps_near_best_formats_alive() {
    let spec = benchmark(0);
    let logs: Vec<_> =
        SEEDS.iter().map(|&s| run_training(&benchmark(s), &TrainingConfig::new(TrainingMode::Alp))).collect();
    for (c, class) in spec.task_classes.iter().enumerate() {
        let best = class.best_accuracy();
        for (f, profile) in &class.formats {
            // Within 0.05 of the best, with slack for decimal rounding.
            if best - profile.accuracy > 0.05 + 1e-9 {
                continue;
            }
            let floor = (0..logs[0].steps.len())
                .map(|i| logs.iter().map(|l| l.steps[i].classes[c].distribution[f]).sum::<f64>() / SEEDS.len() as f64)
                .fold(f64::INFINITY, f64::min);
            assert!(floor >= 1e-3, "{}/{f}: seed-averaged probability fell to {floor}", class.name);
        }
    }
}

#[test]
fn alp_keeps_easy_and_medium_diverse() {
    for &s in &SEEDS {
        let log = run_training(&benchmark(s), &TrainingConfig::new(TrainingMode::Alp));
        for name in ["easy", "medium"] {
            let c = log.final_class(name).unwrap();
            assert!(c.entropy > 0.5, "seed {s} {name}: entropy {}", c.entropy);
        }
    }
}

#[test]
fn plain_grpo_collapses_onto_long_cot() {
    let collapsed = SEEDS
        .iter()
        .filter(|&&s| {
            let log = run_training(&benchmark(s), &TrainingConfig::new(TrainingMode::PlainGrpo));
            log.summary.classes.iter().all(|c| c.distribution[&ReasoningFormat::LongCot] > 0.9)
        })
        .count();
    assert!(collapsed >= 4, "collapsed on {collapsed}/5 seeds");
}
