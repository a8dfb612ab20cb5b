//! Shared fixtures and an independent reference evaluation of the shaping
//! chain, written directly from the formulas without reusing library code.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use arm_alp::{ReasoningFormat, Rollout, RolloutGroup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// The four appendix variants with the format each should parse to.
pub fn appendix_variants() -> Vec<(&'static str, ReasoningFormat)> {
    vec![
        ("appendix/direct_answer.txt", ReasoningFormat::DirectAnswer),
        ("appendix/short_cot.txt", ReasoningFormat::ShortCot),
        ("appendix/code.txt", ReasoningFormat::CodeText),
        ("appendix/long_cot.txt", ReasoningFormat::LongCot),
    ]
}

pub const APPENDIX_ANSWER: &str = "Project Objectives";

#[derive(Debug, Clone, Copy)]
pub struct OracleRow {
    pub alpha: f64,
    pub beta: f64,
    pub r_tilde: f64,
    pub advantage: f64,
}

/// `(format, correct, length)` triples evaluated in one pass.
/// `literal` selects decaying the amplified reward instead of the factor.
pub fn oracle(
    rollouts: &[(ReasoningFormat, bool, u64)],
    lambda: f64,
    eps: f64,
    t: u64,
    total: u64,
    b: f64,
    literal: bool,
) -> Vec<OracleRow> {
    let g = rollouts.len() as f64;
    let lmin = rollouts.iter().map(|x| x.2).min().unwrap() as f64;
    let lmax = rollouts.iter().map(|x| x.2).max().unwrap() as f64;
    let w = 0.5 * (1.0 + (PI * t as f64 / total as f64).cos());
    let shaped: Vec<(f64, f64, f64)> = rollouts
        .iter()
        .map(|&(f, ok, l)| {
            let r = if ok && f != ReasoningFormat::Malformed { 1.0 } else { 0.0 };
            let alpha = if f == ReasoningFormat::Malformed {
                1.0
            } else {
                g / rollouts.iter().filter(|x| x.0 == f).count() as f64
            };
            let beta = (-lambda * (l as f64 - lmin) / (lmax - lmin + eps)).exp();
            let r_tilde = if literal { b + (alpha * beta * r - b) * w } else { (b + (alpha * beta - b) * w) * r };
            (alpha, beta, r_tilde)
        })
        .collect();
    let mean = shaped.iter().map(|s| s.2).sum::<f64>() / g;
    let std = (shaped.iter().map(|s| (s.2 - mean) * (s.2 - mean)).sum::<f64>() / g).sqrt();
    shaped
        .into_iter()
        .map(|(alpha, beta, r_tilde)| OracleRow {
            alpha,
            beta,
            r_tilde,
            advantage: if std < 1e-12 { 0.0 } else { (r_tilde - mean) / std },
        })
        .collect()
}

/// Random group of size `g`; Malformed appears with small probability.
pub fn random_rollouts(rng: &mut ChaCha8Rng, g: usize) -> Vec<(ReasoningFormat, bool, u64)> {
    const POOL: [ReasoningFormat; 6] = [
        ReasoningFormat::DirectAnswer,
        ReasoningFormat::ShortCot,
        ReasoningFormat::CodeText,
        ReasoningFormat::CodeExec,
        ReasoningFormat::LongCot,
        ReasoningFormat::Malformed,
    ];
    (0..g)
        .map(|_| {
            let f = if rng.random::<f64>() < 0.05 { POOL[5] } else { POOL[rng.random_range(0..5)] };
            (f, rng.random::<bool>(), rng.random_range(1..4000))
        })
        .collect()
}

pub fn build_group(rollouts: &[(ReasoningFormat, bool, u64)]) -> RolloutGroup {
    RolloutGroup::new("q", rollouts.iter().enumerate().map(|(i, &(f, c, l))| Rollout::new(i as u64, f, c, l)).collect())
        .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}
