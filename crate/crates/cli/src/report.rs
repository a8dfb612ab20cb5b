//! Plot-ready tables derived from one or more run logs.
//!
//! Per run (in a directory named after the run id):
//!
//! | file                     | columns                                                   |
//! |--------------------------|-----------------------------------------------------------|
//! | `summary.csv`            | see [`SummaryRow`]                                        |
//! | `lengths.csv`            | class, bin_start, bin_end, count                          |
//! | `formats.csv`            | class, format, probability, eval_count                    |
//! | `trajectory.csv`         | step, class, expected_accuracy, expected_length, entropy  |
//! | `format_trajectory.csv`  | step, class, format, probability                          |
//!
//! Across runs (two or more logs): `comparison.csv` with every run's
//! [`SummaryRow`]s, and `token_reduction.csv` pairing each ALP run with a
//! plain-GRPO run (same seed when available).
//!
//! `report.md` summarizes everything in prose. Output is a pure function of
//! the input logs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use arm_alp::sim::TrainingMode;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::records::{summary_rows, write_csv_file, LoadedRun, SummaryRow, OVERALL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthBinRow {
    pub class: String,
    pub bin_start: f64,
    pub bin_end: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormatRow {
    pub class: String,
    pub format: String,
    pub probability: f64,
    pub eval_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub step: u64,
    pub class: String,
    pub expected_accuracy: f64,
    pub expected_length: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormatTrajectoryRow {
    pub step: u64,
    pub class: String,
    pub format: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenReductionRow {
    pub alp_run: String,
    pub plain_run: String,
    pub class: String,
    pub alp_expected_length: f64,
    pub plain_expected_length: f64,
    /// `100 * (alp - plain) / plain`; negative when ALP is shorter.
    pub reduction_pct: f64,
}

pub fn length_rows(run: &LoadedRun) -> Vec<LengthBinRow> {
    run.summary
        .classes
        .iter()
        .flat_map(|c| {
            let w = c.eval.histogram.bin_width;
            c.eval.histogram.counts.iter().enumerate().map(move |(i, &count)| LengthBinRow {
                class: c.class.clone(),
                bin_start: i as f64 * w,
                bin_end: (i + 1) as f64 * w,
                count,
            })
        })
        .collect()
}

pub fn format_rows(run: &LoadedRun) -> Vec<FormatRow> {
    run.summary
        .classes
        .iter()
        .flat_map(|c| {
            c.distribution.iter().map(move |(f, &p)| FormatRow {
                class: c.class.clone(),
                format: f.to_string(),
                probability: p,
                eval_count: c.eval.format_counts.get(f).copied().unwrap_or(0),
            })
        })
        .collect()
}

pub fn trajectory_rows(run: &LoadedRun) -> Vec<TrajectoryRow> {
    run.steps
        .iter()
        .flat_map(|s| {
            s.classes.iter().map(move |c| TrajectoryRow {
                step: s.step,
                class: c.class.clone(),
                expected_accuracy: c.expected_accuracy,
                expected_length: c.expected_length,
                entropy: c.entropy,
            })
        })
        .collect()
}

pub fn format_trajectory_rows(run: &LoadedRun) -> Vec<FormatTrajectoryRow> {
    run.steps
        .iter()
        .flat_map(|s| {
            s.classes.iter().flat_map(move |c| {
                c.distribution.iter().map(move |(f, &p)| FormatTrajectoryRow {
                    step: s.step,
                    class: c.class.clone(),
                    format: f.to_string(),
                    probability: p,
                })
            })
        })
        .collect()
}

/// Pair every ALP run with a plain-GRPO run, preferring one with the same
/// seed, and compare expected lengths per class and overall.
pub fn token_reduction_rows(runs: &[LoadedRun]) -> Vec<TokenReductionRow> {
    let plains: Vec<&LoadedRun> = runs.iter().filter(|r| r.config.mode == TrainingMode::PlainGrpo).collect();
    let Some(&fallback) = plains.first() else { return Vec::new() };
    let mut rows = Vec::new();
    for alp in runs.iter().filter(|r| r.config.mode == TrainingMode::Alp) {
        let plain = plains.iter().copied().find(|p| p.config.seed == alp.config.seed).unwrap_or(fallback);
        let mut pairs: Vec<(String, f64, f64)> = alp
            .summary
            .classes
            .iter()
            .filter_map(|a| {
                let p = plain.summary.classes.iter().find(|p| p.class == a.class)?;
                Some((a.class.clone(), a.expected_length, p.expected_length))
            })
            .collect();
        pairs.push((OVERALL.to_string(), alp.summary.expected_length, plain.summary.expected_length));
        rows.extend(pairs.into_iter().map(|(class, a, p)| TokenReductionRow {
            alp_run: alp.run_id.clone(),
            plain_run: plain.run_id.clone(),
            class,
            alp_expected_length: a,
            plain_expected_length: p,
            reduction_pct: 100.0 * (a - p) / p,
        }));
    }
    rows
}

/// Directory names for each run: the run id, suffixed on collision.
fn run_dirs(runs: &[LoadedRun]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    runs.iter()
        .map(|r| {
            let mut name = r.run_id.clone();
            let mut n = 2;
            while !seen.insert(name.clone()) {
                name = format!("{}-{n}", r.run_id);
                n += 1;
            }
            name
        })
        .collect()
}

pub fn render_markdown(runs: &[LoadedRun], reductions: &[TokenReductionRow]) -> String {
    let mut md = String::from("# Run report\n");
    for (run, dir) in runs.iter().zip(run_dirs(runs)) {
        let _ = writeln!(md, "\n## {dir}\n");
        let _ = writeln!(
            md,
            "mode {}, seed {}, lambda {}, {} training steps",
            run.config.mode, run.config.seed, run.config.lambda, run.summary.training_steps
        );
        if run.summary.training_steps == 0 {
            md.push_str("\nNote: no training steps; the policy is the initial uniform policy.\n");
        }
        md.push_str("\n| class | expected accuracy | expected length | entropy (nats) | most likely format |\n");
        md.push_str("|---|---|---|---|---|\n");
        for c in &run.summary.classes {
            let top = c
                .distribution
                .iter()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(f, p)| format!("{f} ({p:.3})"))
                .unwrap_or_default();
            let _ = writeln!(
                md,
                "| {} | {:.4} | {:.1} | {:.3} | {top} |",
                c.class, c.expected_accuracy, c.expected_length, c.entropy
            );
        }
        let _ = writeln!(
            md,
            "| {OVERALL} | {:.4} | {:.1} | | |",
            run.summary.expected_accuracy, run.summary.expected_length
        );
    }
    if runs.len() > 1 {
        md.push_str("\n## Cross-run comparison\n\n");
        if reductions.is_empty() {
            md.push_str("No ALP / plain GRPO pair among the inputs; token reduction omitted.\n");
        } else {
            md.push_str("| ALP run | plain run | class | ALP length | plain length | change |\n");
            md.push_str("|---|---|---|---|---|---|\n");
            for r in reductions {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {:.1} | {:.1} | {:+.1}% |",
                    r.alp_run, r.plain_run, r.class, r.alp_expected_length, r.plain_expected_length, r.reduction_pct
                );
            }
        }
    }
    md
}

/// Files written by [`write_report`], relative to the output directory.
pub fn write_report(runs: &[LoadedRun], out: &Path) -> Result<Vec<PathBuf>> {
    if runs.is_empty() {
        return Err(CliError::usage("report needs at least one run log"));
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::new();
    let mut emit = |rel: PathBuf, write: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        write(&out.join(&rel))?;
        written.push(rel);
        Ok(())
    };
    for (run, dir) in runs.iter().zip(run_dirs(runs)) {
        let d = out.join(&dir);
        std::fs::create_dir_all(&d).map_err(|e| CliError::io(&d, e))?;
        let dir = PathBuf::from(dir);
        emit(dir.join("summary.csv"), &|p| write_csv_file(p, &summary_rows(run)))?;
        emit(dir.join("lengths.csv"), &|p| write_csv_file(p, &length_rows(run)))?;
        emit(dir.join("formats.csv"), &|p| write_csv_file(p, &format_rows(run)))?;
        emit(dir.join("trajectory.csv"), &|p| write_csv_file(p, &trajectory_rows(run)))?;
        emit(dir.join("format_trajectory.csv"), &|p| write_csv_file(p, &format_trajectory_rows(run)))?;
    }
    let reductions = token_reduction_rows(runs);
    if runs.len() > 1 {
        let all: Vec<SummaryRow> = runs.iter().flat_map(summary_rows).collect();
        emit("comparison.csv".into(), &|p| write_csv_file(p, &all))?;
        if !reductions.is_empty() {
            emit("token_reduction.csv".into(), &|p| write_csv_file(p, &reductions))?;
        }
    }
    let md = render_markdown(runs, &reductions);
    emit("report.md".into(), &|p| std::fs::write(p, &md).map_err(|e| CliError::io(p, e)))?;
    Ok(written)
}
