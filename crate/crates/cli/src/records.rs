//! On-disk run log (`run.jsonl`) and summary table (`summary.csv`).
//!
//! A run log is one JSON object per line, discriminated by `record`:
//! a `header` with the resolved configuration, one `step` per policy
//! snapshot (step 0 is the initial policy), and a closing `summary`.

use std::io::{BufRead, Write};
use std::path::Path;

use arm_alp::sim::{PolicyState, RunLog, RunSummary, StepRecord};
use arm_alp::ReasoningFormat;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum RunRecord {
    Header { schema_version: u32, run_id: String, rng: String, config: SimConfig },
    Step(StepRecord),
    Summary { summary: RunSummary, final_policy: PolicyState },
}

/// A run log read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRun {
    pub run_id: String,
    pub rng: String,
    pub config: SimConfig,
    pub steps: Vec<StepRecord>,
    pub summary: RunSummary,
    pub final_policy: PolicyState,
}

impl LoadedRun {
    pub fn from_log(log: &RunLog) -> Self {
        LoadedRun {
            run_id: log.run_id.clone(),
            rng: log.rng.clone(),
            config: SimConfig::from_scenario(&log.config.scenario, &log.config.training),
            steps: log.steps.clone(),
            summary: log.summary.clone(),
            final_policy: log.final_policy.clone(),
        }
    }

    pub fn records(&self) -> Vec<RunRecord> {
        let mut out = Vec::with_capacity(self.steps.len() + 2);
        out.push(RunRecord::Header {
            schema_version: SCHEMA_VERSION,
            run_id: self.run_id.clone(),
            rng: self.rng.clone(),
            config: self.config.clone(),
        });
        out.extend(self.steps.iter().cloned().map(RunRecord::Step));
        out.push(RunRecord::Summary { summary: self.summary.clone(), final_policy: self.final_policy.clone() });
        out
    }

    pub fn write_jsonl(&self, w: &mut impl Write) -> std::io::Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Read a run log; `name` labels diagnostics. Structural problems are
    /// usage errors (exit 2), read failures are I/O errors.
    pub fn read_jsonl(r: impl BufRead, name: &str) -> Result<Self> {
        let bad = |line: usize, msg: &dyn std::fmt::Display| CliError::usage(format!("{name}:{line}: {msg}"));
        let mut header = None;
        let mut steps = Vec::new();
        let mut summary = None;
        let mut last_line = 0;
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| CliError::Io(format!("{name}: {e}")))?;
            last_line = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if summary.is_some() {
                return Err(bad(i + 1, &"record after summary"));
            }
            let rec: RunRecord = serde_json::from_str(&line).map_err(|e| bad(i + 1, &e))?;
            match rec {
                RunRecord::Header { schema_version, run_id, rng, config } => {
                    if header.is_some() {
                        return Err(bad(i + 1, &"duplicate header"));
                    }
                    if schema_version != SCHEMA_VERSION {
                        return Err(bad(
                            i + 1,
                            &format!("schema_version {schema_version} is not supported (expected {SCHEMA_VERSION})"),
                        ));
                    }
                    header = Some((run_id, rng, config));
                }
                RunRecord::Step(step) => {
                    if header.is_none() {
                        return Err(bad(i + 1, &"step before header"));
                    }
                    if step.step != steps.len() as u64 {
                        return Err(bad(i + 1, &format!("expected step {}, found {}", steps.len(), step.step)));
                    }
                    steps.push(step);
                }
                RunRecord::Summary { summary: s, final_policy } => {
                    if header.is_none() {
                        return Err(bad(i + 1, &"summary before header"));
                    }
                    summary = Some((s, final_policy));
                }
            }
        }
        let (run_id, rng, config) = header.ok_or_else(|| bad(last_line.max(1), &"missing header record"))?;
        let (summary, final_policy) = summary.ok_or_else(|| bad(last_line.max(1), &"missing summary record"))?;
        Ok(LoadedRun { run_id, rng, config, steps, summary, final_policy })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file), &path.display().to_string())
    }
}

/// One row of `summary.csv`. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub mode: String,
    pub seed: u64,
    pub lambda: f64,
    pub steps: u64,
    pub class: String,
    pub weight: f64,
    pub expected_accuracy: f64,
    pub expected_length: f64,
    pub entropy: Option<f64>,
    pub eval_accuracy: f64,
    pub eval_mean_length: f64,
    pub p_direct_answer: Option<f64>,
    pub p_short_cot: Option<f64>,
    pub p_code_text: Option<f64>,
    pub p_code_exec: Option<f64>,
    pub p_long_cot: Option<f64>,
}

/// Name of the aggregate row in per-class tables.
pub const OVERALL: &str = "overall";

pub fn summary_rows(run: &LoadedRun) -> Vec<SummaryRow> {
    let cfg = &run.config;
    let row = |class: &str, weight: f64| SummaryRow {
        run_id: run.run_id.clone(),
        mode: cfg.mode.to_string(),
        seed: cfg.seed,
        lambda: cfg.lambda,
        steps: run.summary.training_steps,
        class: class.to_string(),
        weight,
        expected_accuracy: 0.0,
        expected_length: 0.0,
        entropy: None,
        eval_accuracy: 0.0,
        eval_mean_length: 0.0,
        p_direct_answer: None,
        p_short_cot: None,
        p_code_text: None,
        p_code_exec: None,
        p_long_cot: None,
    };
    let mut rows = Vec::new();
    let mut overall = row(OVERALL, 1.0);
    overall.expected_accuracy = run.summary.expected_accuracy;
    overall.expected_length = run.summary.expected_length;
    for (c, tc) in run.summary.classes.iter().zip(&cfg.task_classes) {
        let p = |f| c.distribution.get(&f).copied();
        let mut r = row(&c.class, tc.weight);
        r.expected_accuracy = c.expected_accuracy;
        r.expected_length = c.expected_length;
        r.entropy = Some(c.entropy);
        r.eval_accuracy = c.eval.accuracy;
        r.eval_mean_length = c.eval.mean_length;
        r.p_direct_answer = p(ReasoningFormat::DirectAnswer);
        r.p_short_cot = p(ReasoningFormat::ShortCot);
        r.p_code_text = p(ReasoningFormat::CodeText);
        r.p_code_exec = p(ReasoningFormat::CodeExec);
        r.p_long_cot = p(ReasoningFormat::LongCot);
        overall.eval_accuracy += tc.weight * c.eval.accuracy;
        overall.eval_mean_length += tc.weight * c.eval.mean_length;
        rows.push(r);
    }
    rows.push(overall);
    rows
}

pub fn write_csv<T: Serialize>(w: impl Write, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), rows).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use arm_alp::sim::{run_training, ScenarioSpec, TrainingConfig, TrainingMode};

    fn small_run() -> LoadedRun {
        let spec = ScenarioSpec { steps: 4, ..ScenarioSpec::collapse_benchmark() };
        LoadedRun::from_log(&run_training(&spec, &TrainingConfig::new(TrainingMode::Alp)))
    }

    #[test]
    fn jsonl_round_trips() {
        let run = small_run();
        let mut buf = Vec::new();
        run.write_jsonl(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), run.steps.len() + 2);
        let back = LoadedRun::read_jsonl(&buf[..], "mem").unwrap();
        assert_eq!(back, run);
    }

    #[test]
    fn schema_errors_are_usage_errors() {
        let run = small_run();
        let mut buf = Vec::new();
        run.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let no_header: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        let err = LoadedRun::read_jsonl(no_header.as_bytes(), "mem").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("mem:1"), "{err}");

        let bumped = text.replacen("\"schema_version\":1", "\"schema_version\":99", 1);
        assert!(LoadedRun::read_jsonl(bumped.as_bytes(), "mem").unwrap_err().to_string().contains("schema_version"));

        let garbage = format!("{text}{{\"record\":\"bogus\"}}\n");
        assert_eq!(LoadedRun::read_jsonl(garbage.as_bytes(), "mem").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn summary_has_one_row_per_class_plus_overall() {
        let rows = summary_rows(&small_run());
        let classes: Vec<_> = rows.iter().map(|r| r.class.as_str()).collect();
        assert_eq!(classes, ["easy", "medium", "hard", OVERALL]);
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let header = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        assert!(header.starts_with("run_id,mode,seed,lambda,steps,class,weight,expected_accuracy"));
    }
}
