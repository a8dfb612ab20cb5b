//! Command-line front end for `arm-alp`.
//!
//! Exit codes: 0 on success, 2 for usage or validation errors (bad flags,
//! invalid configuration, unparseable input), 3 for I/O failures.

pub mod config;
pub mod error;
pub mod records;
pub mod report;

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use arm_alp::exec::{interpreter_from_env, ExecLimits, Executor, Resolution, DEFAULT_WORKERS};
use arm_alp::grammar::{parse_response, ParsedResponse};
use arm_alp::judge::{judge_answer, majority_vote, GoldAnswer, VoteOutcome, VoteSample};
use arm_alp::reward::{shape_group, DecayMode, PenaltyParams, RewardTrace, Rollout, RolloutGroup, Schedule};
use arm_alp::sim::{lambda_sweep, run_training, TrainingMode};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use config::{Overrides, SimConfig};
use error::{CliError, Result};
use records::{summary_rows, write_csv, write_csv_file, LoadedRun, OVERALL};

#[derive(Debug, Parser)]
#[command(name = "arm-alp", version, about = "Adaptive reasoning-format training simulator and tooling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    PlainGrpo,
    Alp,
}

impl From<ModeArg> for TrainingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PlainGrpo => TrainingMode::PlainGrpo,
            ModeArg::Alp => TrainingMode::Alp,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DecayArg {
    Factor,
    Literal,
}

impl From<DecayArg> for DecayMode {
    fn from(d: DecayArg) -> Self {
        match d {
            DecayArg::Factor => DecayMode::Factor,
            DecayArg::Literal => DecayMode::Literal,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct OverrideArgs {
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub clip_ratio: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

impl OverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            steps: self.steps,
            seed: self.seed,
            mode: self.mode.map(Into::into),
            lambda: self.lambda,
            clip_ratio: self.clip_ratio,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a format policy; writes run.jsonl and summary.csv.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Shape rewards for JSON-lines rollout groups on stdin.
    #[command(allow_negative_numbers = true)]
    Shape {
        #[arg(long, default_value_t = PenaltyParams::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = PenaltyParams::DEFAULT_EPSILON)]
        epsilon: f64,
        /// Current training step.
        #[arg(long, default_value_t = 0)]
        t: u64,
        /// Total training steps.
        #[arg(long, default_value_t = 1)]
        total_steps: u64,
        #[arg(long, default_value_t = Schedule::DEFAULT_BASELINE)]
        baseline: f64,
        #[arg(long, value_enum, default_value = "factor")]
        mode: DecayArg,
    },
    /// Parse a tagged response (file or stdin) and print it as JSON.
    Parse {
        path: Option<PathBuf>,
        /// Print the canonical tagged form instead of JSON.
        #[arg(long)]
        tagged: bool,
    },
    /// Execute code responses and apply the fallback rule.
    Exec {
        /// Tagged response files; stdin when empty.
        paths: Vec<PathBuf>,
        #[arg(long, default_value_t = ExecLimits::default().timeout_s)]
        timeout: f64,
        #[arg(long, default_value_t = ExecLimits::default().max_output_bytes)]
        max_output_bytes: usize,
        #[arg(long, default_value_t = DEFAULT_WORKERS)]
        workers: usize,
    },
    /// Majority vote over JSON-lines `{answer, tokens}` samples on stdin.
    Vote {
        #[arg(long, default_value_t = u64::MAX)]
        budget: u64,
        /// Also judge the winner against this gold answer.
        #[arg(long)]
        gold: Option<String>,
        /// Treat the gold answer as a multiple-choice letter.
        #[arg(long, requires = "gold")]
        multiple_choice: bool,
    },
    /// Build CSV tables and a markdown summary from run logs.
    Report {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train once per length-penalty strength and tabulate final lengths.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1.0")]
        lambdas: Vec<f64>,
        /// Directory for sweep.csv; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, stdin, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Simulate { config, out, overrides } => {
            let run = simulate(&config, &overrides.overrides(), &out)?;
            writeln!(stdout, "{} -> {}", run.run_id, out.display())?;
            Ok(())
        }
        Command::Shape { lambda, epsilon, t, total_steps, baseline, mode } => {
            let penalty = PenaltyParams::new(lambda, epsilon).map_err(|e| CliError::usage(e.to_string()))?;
            let sched = Schedule::new(t, total_steps, baseline).map_err(|e| CliError::usage(e.to_string()))?;
            shape_stream(stdin, stdout, &penalty, &sched, mode.into())
        }
        Command::Parse { path, tagged } => {
            let parsed = parse_response(&read_input(path.as_deref(), stdin)?);
            if tagged {
                stdout.write_all(parsed.to_tagged().as_bytes())?;
            } else {
                writeln!(stdout, "{}", to_json(&parsed))?;
            }
            Ok(())
        }
        Command::Exec { paths, timeout, max_output_bytes, workers } => {
            if !(timeout > 0.0 && timeout.is_finite()) {
                return Err(CliError::usage(format!("--timeout must be positive, got {timeout}")));
            }
            let limits = ExecLimits { timeout_s: timeout, max_output_bytes };
            let inputs: Vec<(String, String)> = if paths.is_empty() {
                vec![("-".into(), read_input(None, stdin)?)]
            } else {
                paths
                    .iter()
                    .map(|p| Ok((p.display().to_string(), read_input(Some(p), stdin)?)))
                    .collect::<Result<_>>()?
            };
            for line in exec_responses(&inputs, limits, workers)? {
                writeln!(stdout, "{line}")?;
            }
            Ok(())
        }
        Command::Vote { budget, gold, multiple_choice } => {
            let gold = match gold {
                Some(g) if multiple_choice => {
                    Some(GoldAnswer::multiple_choice(&g).map_err(|e| CliError::usage(e.to_string()))?)
                }
                Some(g) => Some(GoldAnswer::free_form(g)),
                None => None,
            };
            let report = vote_stream(stdin, budget, gold.as_ref())?;
            writeln!(stdout, "{}", to_json(&report))?;
            Ok(())
        }
        Command::Report { logs, out } => {
            let runs = logs.iter().map(|p| LoadedRun::load(p)).collect::<Result<Vec<_>>>()?;
            for rel in report::write_report(&runs, &out)? {
                writeln!(stdout, "{}", out.join(rel).display())?;
            }
            Ok(())
        }
        Command::Sweep { config, lambdas, out, overrides } => {
            let rows = sweep(&config, &overrides.overrides(), &lambdas)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                    let path = dir.join("sweep.csv");
                    write_csv_file(&path, &rows)?;
                    writeln!(stdout, "{}", path.display())?;
                }
                None => write_csv(&mut *stdout, &rows)?,
            }
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

fn read_input(path: Option<&Path>, stdin: &mut dyn BufRead) -> Result<String> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e)),
        _ => {
            let mut s = String::new();
            stdin.read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<SimConfig> {
    let mut cfg = SimConfig::load(path)?;
    cfg.apply(overrides);
    Ok(cfg)
}

/// Run one training job and persist `run.jsonl` and `summary.csv` in `out`.
pub fn simulate(config: &Path, overrides: &Overrides, out: &Path) -> Result<LoadedRun> {
    let cfg = load_config(config, overrides)?;
    let (spec, training) = cfg.resolve()?;
    let log = run_training(&spec, &training);
    let run = LoadedRun {
        run_id: log.run_id,
        rng: log.rng,
        config: cfg,
        steps: log.steps,
        summary: log.summary,
        final_policy: log.final_policy,
    };
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let jsonl = out.join("run.jsonl");
    let file = std::fs::File::create(&jsonl).map_err(|e| CliError::io(&jsonl, e))?;
    let mut w = std::io::BufWriter::new(file);
    run.write_jsonl(&mut w).and_then(|()| w.flush()).map_err(|e| CliError::io(&jsonl, e))?;
    write_csv_file(&out.join("summary.csv"), &summary_rows(&run))?;
    Ok(run)
}

/// Input line for `shape`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupInput {
    pub question_id: String,
    pub rollouts: Vec<Rollout>,
}

/// Output line for `shape`: the trace plus the group it came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapedLine {
    pub question_id: String,
    #[serde(flatten)]
    pub trace: RewardTrace,
}

/// Shape each group line; blank lines are skipped. Stops at the first bad
/// line with a diagnostic naming its 1-based line number.
pub fn shape_stream(
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    penalty: &PenaltyParams,
    sched: &Schedule,
    mode: DecayMode,
) -> Result<()> {
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| CliError::usage(format!("line {}: {msg}", i + 1));
        let g: GroupInput = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let group = RolloutGroup::new(g.question_id.clone(), g.rollouts).map_err(|e| bad(e.to_string()))?;
        for trace in shape_group(&group, penalty, sched, mode) {
            writeln!(out, "{}", to_json(&ShapedLine { question_id: g.question_id.clone(), trace }))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecLine {
    pub source: String,
    pub interpreter: String,
    #[serde(flatten)]
    pub resolution: Resolution,
}

/// Resolve code responses on the executor pool. Non-code responses are a
/// usage error since there is nothing to execute.
pub fn exec_responses(inputs: &[(String, String)], limits: ExecLimits, workers: usize) -> Result<Vec<String>> {
    let parsed: Vec<ParsedResponse> = inputs
        .iter()
        .map(|(name, text)| {
            let p = parse_response(text);
            if p.format.is_code() {
                Ok(p)
            } else {
                Err(CliError::usage(format!("{name}: not a code response (parsed as {})", p.format)))
            }
        })
        .collect::<Result<_>>()?;
    let executor = Executor::from_env(limits);
    let interpreter = interpreter_from_env();
    Ok(executor
        .resolve_many(&parsed, workers)
        .into_iter()
        .zip(inputs)
        .map(|(resolution, (name, _))| {
            to_json(&ExecLine { source: name.clone(), interpreter: interpreter.clone(), resolution })
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoteReport {
    #[serde(flatten)]
    pub outcome: VoteOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

pub fn vote_stream(input: &mut dyn BufRead, budget: u64, gold: Option<&GoldAnswer>) -> Result<VoteReport> {
    let mut samples = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: VoteSample = serde_json::from_str(&line).map_err(|e| CliError::usage(format!("line {}: {e}", i + 1)))?;
        samples.push(s);
    }
    let outcome = majority_vote(&samples, budget).map_err(|e| CliError::usage(e.to_string()))?;
    let correct = gold.map(|g| judge_answer(&outcome.winner, g));
    Ok(VoteReport { outcome, correct })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub lambda: f64,
    pub class: String,
    pub expected_length: f64,
    pub expected_accuracy: f64,
}

pub fn sweep(config: &Path, overrides: &Overrides, lambdas: &[f64]) -> Result<Vec<SweepCsvRow>> {
    if lambdas.is_empty() {
        return Err(CliError::usage("--lambdas needs at least one value"));
    }
    let mut cfg = load_config(config, overrides)?;
    // Validate every grid point, not only the file's own lambda.
    for &l in lambdas {
        cfg.lambda = l;
        cfg.resolve()?;
    }
    let (spec, training) = cfg.resolve()?;
    let report = lambda_sweep(&spec, lambdas, &training);
    Ok(report
        .rows
        .iter()
        .flat_map(|r| {
            r.classes
                .iter()
                .map(|c| SweepCsvRow {
                    lambda: r.lambda,
                    class: c.class.clone(),
                    expected_length: c.expected_length,
                    expected_accuracy: c.expected_accuracy,
                })
                .chain(std::iter::once(SweepCsvRow {
                    lambda: r.lambda,
                    class: OVERALL.to_string(),
                    expected_length: r.expected_length,
                    expected_accuracy: r.expected_accuracy,
                }))
        })
        .collect())
}
