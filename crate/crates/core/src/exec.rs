//! Running code rollouts in an external interpreter.
//!
//! A code response's function is written, together with a small driver, to
//! `driver.py` inside a fresh temporary directory. The interpreter runs with
//! that directory as its working directory and a cleared environment. The
//! driver evaluates the call line, unwraps an `answer` key when the result is
//! a mapping, and prints the value. The last non-empty line of stdout is the
//! answer; stderr carries diagnostics; exit status 0 means success.
//!
//! This is process isolation plus a timeout and output cap, not a security
//! sandbox. Namespaces, seccomp and resource limits are a deployment concern.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::format::ReasoningFormat;
use crate::grammar::{extract_code, ParsedResponse};

/// Environment variable naming the interpreter executable.
pub const INTERPRETER_ENV: &str = "ARM_ALP_INTERPRETER";
pub const DEFAULT_INTERPRETER: &str = "python3";
pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecLimits {
    pub timeout_s: f64,
    pub max_output_bytes: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits { timeout_s: 5.0, max_output_bytes: 64 * 1024 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Success,
    RuntimeError,
    Timeout,
    NonZeroExit,
    LaunchFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub status: ExecStatus,
    pub stdout: String,
    pub stderr: String,
    /// Present exactly when `status` is `Success`.
    pub extracted_answer: Option<String>,
    pub wall_time: f64,
    /// Set when stdout or stderr hit the output cap.
    pub truncated: bool,
}

impl ExecOutcome {
    fn failed(status: ExecStatus, stderr: String, wall_time: f64) -> Self {
        ExecOutcome { status, stdout: String::new(), stderr, extracted_answer: None, wall_time, truncated: false }
    }
}

/// Interpreter named by `ARM_ALP_INTERPRETER`, else `python3`.
pub fn interpreter_from_env() -> String {
    std::env::var(INTERPRETER_ENV)
        .ok()
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| DEFAULT_INTERPRETER.to_string())
}

/// Render `s` as a single-quoted Python string literal.
fn python_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => out.push_str(&format!("\\x{:02x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// The full program handed to the interpreter.
pub fn driver_program(function_source: &str, call_line: &str) -> String {
    format!(
        "{function_source}\n\n\
         def __arm_alp_main():\n    \
             value = eval(compile({call}, '<call>', 'eval'), globals())\n    \
             if isinstance(value, dict) and 'answer' in value:\n        \
                 value = value['answer']\n    \
             print(value)\n\n\
         __arm_alp_main()\n",
        call = python_literal(call_line)
    )
}

fn spawn_reader<R: Read + Send + 'static>(mut pipe: R, cap: usize) -> thread::JoinHandle<(Vec<u8>, bool)> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut truncated = false;
        let mut buf = [0u8; 8192];
        loop {
            match pipe.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    if n > room {
                        truncated = true;
                    }
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        (kept, truncated)
    })
}

fn last_line(stdout: &str) -> String {
    stdout.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("").trim().to_string()
}

#[derive(Debug, Clone)]
pub struct Executor {
    interpreter: PathBuf,
    limits: ExecLimits,
}

impl Default for Executor {
    fn default() -> Self {
        Executor::from_env(ExecLimits::default())
    }
}

impl Executor {
    pub fn from_env(limits: ExecLimits) -> Self {
        Executor { interpreter: interpreter_from_env().into(), limits }
    }

    pub fn with_interpreter(interpreter: impl Into<PathBuf>, limits: ExecLimits) -> Self {
        Executor { interpreter: interpreter.into(), limits }
    }

    pub fn interpreter(&self) -> &std::path::Path {
        &self.interpreter
    }

    pub fn limits(&self) -> ExecLimits {
        self.limits
    }

    /// Define `function_source`, evaluate `call_line`, and classify the result.
    /// Every failure is reported through the returned status.
    pub fn execute(&self, function_source: &str, call_line: &str) -> ExecOutcome {
        let start = Instant::now();
        if function_source.trim().is_empty() || call_line.trim().is_empty() {
            return ExecOutcome::failed(ExecStatus::LaunchFailure, "empty function source or call line".into(), 0.0);
        }
        let dir = match tempfile::tempdir() {
            Ok(d) => d,
            Err(e) => return ExecOutcome::failed(ExecStatus::LaunchFailure, format!("temp dir: {e}"), 0.0),
        };
        let script = dir.path().join("driver.py");
        if let Err(e) = std::fs::write(&script, driver_program(function_source, call_line)) {
            return ExecOutcome::failed(ExecStatus::LaunchFailure, format!("write driver: {e}"), 0.0);
        }

        let mut cmd = Command::new(&self.interpreter);
        cmd.arg(&script)
            .current_dir(dir.path())
            .env_clear()
            .env("HOME", dir.path())
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PYTHONIOENCODING", "utf-8")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(path) = std::env::var_os("PATH") {
            cmd.env("PATH", path);
        }
        let mut child: Child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) => {
                return ExecOutcome::failed(
                    ExecStatus::LaunchFailure,
                    format!("failed to launch {}: {e}", self.interpreter.display()),
                    start.elapsed().as_secs_f64(),
                )
            }
        };

        let cap = self.limits.max_output_bytes;
        let out_reader = spawn_reader(child.stdout.take().expect("stdout piped"), cap);
        let err_reader = spawn_reader(child.stderr.take().expect("stderr piped"), cap);

        let timeout = Duration::from_secs_f64(self.limits.timeout_s.max(0.0));
        let waited = child.wait_timeout(timeout);
        let (exit, timed_out) = match waited {
            Ok(Some(status)) => (Some(status), false),
            Ok(None) | Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                (None, true)
            }
        };
        let wall_time = start.elapsed().as_secs_f64();
        let (out, out_trunc) = out_reader.join().unwrap_or_default();
        let (err, err_trunc) = err_reader.join().unwrap_or_default();
        let stdout = String::from_utf8_lossy(&out).into_owned();
        let stderr = String::from_utf8_lossy(&err).into_owned();

        let status = match exit {
            _ if timed_out => ExecStatus::Timeout,
            Some(s) if s.success() => ExecStatus::Success,
            _ if stderr.contains("Traceback (most recent call last)") || stderr.contains("Error:") => {
                ExecStatus::RuntimeError
            }
            _ => ExecStatus::NonZeroExit,
        };
        let extracted_answer = (status == ExecStatus::Success).then(|| last_line(&stdout));
        ExecOutcome { status, stdout, stderr, extracted_answer, wall_time, truncated: out_trunc || err_trunc }
    }

    /// Run independent jobs on up to `workers` threads; results keep job order.
    pub fn execute_many(&self, jobs: &[(String, String)], workers: usize) -> Vec<ExecOutcome> {
        pool_map(jobs, workers, |(src, call)| self.execute(src, call))
    }

    /// [`Executor::resolve`] over many responses on the worker pool.
    pub fn resolve_many(&self, parsed: &[ParsedResponse], workers: usize) -> Vec<Resolution> {
        pool_map(parsed, workers, |p| self.resolve(p))
    }

    /// Apply the code fallback rule to a parsed code response.
    pub fn resolve(&self, parsed: &ParsedResponse) -> Resolution {
        let (source, call) = match extract_code(parsed) {
            Ok(pair) => pair,
            Err(_) => {
                return Resolution { format: ReasoningFormat::CodeText, answer: parsed.answer.clone(), outcome: None }
            }
        };
        let outcome = self.execute(&source, &call);
        match &outcome.extracted_answer {
            Some(answer) if outcome.status == ExecStatus::Success => {
                Resolution { format: ReasoningFormat::CodeExec, answer: answer.clone(), outcome: Some(outcome) }
            }
            _ => {
                Resolution { format: ReasoningFormat::CodeText, answer: parsed.answer.clone(), outcome: Some(outcome) }
            }
        }
    }
}

/// Map `f` over `items` on up to `workers` scoped threads, preserving order.
fn pool_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let mut done: Vec<(usize, R)> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers.clamp(1, items.len().max(1)))
            .map(|_| {
                scope.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        mine.push((i, f(item)));
                    }
                    mine
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("exec worker panicked")).collect()
    });
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, r)| r).collect()
}

/// Final format and answer of a code rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub format: ReasoningFormat,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<ExecOutcome>,
}

/// Run with the interpreter from the environment.
pub fn execute(function_source: &str, call_line: &str, limits: ExecLimits) -> ExecOutcome {
    Executor::from_env(limits).execute(function_source, call_line)
}

/// Executable code yields `CodeExec` with the interpreter's answer; any
/// failure, including a missing call line, falls back to `CodeText` with the
/// model's own answer.
pub fn resolve_code_rollout(parsed: &ParsedResponse, limits: ExecLimits) -> Resolution {
    Executor::from_env(limits).resolve(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_escaping() {
        assert_eq!(python_literal("f('a')\n"), r"'f(\'a\')\n'");
        assert_eq!(python_literal("a\\b\x01"), r"'a\\b\x01'");
    }

    #[test]
    fn driver_embeds_call() {
        let d = driver_program("def f():\n    return 1", "f()");
        assert!(d.starts_with("def f():\n    return 1\n"));
        assert!(d.contains("compile('f()', '<call>', 'eval')"));
    }

    #[test]
    fn last_nonempty_line() {
        assert_eq!(last_line("a\nb\n\n  \n"), "b");
        assert_eq!(last_line(""), "");
    }

    #[test]
    fn missing_interpreter_is_launch_failure() {
        let ex = Executor::with_interpreter("/nonexistent/interpreter-xyz", ExecLimits::default());
        let out = ex.execute("def f():\n    return 1", "f()");
        assert_eq!(out.status, ExecStatus::LaunchFailure);
        assert!(out.extracted_answer.is_none());
    }

    #[test]
    fn empty_inputs_are_launch_failures() {
        let ex = Executor::with_interpreter("python3", ExecLimits::default());
        assert_eq!(ex.execute("", "f()").status, ExecStatus::LaunchFailure);
        assert_eq!(ex.execute("x = 1", " ").status, ExecStatus::LaunchFailure);
    }
}
