mod common;

use arm_alp::exec::{execute, resolve_code_rollout, ExecLimits, ExecStatus, Executor};
use arm_alp::grammar::{extract_code, parse_response};
use arm_alp::ReasoningFormat;
use common::{appendix_variants, fixture, APPENDIX_ANSWER};

#[test]
fn appendix_variants_parse_to_their_formats() {
    for (name, format) in appendix_variants() {
        let parsed = parse_response(&fixture(name));
        assert_eq!(parsed.format, format, "{name}");
        assert_eq!(parsed.answer, APPENDIX_ANSWER, "{name}");
    }
}

#[test]
fn appendix_call_line() {
    let parsed = parse_response(&fixture("appendix/code.txt"));
    let (source, call) = extract_code(&parsed).unwrap();
    assert_eq!(call, "determine_heading_for_bullet_points()");
    assert!(source.starts_with("def determine_heading_for_bullet_points():"));
    assert!(parsed.observation.unwrap().contains("'answer': 'Project Objectives'"));
}

#[test]
fn appendix_function_executes() {
    let parsed = parse_response(&fixture("appendix/code.txt"));
    let (source, call) = extract_code(&parsed).unwrap();
    let out = execute(&source, &call, ExecLimits::default());
    assert_eq!(out.status, ExecStatus::Success, "stderr: {}", out.stderr);
    assert_eq!(out.extracted_answer.as_deref(), Some(APPENDIX_ANSWER));

    let resolved = resolve_code_rollout(&parsed, ExecLimits::default());
    assert_eq!((resolved.format, resolved.answer.as_str()), (ReasoningFormat::CodeExec, APPENDIX_ANSWER));
}

#[test]
fn division_by_zero_is_runtime_error() {
    let out = execute("def f():\n    return 1/0", "f()", ExecLimits::default());
    assert_eq!(out.status, ExecStatus::RuntimeError);
    assert!(out.extracted_answer.is_none());
    assert!(out.stderr.contains("ZeroDivisionError"));
}

#[test]
fn non_zero_exit_without_traceback() {
    let out = execute("import sys\ndef f():\n    sys.exit(3)", "f()", ExecLimits::default());
    assert_eq!(out.status, ExecStatus::NonZeroExit);
}

#[test]
fn infinite_loop_times_out() {
    let limits = ExecLimits { timeout_s: 1.0, ..ExecLimits::default() };
    let out = execute("def f():\n    while True:\n        pass", "f()", limits);
    assert_eq!(out.status, ExecStatus::Timeout);
    assert!(out.wall_time >= 1.0 && out.wall_time <= limits.timeout_s + 2.0, "{}", out.wall_time);
    assert!(out.extracted_answer.is_none());
}

#[test]
fn output_is_capped() {
    let limits = ExecLimits { max_output_bytes: 1024, ..ExecLimits::default() };
    let out = execute("def f():\n    print('x' * 100000)\n    return 1", "f()", limits);
    assert!(out.truncated);
    assert!(out.stdout.len() <= 1024);
}

#[test]
fn plain_values_print_whole() {
    let out = execute("def f():\n    return [1, 2]", "f()", ExecLimits::default());
    assert_eq!(out.extracted_answer.as_deref(), Some("[1, 2]"));
    let out = execute("def f():\n    return {'x': 1}", "f()", ExecLimits::default());
    assert_eq!(out.extracted_answer.as_deref(), Some("{'x': 1}"));
}

#[test]
fn interpreter_answer_wins() {
    let raw = "<CODE>\ndef f():\n    return {'answer': 'Implementation Plan'}\n>>> f()\n</CODE>\n<ANSWER>\nProject Objectives\n</ANSWER>";
    let resolved = resolve_code_rollout(&parse_response(raw), ExecLimits::default());
    assert_eq!(resolved.format, ReasoningFormat::CodeExec);
    assert_eq!(resolved.answer, "Implementation Plan");
}

#[test]
fn broken_code_falls_back_to_model_answer() {
    let raw = "<CODE>\ndef f(:\n    return 1\n>>> f()\n</CODE>\n<ANSWER>fallback</ANSWER>";
    let resolved = resolve_code_rollout(&parse_response(raw), ExecLimits::default());
    assert_eq!((resolved.format, resolved.answer.as_str()), (ReasoningFormat::CodeText, "fallback"));

    let no_call = "<CODE>\ndef f():\n    return 1\n</CODE>\n<ANSWER>fallback</ANSWER>";
    let resolved = resolve_code_rollout(&parse_response(no_call), ExecLimits::default());
    assert_eq!((resolved.format, resolved.answer.as_str()), (ReasoningFormat::CodeText, "fallback"));
    assert!(resolved.outcome.is_none());
}

#[test]
fn runs_in_a_fresh_directory() {
    let src = "import os\ndef f():\n    open('marker.txt', 'w').write('x')\n    return os.getcwd()";
    let first = execute(src, "f()", ExecLimits::default());
    let second = execute(src, "f()", ExecLimits::default());
    let (a, b) = (first.extracted_answer.unwrap(), second.extracted_answer.unwrap());
    assert_ne!(a, b);
    assert!(!std::path::Path::new(&a).exists());
    assert_ne!(std::env::current_dir().unwrap().to_string_lossy(), a);
}

#[test]
fn classification_is_deterministic_and_pool_preserves_order() {
    let jobs: Vec<(String, String)> = vec![
        ("def f():\n    return 1/0".into(), "f()".into()),
        ("def f():\n    return {'answer': 7}".into(), "f()".into()),
        ("def f(x):\n    return x * 2".into(), "f(21)".into()),
        ("def f():\n    return 1/0".into(), "f()".into()),
        ("def f():\n    return 'z'".into(), "f()".into()),
    ];
    let exec = Executor::from_env(ExecLimits::default());
    let outs = exec.execute_many(&jobs, 3);
    let statuses: Vec<_> = outs.iter().map(|o| o.status).collect();
    assert_eq!(
        statuses,
        [
            ExecStatus::RuntimeError,
            ExecStatus::Success,
            ExecStatus::Success,
            ExecStatus::RuntimeError,
            ExecStatus::Success
        ]
    );
    let answers: Vec<_> = outs.iter().map(|o| o.extracted_answer.clone()).collect();
    assert_eq!(answers, [None, Some("7".into()), Some("42".into()), None, Some("z".into())]);
}

#[test]
fn missing_interpreter_never_panics() {
    let exec = Executor::with_interpreter("/nonexistent/python", ExecLimits::default());
    let out = exec.execute("def f():\n    return 1", "f()");
    assert_eq!(out.status, ExecStatus::LaunchFailure);
}
