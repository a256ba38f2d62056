//! Executes a generated program and turns the result into a finalized solution.

use crate::population::{Solution, SolutionStatus};
use crate::problems::{self, ProblemId, ScoreOptions, ScoreReport};
use crate::sandbox::{ExecStatus, ExecutionOutcome, ResourceLimits, Sandbox};

const FEEDBACK_TAIL: usize = 2000;

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub solution: Solution,
    /// Full log text stored next to the solution.
    pub log: String,
    pub artifact: Option<Vec<u8>>,
    pub report: Option<ScoreReport>,
}

fn tail(text: &str, max: usize) -> &str {
    if text.len() <= max {
        return text;
    }
    let mut start = text.len() - max;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    &text[start..]
}

/// Condensed, reproducible feedback for later prompts. Wall-clock times are
/// left out so replayed runs see identical requests.
fn feedback(
    status: SolutionStatus,
    exec: &ExecutionOutcome,
    report: Option<&ScoreReport>,
    note: Option<&str>,
) -> String {
    let mut s = format!("status: {status}\n");
    if let Some(r) = report {
        if let Some(o) = r.objective {
            s.push_str(&format!("objective: {o}\n"));
        }
        s.push_str(&format!("fitness: {}\n", r.fitness));
        if !r.violations.is_empty() {
            let v: Vec<String> = r.violations.iter().map(|(k, m)| format!("{k}={m:e}")).collect();
            s.push_str(&format!("violations: {}\n", v.join(", ")));
        }
        if let Some(m) = &r.message {
            s.push_str(&format!("message: {m}\n"));
        }
    }
    if let Some(n) = note {
        s.push_str(n);
        s.push('\n');
    }
    for (name, stream) in [("stdout", &exec.stdout), ("stderr", &exec.stderr)] {
        let t = tail(&stream.text, FEEDBACK_TAIL).trim_end();
        if !t.is_empty() {
            s.push_str(&format!("{name} (tail):\n{t}\n"));
        }
    }
    s
}

fn record_report(solution: &mut Solution, report: &ScoreReport) {
    for (k, v) in &report.metrics {
        if v.is_finite() {
            solution.metrics.insert(k.clone(), *v);
        }
    }
    for (k, v) in &report.violations {
        if v.is_finite() {
            solution.metrics.insert(format!("violation.{k}"), *v);
        }
    }
    match report.objective.filter(|o| o.is_finite()) {
        Some(o) => {
            solution.metrics.insert("objective".into(), o);
        }
        None => {
            solution.metrics.remove("objective");
        }
    }
}

/// Runs `solution.code` and scores its artifact. Every failure path yields a
/// zero-fitness solution with logs attached; nothing here is fatal.
pub fn evaluate_candidate(
    problem: ProblemId,
    mut solution: Solution,
    sandbox: &Sandbox,
    limits: &ResourceLimits,
    options: &ScoreOptions,
) -> Evaluation {
    if solution.status == SolutionStatus::GenerationFailed {
        let log = solution.feedback.clone();
        return Evaluation { solution, log, artifact: None, report: None };
    }
    let exec = sandbox.run(&solution.code, limits);
    let mut log = exec.log_text();
    let (status, fitness, report, note) = match exec.status {
        ExecStatus::Ok => match exec.artifact.as_deref() {
            None => (SolutionStatus::InvalidArtifact, 0.0, None, exec.detail.clone()),
            Some(raw) => match problems::parse_artifact(problem, raw) {
                Err(e) => (SolutionStatus::InvalidArtifact, 0.0, None, Some(format!("artifact rejected: {e}"))),
                Ok(artifact) => {
                    let r = problems::score(problem, &artifact, options);
                    let status = if r.valid { SolutionStatus::Valid } else { SolutionStatus::InvalidConstruction };
                    (status, r.fitness, Some(r), None)
                }
            },
        },
        ExecStatus::NonzeroExit => (SolutionStatus::RuntimeError, 0.0, None, exec.detail.clone()),
        ExecStatus::SpawnError => (SolutionStatus::RuntimeError, 0.0, None, exec.detail.clone()),
        ExecStatus::Timeout => (SolutionStatus::Timeout, 0.0, None, exec.detail.clone()),
        ExecStatus::MemoryExceeded => (SolutionStatus::MemoryExceeded, 0.0, None, exec.detail.clone()),
    };
    if let Some(r) = &report {
        record_report(&mut solution, r);
        log.push_str(&format!("--- score ---\n{}\n", serde_json::to_string_pretty(r).expect("report serializes")));
    } else if let Some(n) = &note {
        log.push_str(&format!("--- evaluation ---\n{n}\n"));
    }
    solution.finalize(status, fitness);
    solution.feedback = feedback(status, &exec, report.as_ref(), note.as_deref());
    Evaluation { solution, log, artifact: exec.artifact, report }
}
