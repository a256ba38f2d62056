//! Stopping a run part way and resuming it from its checkpoint gives the same
//! event log as running straight through.

use std::path::Path;

use codevolve::config::{BackendKind, RunConfig};
use codevolve::engine::{load_run_config, Engine, RunOptions};
use codevolve::llm::replay::write_transcript;
use codevolve::problems::ProblemId;
use codevolve::sandbox::CandidateLanguage;
use codevolve::scripted::{calls_needed, scripted_transcript, ScriptOptions};

fn prepare(dir: &Path) -> Result<RunConfig, Box<dyn std::error::Error>> {
    let mut c = RunConfig::new(ProblemId::P1);
    c.num_islands = 2;
    c.epochs = Some(10);
    c.sandbox.language = CandidateLanguage::Shell;
    c.llm.backend = BackendKind::Replay;
    c.llm.transcript = Some("transcript.jsonl".into());
    let t = scripted_transcript(
        c.problem,
        c.sandbox.language,
        calls_needed(c.init_population, 10),
        4,
        &ScriptOptions::default(),
    );
    write_transcript(&dir.join("transcript.jsonl"), &t)?;
    Ok(c)
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let (straight, split) = (tempfile::tempdir()?, tempfile::tempdir()?);

    Engine::new(prepare(straight.path())?, straight.path())?.run(RunOptions::default())?;

    let partial = Engine::new(prepare(split.path())?, split.path())?.run(RunOptions { stop_after: Some(4) })?;
    println!("stopped after epoch {} of {}", partial.epochs_completed, partial.total_epochs);
    let config = load_run_config(split.path())?;
    let done = Engine::new(config, split.path())?.resume(RunOptions::default())?;
    println!("resumed to epoch {}, finished = {}", done.epochs_completed, done.finished);

    let a = std::fs::read(straight.path().join("events.jsonl"))?;
    let b = std::fs::read(split.path().join("events.jsonl"))?;
    println!("event logs identical: {} ({} bytes)", a == b, a.len());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
