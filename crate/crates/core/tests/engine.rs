use std::path::Path;
use std::sync::Arc;

use codevolve::config::{AblationPreset, BackendKind, RunConfig};
use codevolve::engine::{read_events, Engine, EngineError, Event, RunOptions};
use codevolve::llm::replay::write_transcript;
use codevolve::llm::{ChatCall, ReplayBackend, TransportError};
use codevolve::population::SolutionStatus;
use codevolve::problems::{artifact_program, ProblemId};
use codevolve::sandbox::CandidateLanguage;
use codevolve::scripted::{calls_needed, scripted_transcript, ScriptOptions};

fn replay_config(problem: ProblemId, islands: usize, epochs: u64) -> RunConfig {
    let mut c = RunConfig::new(problem);
    c.num_islands = islands;
    c.epochs = Some(epochs);
    c.master_seed = 11;
    c.sandbox.language = CandidateLanguage::Shell;
    c.llm.backend = BackendKind::Replay;
    c.llm.transcript = Some("transcript.jsonl".into());
    c
}

fn write_script(dir: &Path, c: &RunConfig, options: &ScriptOptions) {
    let calls = calls_needed(c.init_population, c.total_epochs());
    let t = scripted_transcript(c.problem, c.sandbox.language, calls, 3, options);
    write_transcript(&dir.join("transcript.jsonl"), &t).unwrap();
}

fn solution_events(events: &[Event]) -> impl Iterator<Item = &codevolve::engine::SolutionEvent> {
    events.iter().filter_map(|e| match e {
        Event::Solution(s) => Some(s),
        _ => None,
    })
}

#[test]
fn improving_single_island_run_has_monotone_best() {
    // each call returns a strictly larger packing than the last
    let backend = |c: &ChatCall<'_>| -> Result<String, TransportError> {
        let r = 0.02 + 0.0005 * c.index as f64;
        let circles: Vec<[f64; 3]> =
            (0..26).map(|k| [(k % 6) as f64 / 6.0 + 1.0 / 12.0, (k / 6) as f64 / 6.0 + 1.0 / 12.0, r]).collect();
        let art = serde_json::json!({ "circles": circles }).to_string();
        Ok(format!("```sh\n{}```\n", artifact_program(&art, CandidateLanguage::Shell)))
    };
    let dir = tempfile::tempdir().unwrap();
    let c = replay_config(ProblemId::P3A, 1, 10);
    let engine = Engine::with_backend(c, dir.path(), Arc::new(backend));
    let summary = engine.run(RunOptions::default()).unwrap();
    assert!(summary.finished);
    assert_eq!(summary.global_best.len(), 11);
    assert!(summary.global_best.windows(2).all(|w| w[1] >= w[0]));
    assert!(summary.global_best[10] > summary.global_best[0]);
    let best = summary.best.unwrap();
    assert!(dir.path().join("best/artifact.json").exists());
    assert!((best.delta_vs_reference.unwrap() - (best.objective.unwrap() - 2.63596)).abs() < 1e-12);
}

#[test]
fn no_evolution_ablation_only_makes_roots() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = replay_config(ProblemId::P1, 2, 45);
    c.apply_preset(AblationPreset::NoEvolution);
    c.max_population = 10;
    write_script(dir.path(), &c, &ScriptOptions::default());
    let summary = Engine::new(c, dir.path()).unwrap().run(RunOptions::default()).unwrap();
    assert_eq!(summary.migrations, 0);
    let events = read_events(dir.path()).unwrap();
    assert!(events.iter().all(|e| !matches!(e, Event::Migration(_))));
    assert!(solution_events(&events).all(|s| s.parent.is_none() && s.inspirations.is_empty()));
    let state = Engine::new(load(dir.path()), dir.path()).unwrap().run_dir().load_checkpoint().unwrap();
    for isl in &state.islands {
        assert!(isl.solutions.len() <= 10);
        assert!(isl.solutions.iter().all(|s| s.parent_id.is_none()));
    }
}

fn load(dir: &Path) -> RunConfig {
    codevolve::engine::load_run_config(dir).unwrap()
}

#[test]
fn failures_are_recorded_with_zero_fitness() {
    let dir = tempfile::tempdir().unwrap();
    let c = replay_config(ProblemId::P2A, 1, 30);
    write_script(dir.path(), &c, &ScriptOptions::default());
    let summary = Engine::new(c, dir.path()).unwrap().run(RunOptions::default()).unwrap();
    assert!(summary.status_counts.get("generation_failed").copied().unwrap_or(0) > 0);
    assert!(summary.status_counts.get("invalid_construction").copied().unwrap_or(0) > 0);
    let events = read_events(dir.path()).unwrap();
    for s in solution_events(&events) {
        if s.status != SolutionStatus::Valid {
            assert_eq!(s.fitness, 0.0);
        }
        if s.status == SolutionStatus::GenerationFailed {
            assert_eq!(s.insert, "skipped");
            assert!(s.failure.is_some());
        }
    }
}

#[test]
fn resume_of_finished_run_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let c = replay_config(ProblemId::P4, 2, 5);
    write_script(dir.path(), &c, &ScriptOptions::default());
    let first = Engine::new(c, dir.path()).unwrap().run(RunOptions::default()).unwrap();
    let before = std::fs::read(dir.path().join("events.jsonl")).unwrap();
    let again = Engine::new(load(dir.path()), dir.path()).unwrap().resume(RunOptions::default()).unwrap();
    assert_eq!(first, again);
    assert_eq!(before, std::fs::read(dir.path().join("events.jsonl")).unwrap());
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = replay_config(ProblemId::P1, 1, 3);
    write_script(dir.path(), &c, &ScriptOptions::default());
    Engine::new(c, dir.path()).unwrap().run(RunOptions { stop_after: Some(1) }).unwrap();
    let path = dir.path().join("checkpoint.json");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("\\\"epoch\\\":1", "\\\"epoch\\\":2", 1)).unwrap();
    let err = Engine::new(load(dir.path()), dir.path()).unwrap().resume(RunOptions::default()).unwrap_err();
    assert!(matches!(err, EngineError::Integrity(_)), "{err}");
}

#[test]
fn exported_artifact_rescores_to_recorded_objective() {
    let dir = tempfile::tempdir().unwrap();
    let c = replay_config(ProblemId::P3B, 2, 6);
    write_script(dir.path(), &c, &ScriptOptions::all_valid());
    let summary = Engine::new(c, dir.path()).unwrap().run(RunOptions::default()).unwrap();
    let raw = std::fs::read(dir.path().join("best/artifact.json")).unwrap();
    let r = codevolve::problems::score_raw(ProblemId::P3B, &raw, &Default::default()).unwrap();
    assert_eq!(r.objective, summary.best.unwrap().objective);
}

#[test]
fn strict_replay_of_own_call_log_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let c = replay_config(ProblemId::P3A, 2, 8);
    write_script(dir.path(), &c, &ScriptOptions::default());
    Engine::new(c.clone(), dir.path()).unwrap().run(RunOptions::default()).unwrap();
    let events = std::fs::read(dir.path().join("events.jsonl")).unwrap();

    let second = tempfile::tempdir().unwrap();
    std::fs::copy(dir.path().join("llm_calls.jsonl"), second.path().join("calls.jsonl")).unwrap();
    let backend = ReplayBackend::load(&second.path().join("calls.jsonl")).unwrap().strict(true);
    Engine::with_backend(c, second.path(), Arc::new(backend)).run(RunOptions::default()).unwrap();
    assert_eq!(events, std::fs::read(second.path().join("events.jsonl")).unwrap());
}
