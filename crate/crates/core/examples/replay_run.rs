//! An offline evolutionary run: a scripted transcript stands in for the model
//! ensemble, candidates are shell programs, and the run directory is reported
//! as a per-epoch table.

use codevolve::config::{BackendKind, RunConfig};
use codevolve::engine::{Engine, RunOptions};
use codevolve::llm::replay::write_transcript;
use codevolve::problems::ProblemId;
use codevolve::report::ReportSeries;
use codevolve::sandbox::CandidateLanguage;
use codevolve::scripted::{calls_needed, scripted_transcript, ScriptOptions};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut config = RunConfig::new(ProblemId::P3A);
    config.num_islands = 3;
    config.epochs = Some(12);
    config.master_seed = 7;
    config.sandbox.language = CandidateLanguage::Shell;
    config.llm.backend = BackendKind::Replay;
    config.llm.transcript = Some("transcript.jsonl".into());

    let calls = calls_needed(config.init_population, config.total_epochs());
    let transcript = scripted_transcript(config.problem, config.sandbox.language, calls, 1, &ScriptOptions::default());
    write_transcript(&dir.path().join("transcript.jsonl"), &transcript)?;

    let summary = Engine::new(config, dir.path())?.run(RunOptions::default())?;
    println!("statuses: {:?}", summary.status_counts);
    if let Some(best) = &summary.best {
        println!("best {} objective {:?} (published {})", best.id, best.objective, best.reference);
    }

    let series = ReportSeries::from_run_dir(dir.path())?;
    print!("{}", series.to_csv(series.max_global(), 1e-4));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
