//! A short run against a live OpenAI-compatible endpoint. Needs
//! CODEVOLVE_API_KEY and python3; does nothing without the key.
//!
//!     CODEVOLVE_API_KEY=... cargo run --example live_run -- /tmp/live

use std::path::PathBuf;

use codevolve::config::RunConfig;
use codevolve::engine::{Engine, RunOptions};
use codevolve::problems::ProblemId;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    if std::env::var("CODEVOLVE_API_KEY").is_err() {
        println!("CODEVOLVE_API_KEY is not set; skipping");
        return Ok(());
    }
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("live-run"));
    let mut config = RunConfig::new(ProblemId::P3A);
    config.num_islands = 2;
    config.epochs = Some(10);
    let summary = Engine::new(config, &out)?.run(RunOptions::default())?;
    println!("global best per epoch: {:?}", summary.global_best);
    if let Some(best) = summary.best {
        println!("best {} objective {:?}, delta vs published {:?}", best.id, best.objective, best.delta_vs_reference);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
