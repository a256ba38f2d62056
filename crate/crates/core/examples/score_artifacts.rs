//! Scores one hand-made construction per benchmark and prints how far it is
//! from the published best.

use codevolve::problems::{reference_best, score_raw, trivial_artifact, ProblemId, ScoreOptions};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let options = ScoreOptions::default();
    for p in ProblemId::ALL {
        let artifact = trivial_artifact(p);
        let report = score_raw(p, artifact.as_bytes(), &options)?;
        let best = reference_best(p);
        println!(
            "{p:5} valid={} objective={:.6} fitness={:.6} published={}",
            report.valid,
            report.objective.unwrap_or(f64::NAN),
            report.fitness,
            best.codeevolve
        );
    }

    // a single step of height one: ||f*f||_2^2 / (||f*f||_1 ||f*f||_inf) = 2/3
    let r = score_raw(ProblemId::P1, br#"{"heights": [1.0]}"#, &options)?;
    println!("P1 single step -> {:.12}", r.objective.unwrap());

    let overlap = br#"{"circles": [[0.5, 0.5, 0.3], [0.6, 0.5, 0.3]]}"#;
    let r = score_raw(ProblemId::P3A, overlap, &ScoreOptions { instance_size: Some(2), ..options })?;
    println!("overlapping pair -> valid={} violations={:?}", r.valid, r.violations);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
