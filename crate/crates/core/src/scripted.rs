//! Synthetic replay transcripts for offline runs, examples and tests.
//!
//! Every response is a one-line note followed by a single fenced program, so
//! it works both as a generation reply (full replacement) and as a rewritten
//! prompt. A deterministic share of responses is deliberately broken to
//! exercise the failure paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::llm::TranscriptRecord;
use crate::problems::{artifact_program, ProblemId};
use crate::sandbox::CandidateLanguage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScriptOptions {
    /// Every n-th response is an unterminated edit block.
    pub malformed_every: Option<u64>,
    /// Every n-th response writes an overlapping (or otherwise invalid) construction.
    pub invalid_every: Option<u64>,
}

impl Default for ScriptOptions {
    fn default() -> Self {
        ScriptOptions { malformed_every: Some(11), invalid_every: Some(7) }
    }
}

impl ScriptOptions {
    pub fn all_valid() -> Self {
        ScriptOptions { malformed_every: None, invalid_every: None }
    }
}

fn grid_packing(n: usize, width: f64, height: f64, fill: f64) -> Vec<[f64; 3]> {
    let cols = ((n as f64 * width / height).sqrt().ceil() as usize).max(1);
    let rows = n.div_ceil(cols);
    let (cw, ch) = (width / cols as f64, height / rows as f64);
    let r = cw.min(ch) / 2.0 * fill;
    (0..n).map(|k| [cw * ((k % cols) as f64 + 0.5), ch * ((k / cols) as f64 + 0.5), r]).collect()
}

/// A valid construction for `problem`, varied by `rng`.
pub fn random_artifact<R: Rng + ?Sized>(problem: ProblemId, rng: &mut R) -> String {
    match problem {
        ProblemId::P1 => {
            let len = rng.random_range(2..24);
            let h: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
            serde_json::json!({ "heights": h }).to_string()
        }
        ProblemId::P2A | ProblemId::P2B => {
            let n = problem.instance_size().unwrap();
            let d = problem.point_dimension().unwrap();
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
            serde_json::json!({ "points": pts }).to_string()
        }
        ProblemId::P3A | ProblemId::P3B => {
            let n = problem.instance_size().unwrap();
            let circles = grid_packing(n, 1.0, 1.0, rng.random_range(0.2..0.99));
            serde_json::json!({ "circles": circles }).to_string()
        }
        ProblemId::P4 => {
            let w: f64 = rng.random_range(0.6..1.4);
            let circles = grid_packing(21, w, 2.0 - w, rng.random_range(0.2..0.99));
            serde_json::json!({ "rect_width": w, "circles": circles }).to_string()
        }
    }
}

fn invalid_artifact(problem: ProblemId) -> String {
    match problem {
        ProblemId::P1 => r#"{"heights": [0.0, 0.0]}"#.into(),
        ProblemId::P2A | ProblemId::P2B => {
            let d = problem.point_dimension().unwrap();
            let n = problem.instance_size().unwrap();
            serde_json::json!({ "points": vec![vec![0.5; d]; n] }).to_string()
        }
        ProblemId::P3A | ProblemId::P3B | ProblemId::P4 => {
            let n = problem.instance_size().unwrap();
            let circles = vec![[0.5, 0.5, 0.4]; n];
            if problem == ProblemId::P4 {
                serde_json::json!({ "rect_width": 1.0, "circles": circles }).to_string()
            } else {
                serde_json::json!({ "circles": circles }).to_string()
            }
        }
    }
}

/// The scripted reply for call `index`.
pub fn scripted_response<R: Rng + ?Sized>(
    problem: ProblemId,
    language: CandidateLanguage,
    index: u64,
    options: &ScriptOptions,
    rng: &mut R,
) -> String {
    let hits = |every: Option<u64>| every.is_some_and(|k| k > 0 && index % k == k - 1);
    if hits(options.malformed_every) {
        return "Try again.\n<<<<<<< SEARCH\nthis block never ends\n".to_string();
    }
    let (note, artifact) = if hits(options.invalid_every) {
        ("Push the construction harder.", invalid_artifact(problem))
    } else {
        ("Try a different construction.", random_artifact(problem, rng))
    };
    format!("{note}\n```{}\n{}```\n", language.fence_tag(), artifact_program(&artifact, language))
}

/// `calls` shared records (no island), indices `0..calls`.
pub fn scripted_transcript(
    problem: ProblemId,
    language: CandidateLanguage,
    calls: u64,
    seed: u64,
    options: &ScriptOptions,
) -> Vec<TranscriptRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..calls)
        .map(|i| TranscriptRecord::new(None, i, scripted_response(problem, language, i, options, &mut rng)))
        .collect()
}

/// Upper bound on calls per island for `epochs` steps after `init` generations.
pub fn calls_needed(init: usize, epochs: u64) -> u64 {
    init as u64 + 2 * epochs
}
