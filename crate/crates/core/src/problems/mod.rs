//! Benchmark problems: artifact schemas, exact scorers and reference values.

pub mod artifact;
pub mod autocorrelation;
pub mod distance;
pub mod packing;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use artifact::{Artifact, ArtifactError, Circle, CirclePackingArtifact, PointSetArtifact, StepFunctionArtifact};
pub use distance::{minimization_fitness, DistanceRatio};
pub use packing::DEFAULT_TOLERANCE;

use crate::sandbox::{CandidateLanguage, ResourceLimits, ARTIFACT_ENV};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown problem id {0:?} (expected one of P1, P2.A, P2.B, P3.A, P3.B, P4)")]
pub struct UnknownProblem(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ProblemId {
    P1,
    P2A,
    P2B,
    P3A,
    P3B,
    P4,
}

impl ProblemId {
    pub const ALL: [ProblemId; 6] =
        [ProblemId::P1, ProblemId::P2A, ProblemId::P2B, ProblemId::P3A, ProblemId::P3B, ProblemId::P4];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::P1 => "P1",
            ProblemId::P2A => "P2.A",
            ProblemId::P2B => "P2.B",
            ProblemId::P3A => "P3.A",
            ProblemId::P3B => "P3.B",
            ProblemId::P4 => "P4",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            ProblemId::P2A | ProblemId::P2B => Direction::Minimize,
            _ => Direction::Maximize,
        }
    }

    /// Number of points/circles the instance requires, if fixed.
    pub fn instance_size(self) -> Option<usize> {
        match self {
            ProblemId::P1 => None,
            ProblemId::P2A => Some(16),
            ProblemId::P2B => Some(14),
            ProblemId::P3A => Some(26),
            ProblemId::P3B => Some(32),
            ProblemId::P4 => Some(21),
        }
    }

    pub fn point_dimension(self) -> Option<usize> {
        match self {
            ProblemId::P2A => Some(2),
            ProblemId::P2B => Some(3),
            _ => None,
        }
    }

    pub fn default_limits(self) -> ResourceLimits {
        const GIB: u64 = 1 << 30;
        match self {
            ProblemId::P1 | ProblemId::P2A | ProblemId::P2B => ResourceLimits::new(360.0, 5 * GIB),
            ProblemId::P3A | ProblemId::P3B => ResourceLimits::new(180.0, GIB),
            ProblemId::P4 => ResourceLimits::new(360.0, GIB),
        }
    }

    pub fn default_epochs(self) -> u64 {
        match self {
            ProblemId::P1 | ProblemId::P3A | ProblemId::P3B => 100,
            ProblemId::P2A | ProblemId::P2B => 200,
            ProblemId::P4 => 150,
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = UnknownProblem;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownProblem(s.to_string()))
    }
}

impl From<ProblemId> for String {
    fn from(p: ProblemId) -> String {
        p.as_str().to_string()
    }
}

impl TryFrom<String> for ProblemId {
    type Error = UnknownProblem;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Published best objectives for a benchmark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceBest {
    pub alphaevolve: f64,
    pub codeevolve: f64,
    pub direction: Direction,
}

pub fn reference_best(problem: ProblemId) -> ReferenceBest {
    let (alphaevolve, codeevolve) = match problem {
        ProblemId::P1 => (0.89627, 0.93768),
        ProblemId::P2A => (12.88926, 12.88923),
        ProblemId::P2B => (4.16585, 4.16578),
        ProblemId::P3A => (2.63586, 2.63596),
        ProblemId::P3B => (2.93794, 2.93957),
        ProblemId::P4 => (2.36583, 2.36583),
    };
    ReferenceBest { alphaevolve, codeevolve, direction: problem.direction() }
}

/// Result of scoring one artifact. `metrics` is the solution's metric vector
/// and always carries `objective` when one is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub objective: Option<f64>,
    pub fitness: f64,
    pub valid: bool,
    pub violations: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ScoreReport {
    pub fn valid(objective: f64, fitness: f64, mut metrics: BTreeMap<String, f64>) -> Self {
        metrics.insert("objective".into(), objective);
        ScoreReport {
            objective: Some(objective),
            fitness: if fitness.is_finite() { fitness.max(0.0) } else { 0.0 },
            valid: true,
            violations: BTreeMap::new(),
            metrics,
            message: None,
        }
    }

    pub fn invalid(
        objective: Option<f64>,
        violations: BTreeMap<String, f64>,
        mut metrics: BTreeMap<String, f64>,
    ) -> Self {
        if let Some(o) = objective {
            metrics.insert("objective".into(), o);
        }
        ScoreReport { objective, fitness: 0.0, valid: false, violations, metrics, message: None }
    }

    pub fn invalid_with(name: &str, magnitude: f64, message: String) -> Self {
        let mut r = ScoreReport::invalid(None, BTreeMap::from([(name.to_string(), magnitude)]), BTreeMap::new());
        r.message = Some(message);
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreOptions {
    /// Absolute slack for packing constraints.
    pub tolerance: f64,
    pub distance_ratio: DistanceRatio,
    /// Replaces the instance's point or circle count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance_size: Option<usize>,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions { tolerance: DEFAULT_TOLERANCE, distance_ratio: DistanceRatio::Squared, instance_size: None }
    }
}

pub fn parse_artifact(problem: ProblemId, raw: &[u8]) -> Result<Artifact, ArtifactError> {
    Ok(match problem {
        ProblemId::P1 => Artifact::StepFunction(StepFunctionArtifact::decode(raw)?),
        ProblemId::P2A | ProblemId::P2B => Artifact::PointSet(PointSetArtifact::decode(raw)?),
        ProblemId::P3A | ProblemId::P3B | ProblemId::P4 => Artifact::CirclePacking(CirclePackingArtifact::decode(raw)?),
    })
}

pub fn score_p1(artifact: &StepFunctionArtifact) -> ScoreReport {
    autocorrelation::score_step_function(artifact)
}

pub fn score_p2(artifact: &PointSetArtifact, shape: Option<(usize, usize)>, ratio: DistanceRatio) -> ScoreReport {
    distance::score_point_set(artifact, shape, ratio)
}

pub fn score_p3(artifact: &CirclePackingArtifact, expected_count: Option<usize>, tol: f64) -> ScoreReport {
    packing::score_unit_square(artifact, expected_count, tol)
}

pub fn score_p4(artifact: &CirclePackingArtifact, expected_count: Option<usize>, tol: f64) -> ScoreReport {
    packing::score_perimeter4(artifact, expected_count, tol)
}

/// Scores an artifact against a benchmark instance.
pub fn score(problem: ProblemId, artifact: &Artifact, options: &ScoreOptions) -> ScoreReport {
    let n = options.instance_size.or(problem.instance_size());
    match (problem, artifact) {
        (ProblemId::P1, Artifact::StepFunction(a)) => score_p1(a),
        (ProblemId::P2A | ProblemId::P2B, Artifact::PointSet(a)) => {
            score_p2(a, n.zip(problem.point_dimension()), options.distance_ratio)
        }
        (ProblemId::P3A | ProblemId::P3B, Artifact::CirclePacking(a)) => score_p3(a, n, options.tolerance),
        (ProblemId::P4, Artifact::CirclePacking(a)) => score_p4(a, n, options.tolerance),
        _ => ScoreReport::invalid_with("schema", 1.0, format!("artifact kind does not match {problem}")),
    }
}

/// Decode then score; decoding failures come back as an error so callers can
/// tell a malformed artifact from an infeasible construction.
pub fn score_raw(problem: ProblemId, raw: &[u8], options: &ScoreOptions) -> Result<ScoreReport, ArtifactError> {
    Ok(score(problem, &parse_artifact(problem, raw)?, options))
}

/// JSON of the trivial construction each run starts from.
pub fn trivial_artifact(problem: ProblemId) -> String {
    let grid = |n: usize, width: f64| {
        let cols = (n as f64).sqrt().ceil() as usize;
        let cell = width / cols as f64;
        let circles: Vec<[f64; 3]> =
            (0..n).map(|k| [cell * ((k % cols) as f64 + 0.5), cell * ((k / cols) as f64 + 0.5), 0.01]).collect();
        serde_json::to_string(&circles).unwrap()
    };
    match problem {
        ProblemId::P1 => r#"{"heights": [1.0]}"#.to_string(),
        ProblemId::P2A => {
            let pts: Vec<[f64; 2]> = (0..16).map(|i| [i as f64, 0.0]).collect();
            format!(r#"{{"points": {}}}"#, serde_json::to_string(&pts).unwrap())
        }
        ProblemId::P2B => {
            let pts: Vec<[f64; 3]> = (0..14).map(|i| [i as f64, 0.0, 0.0]).collect();
            format!(r#"{{"points": {}}}"#, serde_json::to_string(&pts).unwrap())
        }
        ProblemId::P3A => format!(r#"{{"circles": {}}}"#, grid(26, 1.0)),
        ProblemId::P3B => format!(r#"{{"circles": {}}}"#, grid(32, 1.0)),
        ProblemId::P4 => format!(r#"{{"rect_width": 1.0, "circles": {}}}"#, grid(21, 1.0)),
    }
}

/// The starting program: writes the trivial construction and exits.
pub fn trivial_program(problem: ProblemId, language: CandidateLanguage) -> String {
    artifact_program(&trivial_artifact(problem), language)
}

/// A program that writes `artifact` (JSON text) verbatim.
pub fn artifact_program(artifact: &str, language: CandidateLanguage) -> String {
    match language {
        CandidateLanguage::Python => format!(
            "import json\nimport os\n\n\ndef construct():\n    return {artifact}\n\n\nif __name__ == \"__main__\":\n    with open(os.environ[\"{ARTIFACT_ENV}\"], \"w\") as f:\n        json.dump(construct(), f)\n"
        ),
        CandidateLanguage::Shell => {
            format!("#!/bin/sh\ncat > \"${ARTIFACT_ENV}\" <<'EOF'\n{artifact}\nEOF\n")
        }
    }
}

fn statement(problem: ProblemId) -> String {
    match problem {
        ProblemId::P1 => "Construct a nonnegative step function f on [0, 1] with equal-width steps that maximizes \
            ||f*f||_2^2 / (||f*f||_1 * ||f*f||_inf), where f*f is the autoconvolution of f. \
            The number of steps is up to you."
            .to_string(),
        ProblemId::P2A | ProblemId::P2B => format!(
            "Place {} distinct points in {} dimensions so that the ratio of the largest to the smallest \
             pairwise squared distance is as small as possible.",
            problem.instance_size().unwrap(),
            problem.point_dimension().unwrap()
        ),
        ProblemId::P3A | ProblemId::P3B => format!(
            "Place exactly {} non-overlapping circles inside the unit square [0,1]x[0,1] so that the sum of their \
             radii is as large as possible.",
            problem.instance_size().unwrap()
        ),
        ProblemId::P4 => {
            "Place exactly 21 non-overlapping circles inside a rectangle of perimeter 4 (width w in (0,2), \
            height 2-w, lower-left corner at the origin) so that the sum of their radii is as large as possible. \
            You choose w."
                .to_string()
        }
    }
}

fn schema(problem: ProblemId) -> &'static str {
    match problem {
        ProblemId::P1 => r#"{"heights": [h0, h1, ...]} with every height >= 0 and at least one > 0"#,
        ProblemId::P2A | ProblemId::P2B => r#"{"points": [[x, y, ...], ...]}"#,
        ProblemId::P3A | ProblemId::P3B => r#"{"circles": [[x, y, r], ...]}"#,
        ProblemId::P4 => r#"{"rect_width": w, "circles": [[x, y, r], ...]}"#,
    }
}

/// Short task description placed in every generation request.
pub fn problem_brief(problem: ProblemId, language: CandidateLanguage) -> String {
    let limits = problem.default_limits();
    format!(
        "{}\n\nYour program is a {} script. When run, it must write its construction as JSON to the file \
         named by the environment variable {ARTIFACT_ENV}, using the schema {}. The framework verifies the \
         construction itself; printed scores are ignored. Limits: {} seconds wall clock, {} MiB of memory.",
        statement(problem),
        language.display_name(),
        schema(problem),
        limits.wall_seconds,
        limits.memory_bytes >> 20,
    )
}

/// The basic prompt every island starts from.
pub fn initial_prompt(problem: ProblemId) -> String {
    format!(
        "{} Improve the given program so that the construction it writes scores better. Keep the output format unchanged.",
        statement(problem)
    )
}
