//! Max/min distance ratio of a point set (minimized).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::artifact::PointSetArtifact;
use super::ScoreReport;

/// Whether the ratio is taken over squared distances (the default, matching
/// the published reference values) or plain distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceRatio {
    #[default]
    Squared,
    Plain,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Bounded, strictly decreasing map from a nonnegative objective to fitness.
pub fn minimization_fitness(objective: f64) -> f64 {
    1.0 / (1.0 + objective)
}

pub fn score_point_set(
    artifact: &PointSetArtifact,
    shape: Option<(usize, usize)>,
    ratio: DistanceRatio,
) -> ScoreReport {
    if let Err(e) = artifact.validate() {
        return ScoreReport::invalid_with("schema", 1.0, e.to_string());
    }
    let (n, d) = (artifact.points.len(), artifact.dimension());
    if let Some((want_n, want_d)) = shape {
        if n != want_n || d != want_d {
            return ScoreReport::invalid_with(
                "shape",
                (n.abs_diff(want_n) + d.abs_diff(want_d)) as f64,
                format!("expected {want_n} points in {want_d} dimensions, got {n} in {d}"),
            );
        }
    }
    let mut max_sq: f64 = 0.0;
    let mut min_sq = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let dsq = squared_distance(&artifact.points[i], &artifact.points[j]);
            max_sq = max_sq.max(dsq);
            min_sq = min_sq.min(dsq);
        }
    }
    let mut metrics = BTreeMap::from([
        ("points".to_string(), n as f64),
        ("dimension".to_string(), d as f64),
        ("max_distance".to_string(), max_sq.sqrt()),
        ("min_distance".to_string(), min_sq.sqrt()),
    ]);
    if min_sq <= 0.0 {
        let mut report = ScoreReport::invalid_with("duplicate_points", 1.0, "two points coincide".into());
        report.metrics.append(&mut metrics);
        return report;
    }
    let objective = match ratio {
        DistanceRatio::Squared => max_sq / min_sq,
        DistanceRatio::Plain => (max_sq / min_sq).sqrt(),
    };
    ScoreReport::valid(objective, minimization_fitness(objective), metrics)
}
