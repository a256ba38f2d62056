//! Circle packings in an axis-aligned rectangle `[0, w] × [0, height]`,
//! scored by the sum of radii.

use std::collections::BTreeMap;

use super::artifact::{Circle, CirclePackingArtifact};
use super::ScoreReport;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Records the largest breach of each named constraint.
#[derive(Default)]
struct Breaches {
    worst: BTreeMap<String, f64>,
    count: usize,
}

impl Breaches {
    fn check(&mut self, name: &str, magnitude: f64, tol: f64) {
        if magnitude > tol || magnitude.is_nan() {
            self.count += 1;
            let slot = self.worst.entry(name.to_string()).or_insert(0.0);
            *slot = slot.max(magnitude);
        }
    }
}

/// Feasibility and objective of circles in a `width × height` box.
pub fn score_packing(
    circles: &[Circle],
    width: f64,
    height: f64,
    expected_count: Option<usize>,
    tol: f64,
) -> ScoreReport {
    let mut b = Breaches::default();
    if let Some(n) = expected_count {
        if circles.len() != n {
            b.check("count", circles.len().abs_diff(n) as f64, 0.0);
        }
    }
    for c in circles {
        if c.r < 0.0 {
            b.check("negative_radius", -c.r, 0.0);
        }
        b.check("left_wall", c.r - c.x, tol);
        b.check("right_wall", c.x + c.r - width, tol);
        b.check("bottom_wall", c.r - c.y, tol);
        b.check("top_wall", c.y + c.r - height, tol);
    }
    for (i, a) in circles.iter().enumerate() {
        for c in &circles[i + 1..] {
            let d = ((a.x - c.x).powi(2) + (a.y - c.y).powi(2)).sqrt();
            b.check("overlap", a.r + c.r - d, tol);
        }
    }
    let objective: f64 = circles.iter().map(|c| c.r).sum();
    let metrics = BTreeMap::from([
        ("circles".to_string(), circles.len() as f64),
        ("width".to_string(), width),
        ("height".to_string(), height),
        ("tolerance".to_string(), tol),
        ("violation_count".to_string(), b.count as f64),
        ("max_radius".to_string(), circles.iter().map(|c| c.r).fold(0.0, f64::max)),
    ]);
    if b.count == 0 {
        ScoreReport::valid(objective, objective, metrics)
    } else {
        ScoreReport::invalid(Some(objective), b.worst, metrics)
    }
}

/// Unit-square packing. The artifact's `rect_width` must be 1.
pub fn score_unit_square(artifact: &CirclePackingArtifact, expected_count: Option<usize>, tol: f64) -> ScoreReport {
    if artifact.rect_width != 1.0 {
        return ScoreReport::invalid_with(
            "rect_width",
            (artifact.rect_width - 1.0).abs(),
            "unit-square packing must have rect_width 1".into(),
        );
    }
    score_packing(&artifact.circles, 1.0, 1.0, expected_count, tol)
}

/// Packing in a rectangle of perimeter 4: width `w ∈ (0, 2)`, height `2 − w`.
pub fn score_perimeter4(artifact: &CirclePackingArtifact, expected_count: Option<usize>, tol: f64) -> ScoreReport {
    let w = artifact.rect_width;
    if !(w > 0.0 && w < 2.0) {
        return ScoreReport::invalid_with("rect_width", w, "rect_width must lie in (0, 2)".into());
    }
    score_packing(&artifact.circles, w, artifact.rect_height(), expected_count, tol)
}
