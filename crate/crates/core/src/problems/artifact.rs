//! Construction artifacts emitted by candidate programs, decoded from JSON.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ArtifactError {
    #[error("artifact is not valid JSON for this problem: {0}")]
    Decode(String),
    #[error("artifact violates its schema: {0}")]
    Invariant(String),
}

/// Nonnegative step function on [0, 1] with `heights.len()` equal-width bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFunctionArtifact {
    pub heights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSetArtifact {
    pub points: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Circle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl From<[f64; 3]> for Circle {
    fn from([x, y, r]: [f64; 3]) -> Self {
        Circle { x, y, r }
    }
}

impl From<Circle> for [f64; 3] {
    fn from(c: Circle) -> Self {
        [c.x, c.y, c.r]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CirclePackingArtifact {
    #[serde(default = "unit_width")]
    pub rect_width: f64,
    pub circles: Vec<Circle>,
}

fn unit_width() -> f64 {
    1.0
}

impl CirclePackingArtifact {
    pub fn in_unit_square(circles: Vec<Circle>) -> Self {
        CirclePackingArtifact { rect_width: 1.0, circles }
    }

    /// Height of the perimeter-4 container for this width.
    pub fn rect_height(&self) -> f64 {
        2.0 - self.rect_width
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Artifact {
    StepFunction(StepFunctionArtifact),
    PointSet(PointSetArtifact),
    CirclePacking(CirclePackingArtifact),
}

fn decode<T: for<'de> Deserialize<'de>>(raw: &[u8]) -> Result<T, ArtifactError> {
    serde_json::from_slice(raw).map_err(|e| ArtifactError::Decode(e.to_string()))
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl StepFunctionArtifact {
    pub fn decode(raw: &[u8]) -> Result<Self, ArtifactError> {
        let a: Self = decode(raw)?;
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<(), ArtifactError> {
        if self.heights.is_empty() {
            return Err(ArtifactError::Invariant("no heights".into()));
        }
        if !all_finite(&self.heights) {
            return Err(ArtifactError::Invariant("non-finite height".into()));
        }
        if let Some(h) = self.heights.iter().find(|h| **h < 0.0) {
            return Err(ArtifactError::Invariant(format!("negative height {h}")));
        }
        Ok(())
    }
}

impl PointSetArtifact {
    pub fn decode(raw: &[u8]) -> Result<Self, ArtifactError> {
        let a: Self = decode(raw)?;
        a.validate()?;
        Ok(a)
    }

    pub fn dimension(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), ArtifactError> {
        if self.points.len() < 2 {
            return Err(ArtifactError::Invariant("fewer than two points".into()));
        }
        let d = self.dimension();
        if d == 0 || self.points.iter().any(|p| p.len() != d) {
            return Err(ArtifactError::Invariant("points have inconsistent dimension".into()));
        }
        if !self.points.iter().all(|p| all_finite(p)) {
            return Err(ArtifactError::Invariant("non-finite coordinate".into()));
        }
        Ok(())
    }
}

impl CirclePackingArtifact {
    pub fn decode(raw: &[u8]) -> Result<Self, ArtifactError> {
        let a: Self = decode(raw)?;
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<(), ArtifactError> {
        if !self.rect_width.is_finite() {
            return Err(ArtifactError::Invariant("non-finite rect_width".into()));
        }
        if !self.circles.iter().all(|c| all_finite(&[c.x, c.y, c.r])) {
            return Err(ArtifactError::Invariant("non-finite circle".into()));
        }
        Ok(())
    }
}
