//! Second autocorrelation inequality: score a step function `f` by
//! `‖f∗f‖₂² / (‖f∗f‖₁ · ‖f∗f‖∞)`.
//!
//! With `n` bins of width `h = 1/n` on [0, 1], `f∗f` is continuous and
//! piecewise linear on [0, 2] with knots every `h`. Its knot values are
//! `h · c[m]`, where `c` is the discrete self-convolution of the heights, and
//! it vanishes at both ends. All three norms are exact on that representation.

use std::collections::BTreeMap;

use super::artifact::StepFunctionArtifact;
use super::ScoreReport;

/// Discrete self-convolution `c[m] = Σ_{i+j=m} a[i]·a[j]`, length `2n − 1`.
pub fn self_convolution(a: &[f64]) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut c = vec![0.0; 2 * a.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &aj) in a.iter().enumerate() {
            c[i + j] += ai * aj;
        }
    }
    c
}

/// Norms of the autoconvolution of a step function on [0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AutoconvolutionNorms {
    pub l1: f64,
    pub l2_squared: f64,
    pub linf: f64,
}

pub fn autoconvolution_norms(heights: &[f64]) -> AutoconvolutionNorms {
    let n = heights.len();
    let h = 1.0 / n as f64;
    let c = self_convolution(heights);
    // knots v_0 .. v_2n with zero endpoints
    let mut v = Vec::with_capacity(2 * n + 1);
    v.push(0.0);
    v.extend(c.iter().map(|cm| h * cm));
    v.push(0.0);

    let linf = v.iter().copied().fold(0.0, f64::max);
    let total: f64 = heights.iter().sum();
    let l1 = (h * total) * (h * total);
    let l2_squared = v.windows(2).map(|w| h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0).sum();
    AutoconvolutionNorms { l1, l2_squared, linf }
}

pub fn score_step_function(artifact: &StepFunctionArtifact) -> ScoreReport {
    if let Err(e) = artifact.validate() {
        return ScoreReport::invalid_with("schema", 1.0, e.to_string());
    }
    let norms = autoconvolution_norms(&artifact.heights);
    let mut metrics = BTreeMap::from([
        ("steps".to_string(), artifact.heights.len() as f64),
        ("l1".to_string(), norms.l1),
        ("l2_squared".to_string(), norms.l2_squared),
        ("linf".to_string(), norms.linf),
    ]);
    if norms.linf <= 0.0 || norms.l1 <= 0.0 {
        let mut report = ScoreReport::invalid_with("zero_function", 1.0, "all heights are zero".into());
        report.metrics.append(&mut metrics);
        return report;
    }
    let objective = norms.l2_squared / (norms.l1 * norms.linf);
    ScoreReport::valid(objective, objective, metrics)
}
