//! Per-epoch best-fitness series and the log-gap transform used for plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::{read_events, EngineError, Event};

/// Best fitness per island and overall, one entry per completed epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportSeries {
    pub epochs: Vec<u64>,
    /// `[epoch][island]`.
    pub island_best: Vec<Vec<f64>>,
    pub global_best: Vec<f64>,
}

/// `-ln(m + eps - y)`, or `None` where the argument is not positive.
pub fn log_gap(y: f64, m: f64, eps: f64) -> Option<f64> {
    let gap = m + eps - y;
    (gap > 0.0 && gap.is_finite()).then(|| -gap.ln())
}

impl ReportSeries {
    pub fn from_events(events: &[Event]) -> Self {
        let mut s = ReportSeries::default();
        for e in events {
            if let Event::Epoch(summary) = e {
                s.epochs.push(summary.epoch);
                s.island_best.push(summary.island_best.clone());
                s.global_best.push(summary.global_best);
            }
        }
        s
    }

    pub fn from_run_dir(dir: &Path) -> Result<Self, EngineError> {
        Ok(Self::from_events(&read_events(dir)?))
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Largest global best in the run; the default `M`.
    pub fn max_global(&self) -> f64 {
        self.global_best.iter().copied().fold(0.0, f64::max)
    }

    pub fn transformed(&self, m: f64, eps: f64) -> Vec<Option<f64>> {
        self.global_best.iter().map(|&y| log_gap(y, m, eps)).collect()
    }

    /// Comma-separated table: epoch, each island, global, transform.
    /// Undefined transform values are written as `undefined`.
    pub fn to_csv(&self, m: f64, eps: f64) -> String {
        let islands = self.island_best.first().map_or(0, Vec::len);
        let mut out = String::from("epoch");
        for i in 0..islands {
            write!(out, ",island_{i}").unwrap();
        }
        out.push_str(",global,transformed\n");
        for (row, t) in self.transformed(m, eps).into_iter().enumerate() {
            write!(out, "{}", self.epochs[row]).unwrap();
            for v in &self.island_best[row] {
                write!(out, ",{v}").unwrap();
            }
            match t {
                Some(t) => writeln!(out, ",{},{t}", self.global_best[row]).unwrap(),
                None => writeln!(out, ",{},undefined", self.global_best[row]).unwrap(),
            }
        }
        out
    }
}
