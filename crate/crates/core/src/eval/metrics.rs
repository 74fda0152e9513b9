use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub exact: f64,
    pub precision: f64,
    pub recall: f64,
}

impl Score {
    pub const ZERO: Score = Score {
        exact: 0.0,
        precision: 0.0,
        recall: 0.0,
    };
}

/// Exact match, precision and recall of `pred` against `gold`.
///
/// Empty sets: both empty scores 1/1/1; an empty prediction against a
/// non-empty gold scores 0/0/0; a non-empty prediction against an empty gold
/// has precision 0 and recall 1.
pub fn score<T: Eq + Hash>(pred: &HashSet<T>, gold: &HashSet<T>) -> Score {
    let hit = pred.intersection(gold).count() as f64;
    let precision = if pred.is_empty() {
        if gold.is_empty() { 1.0 } else { 0.0 }
    } else {
        hit / pred.len() as f64
    };
    let recall = if gold.is_empty() {
        1.0
    } else {
        hit / gold.len() as f64
    };
    Score {
        exact: if pred == gold { 1.0 } else { 0.0 },
        precision,
        recall,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample (n - 1) standard deviation; zero for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { 0.0 } else { sum / n as f64 }
}
