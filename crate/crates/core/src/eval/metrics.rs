use serde::{Deserialize, Serialize};

use crate::attribution::RelevanceMap;
use crate::error::{Error, Result};

/// Share of the positive relevance that falls on `truth`. Zero when the map
/// has no positive relevance.
pub fn localization(map: &RelevanceMap, truth: &[usize]) -> Result<f64> {
    localization_values(&map.values, truth)
}

pub fn localization_values(values: &[f64], truth: &[usize]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("relevance map".into()));
    }
    if let Some(&bad) = truth.iter().find(|&&i| i >= values.len()) {
        return Err(Error::InvalidInput(format!(
            "ground-truth index {bad} outside a map of {} features",
            values.len()
        )));
    }
    let positive: f64 = values.iter().filter(|&&v| v > 0.0).sum();
    if positive <= 0.0 {
        return Ok(0.0);
    }
    let mut seen = vec![false; values.len()];
    let mut on_truth = 0.0;
    for &i in truth {
        if !seen[i] {
            seen[i] = true;
            on_truth += values[i].max(0.0);
        }
    }
    Ok(on_truth / positive)
}

/// Shannon entropy (nats) of `|R_i| / Σ|R_j|`; zero for an all-zero map.
pub fn complexity(map: &RelevanceMap) -> f64 {
    entropy(&map.values)
}

pub fn entropy(values: &[f64]) -> f64 {
    let total: f64 = values.iter().map(|v| v.abs()).sum();
    if total <= 0.0 {
        return 0.0;
    }
    values
        .iter()
        .map(|v| v.abs() / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScaling {
    Linear,
    #[default]
    Sqrt,
}

impl std::str::FromStr for AxisScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "sqrt" => Ok(Self::Sqrt),
            other => Err(Error::Config(format!("unknown axis scaling '{other}'"))),
        }
    }
}

/// Trapezoidal area under `(fraction, value)` points, with the fraction
/// axis optionally square-root scaled and renormalized to `[0, 1]`.
pub fn auc_points(points: &[(f64, f64)], scaling: AxisScaling) -> f64 {
    if points.len() < 2 {
        return points.first().map_or(0.0, |p| p.1);
    }
    let map = |f: f64| match scaling {
        AxisScaling::Linear => f,
        AxisScaling::Sqrt => f.sqrt(),
    };
    let (x0, x1) = (map(points[0].0), map(points[points.len() - 1].0));
    let span = x1 - x0;
    if span <= 0.0 {
        return points[0].1;
    }
    points
        .windows(2)
        .map(|w| (map(w[1].0) - map(w[0].0)) / span * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

/// Mean with its standard error over a set of per-sample values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            stderr,
            count: values.len(),
        })
    }
}
