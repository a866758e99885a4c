//! SPL, success rate, average final distance and the failure-distance
//! histogram.
//!
//! SPL = (1/N) Σ Sᵢ · lᵢ / max(lᵢ, pᵢ), with Sᵢ the success indicator, lᵢ
//! the shortest geodesic and pᵢ the executed path length.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BIN_EDGES: [f64; 6] = [0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no episodes to evaluate")]
    NoEpisodes,
    #[error("episode #{index}: {message}")]
    InvalidResult { index: usize, message: String },
    #[error("bin edges must be finite, non-negative and strictly increasing: {0:?}")]
    InvalidEdges(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub shortest_geodesic: f64,
    pub path_length: f64,
    pub final_distance: f64,
}

fn check(results: &[EpisodeResult]) -> Result<(), MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::NoEpisodes);
    }
    for (index, r) in results.iter().enumerate() {
        let message = if !(r.shortest_geodesic > 0.0 && r.shortest_geodesic.is_finite()) {
            format!("shortest geodesic must be positive, got {}", r.shortest_geodesic)
        } else if !(r.path_length >= 0.0 && r.path_length.is_finite()) {
            format!("path length must be >= 0, got {}", r.path_length)
        } else if !(r.final_distance >= 0.0 && r.final_distance.is_finite()) {
            format!("final distance must be >= 0, got {}", r.final_distance)
        } else {
            continue;
        };
        return Err(MetricsError::InvalidResult { index, message });
    }
    Ok(())
}

pub fn spl(results: &[EpisodeResult]) -> Result<f64, MetricsError> {
    check(results)?;
    let total: f64 = results
        .iter()
        .filter(|r| r.success)
        .map(|r| r.shortest_geodesic / r.shortest_geodesic.max(r.path_length))
        .sum();
    Ok(total / results.len() as f64)
}

pub fn success_rate(results: &[EpisodeResult]) -> Result<f64, MetricsError> {
    check(results)?;
    Ok(results.iter().filter(|r| r.success).count() as f64 / results.len() as f64)
}

/// Mean final distance over all episodes, successful or not.
pub fn avg_distance_from_goal(results: &[EpisodeResult]) -> Result<f64, MetricsError> {
    check(results)?;
    Ok(results.iter().map(|r| r.final_distance).sum::<f64>() / results.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub low: f64,
    /// `None` for the overflow bin.
    pub high: Option<f64>,
    pub count: usize,
}

/// Failures binned by final distance into `[eᵢ, eᵢ₊₁)`. A leading
/// `[0, e₀)` bin catches failures that ended inside the first edge (for
/// example timeouts near the goal), so the counts always sum to the number
/// of failures.
pub fn failure_histogram(results: &[EpisodeResult], edges: &[f64]) -> Result<Vec<Bin>, MetricsError> {
    let valid = !edges.is_empty()
        && edges.iter().all(|e| e.is_finite() && *e >= 0.0)
        && edges.windows(2).all(|w| w[0] < w[1]);
    if !valid {
        return Err(MetricsError::InvalidEdges(edges.to_vec()));
    }
    let mut bins: Vec<Bin> = Vec::with_capacity(edges.len() + 1);
    if edges[0] > 0.0 {
        bins.push(Bin {
            low: 0.0,
            high: Some(edges[0]),
            count: 0,
        });
    }
    for (i, &low) in edges.iter().enumerate() {
        bins.push(Bin {
            low,
            high: edges.get(i + 1).copied(),
            count: 0,
        });
    }
    for r in results.iter().filter(|r| !r.success) {
        let d = r.final_distance;
        if let Some(b) = bins.iter_mut().rev().find(|b| d >= b.low) {
            b.count += 1;
        }
    }
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub spl: f64,
    pub success_rate: f64,
    pub avg_dist_from_goal: f64,
    pub n: usize,
    pub histogram: Vec<Bin>,
}

impl MetricsReport {
    pub fn compute(results: &[EpisodeResult], edges: &[f64]) -> Result<Self, MetricsError> {
        Ok(Self {
            spl: spl(results)?,
            success_rate: success_rate(results)?,
            avg_dist_from_goal: avg_distance_from_goal(results)?,
            n: results.len(),
            histogram: failure_histogram(results, edges)?,
        })
    }

    /// Aligned columns under the usual headers.
    pub fn table(&self) -> String {
        let headers = ["SPL", "Success rate", "Avg. dist. from goal", "Episodes"];
        let values = [
            format!("{:.4}", self.spl),
            format!("{:.4}", self.success_rate),
            format!("{:.4}", self.avg_dist_from_goal),
            self.n.to_string(),
        ];
        let widths: Vec<usize> = headers.iter().zip(&values).map(|(h, v)| h.len().max(v.len())).collect();
        let mut out = String::new();
        for (h, w) in headers.iter().zip(&widths) {
            let _ = write!(out, "{h:<w$}  ");
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        for (v, w) in values.iter().zip(&widths) {
            let _ = write!(out, "{v:<w$}  ");
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }

    /// `bin_low,bin_high,count`; the overflow bin has `bin_high` = `inf`.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for b in &self.histogram {
            let high = b.high.map_or_else(|| "inf".to_string(), |h| h.to_string());
            let _ = writeln!(out, "{},{},{}", b.low, high, b.count);
        }
        out
    }
}
