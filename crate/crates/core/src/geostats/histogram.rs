use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Dataset;
use crate::scalar::Scalar;

use super::distance::record_distances;
use super::waiting::{WaitingTimes, SECONDS_PER_DAY};

/// y-axis span (max / min positive) beyond which heatmaps use log edges.
pub const LOG_SPAN: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YField {
    /// Waiting time of the spent output, in days.
    WaitingTime,
    /// Value in BTC.
    Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistogramError {
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("no data to bin")]
    EmptyDataset,
}

/// `n` equal-width edges over `[lo, hi]`; a zero-width range is widened by
/// half a unit on each side.
pub fn linear_edges<S: Scalar>(lo: S, hi: S, bins: usize) -> Vec<S> {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - S::lit(0.5), lo + S::lit(0.5))
    };
    let w = (hi - lo) / S::of_usize(bins);
    let mut e: Vec<S> = (0..=bins).map(|i| lo + w * S::of_usize(i)).collect();
    e[bins] = hi;
    e
}

/// Log-spaced edges over `[lo, hi]`, `lo > 0`.
pub fn log_edges<S: Scalar>(lo: S, hi: S, bins: usize) -> Vec<S> {
    let mut e: Vec<S> = linear_edges(lo.ln(), hi.ln(), bins)
        .into_iter()
        .map(S::exp)
        .collect();
    e[0] = lo;
    e[bins] = hi;
    e
}

/// Index of the half-open bin `[e_i, e_{i+1})` holding `x`, with the last
/// bin closed on the right.
pub fn bin_index<S: Scalar>(edges: &[S], x: S) -> Option<usize> {
    let n = edges.len().checked_sub(1)?;
    if n == 0 || !(x >= edges[0] && x <= edges[n]) {
        return None;
    }
    let k = edges.partition_point(|&e| e <= x);
    Some(k.saturating_sub(1).min(n - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct Histogram<S: Scalar = f64> {
    pub edges: Vec<S>,
    pub counts: Vec<usize>,
}

impl<S: Scalar> Histogram<S> {
    pub fn from_samples(samples: &[S], edges: Vec<S>) -> Self {
        let mut counts = vec![0; edges.len().saturating_sub(1)];
        for &x in samples {
            if let Some(i) = bin_index(&edges, x) {
                counts[i] += 1;
            }
        }
        Histogram { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct Histogram2D<S: Scalar = f64> {
    pub x_edges: Vec<S>,
    pub y_edges: Vec<S>,
    pub y_scale: Scale,
    /// `counts[i][j]` holds pairs in x bin `i` and y bin `j`.
    pub counts: Vec<Vec<usize>>,
    /// Pairs left out because y was non-positive on a log axis.
    pub excluded: usize,
}

impl<S: Scalar> Histogram2D<S> {
    /// Bins pairs on data-driven edges: linear x; y linear, or log over the
    /// positive values when they span more than [`LOG_SPAN`].
    pub fn from_pairs(pairs: &[(S, S)], x_bins: usize, y_bins: usize) -> Result<Self, HistogramError> {
        if x_bins == 0 || y_bins == 0 {
            return Err(HistogramError::ZeroBins);
        }
        if pairs.is_empty() {
            return Err(HistogramError::EmptyDataset);
        }
        let fold = |f: fn(&(S, S)) -> S| {
            pairs.iter().map(f).fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
        };
        let (xlo, xhi) = fold(|p| p.0);
        let (ylo, yhi) = fold(|p| p.1);
        let ypos = pairs
            .iter()
            .map(|p| p.1)
            .filter(|&y| y > S::zero())
            .fold(S::infinity(), S::min);
        let y_scale = if ypos.is_finite() && yhi / ypos > S::lit(LOG_SPAN) {
            Scale::Log
        } else {
            Scale::Linear
        };
        let x_edges = linear_edges(xlo, xhi, x_bins);
        let y_edges = match y_scale {
            Scale::Log => log_edges(ypos, yhi, y_bins),
            Scale::Linear => linear_edges(ylo, yhi, y_bins),
        };
        let mut counts = vec![vec![0usize; y_bins]; x_bins];
        let mut excluded = 0;
        for &(x, y) in pairs {
            match (bin_index(&x_edges, x), bin_index(&y_edges, y)) {
                (Some(i), Some(j)) => counts[i][j] += 1,
                _ => excluded += 1,
            }
        }
        Ok(Histogram2D {
            x_edges,
            y_edges,
            y_scale,
            counts,
            excluded,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

/// Distance (km) against waiting time (days) or value (BTC).
///
/// Waiting-time pairs use the spending record's distance; they need the
/// output of [`super::waiting_times`].
pub fn heatmap(
    ds: &Dataset,
    y_field: YField,
    x_bins: usize,
    y_bins: usize,
    waiting: Option<&WaitingTimes>,
) -> Result<Histogram2D<f64>, HistogramError> {
    let dist = record_distances(ds);
    let pairs: Vec<(f64, f64)> = match y_field {
        YField::Value => ds
            .records()
            .iter()
            .zip(&dist)
            .map(|(r, &d)| (d, r.value.to_btc()))
            .collect(),
        YField::WaitingTime => waiting
            .map(|w| {
                w.samples
                    .iter()
                    .map(|s| (dist[s.spender], s.seconds as f64 / SECONDS_PER_DAY))
                    .collect()
            })
            .unwrap_or_default(),
    };
    Histogram2D::from_pairs(&pairs, x_bins, y_bins)
}
