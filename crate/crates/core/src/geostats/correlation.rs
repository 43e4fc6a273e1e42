use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::Dataset;
use crate::scalar::Scalar;

use super::distance::record_distances;
use super::waiting::WaitingTimes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PearsonError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two pairs, got {0}")]
    TooFew(usize),
    #[error("a series has zero variance")]
    ZeroVariance,
    #[error("a series contains a non-finite value")]
    NonFinite,
}

/// Pearson product-moment correlation, clamped to `[-1, 1]`.
pub fn pearson<S: Scalar>(x: &[S], y: &[S]) -> Result<S, PearsonError> {
    if x.len() != y.len() {
        return Err(PearsonError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(PearsonError::TooFew(n));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(PearsonError::NonFinite);
    }
    let nf = S::of_usize(n);
    let mx = x.iter().fold(S::zero(), |a, &v| a + v) / nf;
    let my = y.iter().fold(S::zero(), |a, &v| a + v) / nf;
    let (mut sxy, mut sxx, mut syy) = (S::zero(), S::zero(), S::zero());
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= S::zero() || syy <= S::zero() {
        return Err(PearsonError::ZeroVariance);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-S::one()).min(S::one()))
}

/// A named correlation; failures are reported in place rather than aborting
/// the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEntry {
    pub r: Option<f64>,
    pub n: usize,
    pub error: Option<String>,
}

impl CorrelationEntry {
    fn of(x: &[f64], y: &[f64]) -> Self {
        match pearson(x, y) {
            Ok(r) => CorrelationEntry {
                r: Some(r),
                n: x.len(),
                error: None,
            },
            Err(e) => CorrelationEntry {
                r: None,
                n: x.len(),
                error: Some(e.to_string()),
            },
        }
    }
}

pub const VALUE_VS_DISTANCE: &str = "value_vs_distance";
pub const SENDER_LAT_VS_DISTANCE: &str = "sender_lat_vs_distance";
pub const DISTANCE_VS_WAITING_TIME: &str = "distance_vs_waiting_time";

/// Correlations of value, sender latitude and (when linkage exists) the
/// spending transaction's waiting time against distance.
pub fn correlation_report(
    ds: &Dataset,
    waiting: Option<&WaitingTimes>,
) -> BTreeMap<String, CorrelationEntry> {
    let dist = record_distances(ds);
    let value: Vec<f64> = ds.records().iter().map(|r| r.value.to_btc()).collect();
    let lat: Vec<f64> = ds.records().iter().map(|r| r.sender.geo.lat).collect();
    let mut out = BTreeMap::new();
    out.insert(VALUE_VS_DISTANCE.to_string(), CorrelationEntry::of(&value, &dist));
    out.insert(SENDER_LAT_VS_DISTANCE.to_string(), CorrelationEntry::of(&lat, &dist));
    if let Some(w) = waiting.filter(|w| w.has_linkage()) {
        let d: Vec<f64> = w.samples.iter().map(|s| dist[s.spender]).collect();
        let t: Vec<f64> = w.samples.iter().map(|s| s.seconds as f64).collect();
        out.insert(DISTANCE_VS_WAITING_TIME.to_string(), CorrelationEntry::of(&d, &t));
    }
    out
}
