use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Dataset, OutputRef};

use super::empirical::{EmpiricalDistribution, Unit};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WaitingError {
    #[error("transaction {tx_id:?} spends an output of {creator:?} before it was created")]
    NegativeWaitingTime { tx_id: String, creator: String },
}

/// One resolved spend: record indices into the dataset and the idle time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WaitingSample {
    pub spender: usize,
    pub creator: usize,
    pub seconds: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaitingTimes {
    pub samples: Vec<WaitingSample>,
    /// Inputs naming a transaction absent from the dataset.
    pub unresolved: usize,
    /// Later spends of an output already spent; only the first counts.
    pub repeated: usize,
}

impl WaitingTimes {
    pub fn has_linkage(&self) -> bool {
        !self.samples.is_empty()
    }

    pub fn seconds(&self) -> EmpiricalDistribution<f64> {
        EmpiricalDistribution::from_finite(
            self.samples.iter().map(|s| s.seconds as f64).collect(),
            Unit::Seconds,
        )
    }

    pub fn days(&self) -> EmpiricalDistribution<f64> {
        EmpiricalDistribution::from_finite(
            self.samples
                .iter()
                .map(|s| s.seconds as f64 / SECONDS_PER_DAY)
                .collect(),
            Unit::Days,
        )
    }
}

/// Time between each output's creation and its (first) spend.
///
/// Records are visited in dataset order, so when an output is referenced
/// more than once the earliest spend is kept and the rest are counted in
/// [`WaitingTimes::repeated`].
pub fn waiting_times(ds: &Dataset) -> Result<WaitingTimes, WaitingError> {
    let mut seen: HashSet<&OutputRef> = HashSet::new();
    let mut out = WaitingTimes {
        samples: Vec::new(),
        unresolved: 0,
        repeated: 0,
    };
    for (i, rec) in ds.records().iter().enumerate() {
        for input in &rec.inputs {
            let Some(c) = ds.position(&input.tx_id) else {
                out.unresolved += 1;
                continue;
            };
            if !seen.insert(input) {
                out.repeated += 1;
                continue;
            }
            let creator = &ds.records()[c];
            let seconds = rec.timestamp - creator.timestamp;
            if seconds < 0 {
                return Err(WaitingError::NegativeWaitingTime {
                    tx_id: rec.tx_id.clone(),
                    creator: creator.tx_id.clone(),
                });
            }
            out.samples.push(WaitingSample {
                spender: i,
                creator: c,
                seconds,
            });
        }
    }
    Ok(out)
}
