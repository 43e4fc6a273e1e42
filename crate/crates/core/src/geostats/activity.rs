use chrono::DateTime;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{is_country_code, ContinentRules};
use crate::model::{Continent, Dataset, TransactionRecord};

const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActivityFilter {
    Country(String),
    Continent(Continent),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActivityError {
    #[error("{0:?} is not an ISO 3166 alpha-2 code")]
    UnknownCountryCode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DailyCount {
    /// Days since the Unix epoch.
    pub day: i64,
    /// `YYYY-MM-DD`, UTC.
    pub date: String,
    pub count: usize,
}

pub fn day_of(timestamp: i64) -> i64 {
    timestamp.div_euclid(DAY)
}

pub fn date_label(day: i64) -> String {
    DateTime::from_timestamp(day * DAY, 0)
        .map(|d| d.date_naive().to_string())
        .unwrap_or_default()
}

/// Sent records per UTC day over the dataset window, zero-filled.
pub fn daily_activity(
    ds: &Dataset,
    filter: Option<&ActivityFilter>,
) -> Result<Vec<DailyCount>, ActivityError> {
    daily_activity_with(ds, filter, &ContinentRules::default())
}

pub fn daily_activity_with(
    ds: &Dataset,
    filter: Option<&ActivityFilter>,
    rules: &ContinentRules,
) -> Result<Vec<DailyCount>, ActivityError> {
    let matches: Box<dyn Fn(&TransactionRecord) -> bool> = match filter {
        None => Box::new(|_| true),
        Some(ActivityFilter::Country(code)) => {
            if !is_country_code(code) {
                return Err(ActivityError::UnknownCountryCode(code.clone()));
            }
            let code = code.to_ascii_uppercase();
            Box::new(move |r| r.sender.country_code.as_deref() == Some(code.as_str()))
        }
        Some(&ActivityFilter::Continent(c)) => {
            Box::new(move |r| rules.assign(&r.sender.geo).ok() == Some(c))
        }
    };
    let (start, end) = ds.window();
    let first = day_of(start);
    let mut counts = vec![0usize; (day_of(end) - first + 1) as usize];
    for r in ds.records().iter().filter(|r| matches(r)) {
        counts[(day_of(r.timestamp) - first) as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let day = first + i as i64;
            DailyCount {
                day,
                date: date_label(day),
                count,
            }
        })
        .collect())
}
