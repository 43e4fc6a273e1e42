//! Distance, waiting-time, correlation and activity statistics.

mod activity;
mod correlation;
mod distance;
mod empirical;
mod histogram;
mod waiting;

pub use activity::{date_label, daily_activity, daily_activity_with, day_of, ActivityError, ActivityFilter, DailyCount};
pub use correlation::{
    correlation_report, pearson, CorrelationEntry, PearsonError, DISTANCE_VS_WAITING_TIME,
    SENDER_LAT_VS_DISTANCE, VALUE_VS_DISTANCE,
};
pub use distance::{distance_distribution, haversine_km, record_distances, EARTH_RADIUS_KM};
pub use empirical::{EmpiricalDistribution, EmpiricalError, SummaryStats, Unit};
pub use histogram::{
    bin_index, heatmap, linear_edges, log_edges, Histogram, Histogram2D, HistogramError, Scale,
    YField, LOG_SPAN,
};
pub use waiting::{waiting_times, WaitingError, WaitingSample, WaitingTimes, SECONDS_PER_DAY};
