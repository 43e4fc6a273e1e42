//! Great-circle distance.

use crate::model::{Dataset, GeoPoint};
use crate::scalar::Scalar;

use super::empirical::{EmpiricalDistribution, Unit};

/// Mean Earth radius in km (IUGG).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Haversine distance in km, using the `atan2` form which stays accurate for
/// both tiny and near-antipodal separations.
pub fn haversine_km<S: Scalar>(a: &GeoPoint<S>, b: &GeoPoint<S>) -> S {
    let half = S::lit(0.5);
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let cc = phi1.cos() * phi2.cos();
    let s1 = (dphi * half).sin();
    let s2 = (dlambda * half).sin();
    let h = s1 * s1 + cc * s2 * s2;
    // 1 - h evaluated directly so near-antipodal pairs keep full precision.
    let t1 = ((phi1 + phi2) * half).sin();
    let t2 = (dlambda * half).cos();
    let hc = t1 * t1 + cc * t2 * t2;
    let c = S::lit(2.0) * h.max(S::zero()).sqrt().atan2(hc.max(S::zero()).sqrt());
    S::lit(EARTH_RADIUS_KM) * c
}

/// Sender-to-receiver distance of every record, in record order.
pub fn record_distances(ds: &Dataset) -> Vec<f64> {
    ds.records()
        .iter()
        .map(|r| haversine_km(&r.sender.geo, &r.receiver.geo))
        .collect()
}

/// Distribution of sender-to-receiver distances, one sample per record.
pub fn distance_distribution(ds: &Dataset) -> EmpiricalDistribution<f64> {
    EmpiricalDistribution::from_finite(record_distances(ds), Unit::Km)
}
