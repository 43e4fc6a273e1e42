//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeMap;

use geotx::model::{ParamTriple, UserGroup, GROUP_COUNT};
use geotx::rng::{self, Rng};
use geotx::synth::{Location, SynthSpec};
use nalgebra::DMatrix;

pub const R_KM: f64 = 6371.0088;

fn unit(lat: f64, lon: f64) -> [f64; 3] {
    let (la, lo) = (lat.to_radians(), lon.to_radians());
    [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
}

/// Central angle from unit vectors: `atan2(|a x b|, a . b)`.
pub fn great_circle_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let a = unit(lat1, lon1);
    let b = unit(lat2, lon2);
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    R_KM * norm.atan2(dot)
}

/// `max |F_a(x) - F_b(x)| * n_a * n_b` by counting at every pooled point.
pub fn ks_brute_numerator(a: &[f64], b: &[f64]) -> u64 {
    let (na, nb) = (a.len() as i64, b.len() as i64);
    a.iter()
        .chain(b)
        .map(|&x| {
            let ca = a.iter().filter(|&&v| v <= x).count() as i64;
            let cb = b.iter().filter(|&&v| v <= x).count() as i64;
            (ca * nb - cb * na).unsigned_abs()
        })
        .max()
        .unwrap_or(0)
}

pub fn ks_brute_d(a: &[f64], b: &[f64]) -> f64 {
    ks_brute_numerator(a, b) as f64 / (a.len() as f64 * b.len() as f64)
}

/// Stationary vector as the null space of `T^T - I` (smallest singular
/// vector), normalised to sum 1.
pub fn stationary_svd(t: &[[f64; GROUP_COUNT]; GROUP_COUNT]) -> [f64; GROUP_COUNT] {
    let m = DMatrix::from_fn(GROUP_COUNT, GROUP_COUNT, |i, j| {
        t[j][i] - if i == j { 1.0 } else { 0.0 }
    });
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let k = (0..GROUP_COUNT)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap();
    let row = vt.row(k);
    let sum: f64 = row.iter().sum();
    let mut pi = [0.0; GROUP_COUNT];
    for (p, v) in pi.iter_mut().zip(row.iter()) {
        *p = v / sum;
    }
    pi
}

/// Inverse-CDF draw from a continuous power law above `xmin`.
pub fn power_law_draw(g: &mut Rng, alpha: f64, xmin: f64) -> f64 {
    let u = 1.0 - rng::uniform01(g);
    xmin * u.powf(-1.0 / (alpha - 1.0))
}

/// Two locations per continent; every group of a continent shares them.
pub fn continent_sites() -> BTreeMap<UserGroup, Vec<Location>> {
    UserGroup::all()
        .into_iter()
        .map(|g| {
            let sites = match g.continent.label() {
                "AM" => vec![
                    Location::new(40.71, -74.01, Some("US")),
                    Location::new(-23.55, -46.63, Some("BR")),
                ],
                "AS" => vec![
                    Location::new(31.23, 121.47, Some("CN")),
                    Location::new(28.61, 77.21, Some("IN")),
                ],
                _ => vec![
                    Location::new(52.52, 13.40, Some("DE")),
                    Location::new(51.51, -0.13, Some("GB")),
                ],
            };
            (g, sites)
        })
        .collect()
}

/// Row-stochastic matrix with entries drawn from `[lo, 1)` and normalised.
pub fn random_stochastic(g: &mut Rng, lo: f64) -> [[f64; GROUP_COUNT]; GROUP_COUNT] {
    let mut t = [[0.0; GROUP_COUNT]; GROUP_COUNT];
    for row in &mut t {
        for x in row.iter_mut() {
            *x = lo + (1.0 - lo) * rng::uniform01(g);
        }
        let s: f64 = row.iter().sum();
        for x in row.iter_mut() {
            *x /= s;
        }
    }
    t
}

/// Random feasible spec with default strata.
pub fn random_spec(g: &mut Rng, n_records: usize) -> SynthSpec {
    let val = rng::range_inclusive(g, 1, 25) as f64;
    let tx_miner = rng::range_inclusive(g, 5, 60) as u32;
    let tx_merch = tx_miner + rng::range_inclusive(g, 2, 100) as u32;
    let params = ParamTriple::from_btc(val, tx_miner, tx_merch).unwrap();
    SynthSpec::new(n_records, params, random_stochastic(g, 0.2), continent_sites())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
