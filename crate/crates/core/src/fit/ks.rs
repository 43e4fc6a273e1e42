//! Two-sample Kolmogorov-Smirnov test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geostats::EmpiricalDistribution;
use crate::scalar::Scalar;

/// Largest `n1 * n2` for which the exact p-value is computed.
pub const EXACT_LIMIT: u64 = 10_000;

const TERM_TOL: f64 = 1e-12;
/// Below this `lambda` the theta-function form of the Kolmogorov survival
/// function converges faster than the alternating series.
const SMALL_LAMBDA: f64 = 1.18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KsError {
    #[error("K-S test needs two non-empty samples")]
    EmptySample,
    #[error("exact p-value needs n1*n2 <= {EXACT_LIMIT}, got {0}")]
    TooLargeForExact(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KsMethod {
    #[default]
    Asymptotic,
    /// Exact null distribution by lattice-path counting (no ties assumed).
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KsResult<S: Scalar = f64> {
    pub d_statistic: S,
    pub p_value: S,
    pub n1: usize,
    pub n2: usize,
}

/// `max |c_a(x) * n_b - c_b(x) * n_a|` over all sample points, where `c`
/// counts samples `<= x`. Both inputs sorted ascending.
pub fn ks_numerator<S: Scalar>(a: &[S], b: &[S]) -> u64 {
    let (na, nb) = (a.len() as i128, b.len() as i128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: i128 = 0;
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        best = best.max((i as i128 * nb - j as i128 * na).abs());
    }
    // Past the end of one sample the gap only shrinks toward zero; the
    // position where the other sample resumes was already measured.
    best as u64
}

/// Same statistic as [`ks_numerator`], evaluated by binary search into a
/// large sorted `reference` for each point of a small sorted `sample`.
/// Runs in `O(m log n)` rather than `O(m + n)`.
pub fn ks_numerator_against<S: Scalar>(reference: &[S], sample: &[S]) -> u64 {
    let (n, m) = (reference.len() as i128, sample.len() as i128);
    let mut best: i128 = 0;
    let mut k = 0usize;
    while k < sample.len() {
        let v = sample[k];
        let below_g = k as i128;
        while k < sample.len() && sample[k] <= v {
            k += 1;
        }
        let le_g = k as i128;
        let lt_r = reference.partition_point(|&x| x < v) as i128;
        let le_r = lt_r + reference[lt_r as usize..].partition_point(|&x| x <= v) as i128;
        best = best
            .max((lt_r * m - below_g * n).abs())
            .max((le_r * m - le_g * n).abs());
    }
    best as u64
}

/// Kolmogorov survival function `Q(lambda) = P(K > lambda)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < SMALL_LAMBDA {
        // 1 - sqrt(2 pi)/lambda * sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1.. {
            let odd = f64::from(2 * k - 1);
            let term = (-odd * odd * c).exp();
            sum += term;
            if term < TERM_TOL {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1.. {
            let kf = f64::from(k);
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += sign * term;
            if term < TERM_TOL {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// Asymptotic p-value for statistic `d` with sample sizes `n1`, `n2`.
pub fn asymptotic_p(d: f64, n1: usize, n2: usize) -> f64 {
    let n_eff = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    kolmogorov_q(n_eff.sqrt() * d)
}

/// Exact `P(D >= d)` under the null given the integer statistic
/// `numerator = d * n1 * n2`, counting monotone lattice paths from `(0,0)`
/// to `(n1,n2)` that stay strictly inside `|i*n2 - j*n1| < numerator`.
pub fn exact_p(numerator: u64, n1: usize, n2: usize) -> Result<f64, KsError> {
    let prod = n1 as u64 * n2 as u64;
    if prod > EXACT_LIMIT {
        return Err(KsError::TooLargeForExact(prod));
    }
    if numerator == 0 {
        return Ok(1.0);
    }
    let t = numerator as i128;
    let inside = |i: usize, j: usize| ((i * n2) as i128 - (j * n1) as i128).abs() < t;
    // Path counts fit comfortably in f64 for n1*n2 <= 10^4 (at most C(200,100)).
    let mut row = vec![0.0f64; n2 + 1];
    for i in 0..=n1 {
        for j in 0..=n2 {
            row[j] = if !inside(i, j) {
                0.0
            } else if i == 0 && j == 0 {
                1.0
            } else {
                let up = if i > 0 { row[j] } else { 0.0 };
                let left = if j > 0 { row[j - 1] } else { 0.0 };
                up + left
            };
        }
    }
    let total = binomial(n1 + n2, n1);
    Ok((1.0 - row[n2] / total).clamp(0.0, 1.0))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn ks_two_sample<S: Scalar>(
    a: &EmpiricalDistribution<S>,
    b: &EmpiricalDistribution<S>,
) -> Result<KsResult<S>, KsError> {
    ks_two_sample_with(a, b, KsMethod::Asymptotic)
}

pub fn ks_two_sample_with<S: Scalar>(
    a: &EmpiricalDistribution<S>,
    b: &EmpiricalDistribution<S>,
    method: KsMethod,
) -> Result<KsResult<S>, KsError> {
    ks_sorted(a.samples(), b.samples(), method)
}

/// K-S test on two ascending slices.
pub fn ks_sorted<S: Scalar>(a: &[S], b: &[S], method: KsMethod) -> Result<KsResult<S>, KsError> {
    if a.is_empty() || b.is_empty() {
        return Err(KsError::EmptySample);
    }
    let num = if a.len() > 8 * b.len() {
        ks_numerator_against(a, b)
    } else if b.len() > 8 * a.len() {
        ks_numerator_against(b, a)
    } else {
        ks_numerator(a, b)
    };
    result_from_numerator(num, a.len(), b.len(), method)
}

pub fn result_from_numerator<S: Scalar>(
    numerator: u64,
    n1: usize,
    n2: usize,
    method: KsMethod,
) -> Result<KsResult<S>, KsError> {
    let denom = n1 as f64 * n2 as f64;
    let d = numerator as f64 / denom;
    let p = match method {
        KsMethod::Asymptotic => asymptotic_p(d, n1, n2),
        KsMethod::Exact => exact_p(numerator, n1, n2)?,
    };
    Ok(KsResult {
        d_statistic: S::lit(d),
        p_value: S::lit(p),
        n1,
        n2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geostats::Unit;
    use proptest::prelude::*;

    fn dist(v: &[f64]) -> EmpiricalDistribution<f64> {
        EmpiricalDistribution::new(v.to_vec(), Unit::Km).unwrap()
    }

    #[test]
    fn identical_samples() {
        let a = dist(&[3.0, 1.0, 2.0, 2.0]);
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.d_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn disjoint_supports() {
        let r = ks_two_sample(&dist(&[1.0, 2.0, 3.0]), &dist(&[10.0, 11.0, 12.0])).unwrap();
        assert_eq!(r.d_statistic, 1.0);
    }

    #[test]
    fn shifted_four_point_samples() {
        // Frozen from an exhaustive ECDF comparison at every sample point.
        let r = ks_two_sample(&dist(&[1.0, 2.0, 3.0, 4.0]), &dist(&[2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_eq!(r.d_statistic, 0.25);
        assert_eq!(r.n1, 4);
    }

    #[test]
    fn empty_sample_rejected() {
        assert_eq!(ks_two_sample(&dist(&[]), &dist(&[1.0])).unwrap_err(), KsError::EmptySample);
    }

    #[test]
    fn kolmogorov_known_values() {
        // Standard table: Q(1.36) ~ 0.0494, Q(1.63) ~ 0.0098, Q(0.5) ~ 0.9639.
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 2e-4);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 2e-4);
        assert!((kolmogorov_q(0.5) - 0.9639).abs() < 2e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
        // Both series agree where they meet.
        let below = kolmogorov_q(SMALL_LAMBDA - 1e-12);
        let above = kolmogorov_q(SMALL_LAMBDA);
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn exact_small_cases() {
        // n1 = n2 = 1: D = 1 always, so P(D >= 1) = 1.
        assert_eq!(exact_p(1, 1, 1).unwrap(), 1.0);
        // n1 = n2 = 2, D = 1 needs full separation: 2 of 6 orderings.
        assert!((exact_p(4, 2, 2).unwrap() - 2.0 / 6.0).abs() < 1e-15);
        // n1 = n2 = 3, D = 1: 2 of 20.
        assert!((exact_p(9, 3, 3).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(exact_p(1, 200, 200), Err(KsError::TooLargeForExact(_))));
    }

    proptest! {
        #[test]
        fn symmetric_and_fast_path_agrees(
            a in proptest::collection::vec(0u8..30, 1..60),
            b in proptest::collection::vec(0u8..30, 1..60),
        ) {
            let mut a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let mut b: Vec<f64> = b.into_iter().map(f64::from).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let n = ks_numerator(&a, &b);
            prop_assert_eq!(n, ks_numerator(&b, &a));
            prop_assert_eq!(n, ks_numerator_against(&a, &b));
            prop_assert_eq!(n, ks_numerator_against(&b, &a));
        }

        #[test]
        fn invariant_under_monotone_transform(
            a in proptest::collection::vec(-50.0f64..50.0, 1..40),
            b in proptest::collection::vec(-50.0f64..50.0, 1..40),
        ) {
            let da = dist(&a);
            let db = dist(&b);
            let f = |x: f64| x.exp() * 3.0 + x;
            let r = ks_two_sample(&da, &db).unwrap();
            let t = ks_two_sample(&da.map_increasing(Unit::Km, f), &db.map_increasing(Unit::Km, f)).unwrap();
            prop_assert_eq!(r.d_statistic, t.d_statistic);
        }

        #[test]
        fn p_monotone_in_d(n1 in 1usize..300, n2 in 1usize..300, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(asymptotic_p(hi, n1, n2) <= asymptotic_p(lo, n1, n2));
        }

        #[test]
        fn exact_p_monotone(n1 in 1usize..40, n2 in 1usize..40, t1 in 0u64..1600, t2 in 0u64..1600) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let p_hi = exact_p(hi, n1, n2).unwrap();
            let p_lo = exact_p(lo, n1, n2).unwrap();
            prop_assert!(p_hi <= p_lo + 1e-12);
        }
    }
}
