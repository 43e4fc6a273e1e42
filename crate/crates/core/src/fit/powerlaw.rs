//! Power-law exponent estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geostats::EmpiricalDistribution;
use crate::rng;
use crate::scalar::Scalar;

pub const MIN_SAMPLES: usize = 50;
pub const MIN_TAIL: usize = 10;
pub const MAX_CANDIDATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FitMethod {
    #[default]
    #[serde(rename = "mle")]
    Mle,
    #[serde(rename = "loglog_regression")]
    LogLogRegression,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("sample {0} is not positive")]
    NonPositiveSample(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<S: Scalar = f64> {
    /// Lower bound on xmin candidates (2 for degree data).
    pub min_xmin: Option<S>,
    pub max_candidates: usize,
    pub min_tail: usize,
    /// Logarithmic bins for the regression method.
    pub regression_bins: usize,
}

impl<S: Scalar> Default for FitOptions<S> {
    fn default() -> Self {
        FitOptions {
            min_xmin: None,
            max_candidates: MAX_CANDIDATES,
            min_tail: MIN_TAIL,
            regression_bins: 30,
        }
    }
}

impl<S: Scalar> FitOptions<S> {
    /// Settings for integer degree data: xmin of at least 2.
    pub fn degrees() -> Self {
        FitOptions {
            min_xmin: Some(S::lit(2.0)),
            ..Self::default()
        }
    }
}

/// `alpha` is the density exponent: `p(x) ~ x^-alpha` for `x >= xmin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PowerLawFit<S: Scalar = f64> {
    pub alpha: S,
    pub xmin: S,
    pub n_tail: usize,
    pub method: FitMethod,
    /// One-sample K-S distance between the tail and the fitted law (MLE only).
    pub ks_distance: Option<S>,
}

pub fn fit_power_law<S: Scalar>(
    samples: &EmpiricalDistribution<S>,
    method: FitMethod,
) -> Result<PowerLawFit<S>, FitError> {
    fit_power_law_with(samples, method, &FitOptions::default())
}

pub fn fit_power_law_with<S: Scalar>(
    samples: &EmpiricalDistribution<S>,
    method: FitMethod,
    opts: &FitOptions<S>,
) -> Result<PowerLawFit<S>, FitError> {
    let xs = samples.samples();
    if xs.len() < MIN_SAMPLES {
        return Err(FitError::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: xs.len(),
        });
    }
    if let Some(&x) = xs.first().filter(|x| **x <= S::zero()) {
        return Err(FitError::NonPositiveSample(x.as_f64()));
    }
    match method {
        FitMethod::Mle => fit_mle(xs, opts),
        FitMethod::LogLogRegression => fit_regression(xs, opts),
    }
}

/// Hill estimator on the sorted tail `x >= xmin`.
pub fn hill_alpha<S: Scalar>(tail: &[S], xmin: S) -> S {
    let s = tail.iter().fold(S::zero(), |acc, &x| acc + (x / xmin).ln());
    S::one() + S::of_usize(tail.len()) / s
}

/// Max distance between the tail's ECDF and `1 - (x/xmin)^(1-alpha)`.
fn tail_ks<S: Scalar>(tail: &[S], xmin: S, alpha: S) -> S {
    let n = S::of_usize(tail.len());
    let e = S::one() - alpha;
    let mut d = S::zero();
    for (i, &x) in tail.iter().enumerate() {
        let f = S::one() - (x / xmin).powf(e);
        let lo = S::of_usize(i) / n;
        let hi = S::of_usize(i + 1) / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Unique values admissible as xmin, thinned by quantile to at most `cap`.
fn candidates<S: Scalar>(xs: &[S], opts: &FitOptions<S>) -> Vec<S> {
    let last_allowed = xs.len().saturating_sub(opts.min_tail);
    let mut uniq: Vec<S> = Vec::new();
    for &x in &xs[..=last_allowed.min(xs.len() - 1)] {
        if opts.min_xmin.is_some_and(|m| x < m) {
            continue;
        }
        if uniq.last() != Some(&x) {
            uniq.push(x);
        }
    }
    let k = uniq.len();
    if k <= opts.max_candidates || opts.max_candidates < 2 {
        return uniq;
    }
    let cap = opts.max_candidates;
    let mut out: Vec<S> = (0..cap)
        .map(|i| uniq[(i * (k - 1) + (cap - 1) / 2) / (cap - 1)])
        .collect();
    out.dedup();
    out
}

fn fit_mle<S: Scalar>(xs: &[S], opts: &FitOptions<S>) -> Result<PowerLawFit<S>, FitError> {
    let cands = candidates(xs, opts);
    let best = cands
        .par_iter()
        .filter_map(|&xmin| {
            let start = xs.partition_point(|&x| x < xmin);
            let tail = &xs[start..];
            if tail.len() < opts.min_tail {
                return None;
            }
            let alpha = hill_alpha(tail, xmin);
            if !alpha.is_finite() {
                return None;
            }
            Some((tail_ks(tail, xmin, alpha), xmin, alpha, tail.len()))
        })
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    let (d, xmin, alpha, n_tail) = best.ok_or(FitError::InsufficientSamples {
        needed: opts.min_tail,
        got: 0,
    })?;
    Ok(PowerLawFit {
        alpha,
        xmin,
        n_tail,
        method: FitMethod::Mle,
        ks_distance: Some(d),
    })
}

fn fit_regression<S: Scalar>(xs: &[S], opts: &FitOptions<S>) -> Result<PowerLawFit<S>, FitError> {
    let start = opts
        .min_xmin
        .map_or(0, |m| xs.partition_point(|&x| x < m));
    let tail = &xs[start..];
    let insufficient = FitError::InsufficientSamples {
        needed: opts.min_tail,
        got: tail.len(),
    };
    if tail.len() < opts.min_tail {
        return Err(insufficient);
    }
    let (lo, hi) = (tail[0], tail[tail.len() - 1]);
    if hi <= lo {
        return Err(insufficient);
    }
    let bins = opts.regression_bins.max(2);
    let edges = crate::geostats::log_edges(lo, hi, bins);
    let hist = crate::geostats::Histogram::from_samples(tail, edges);
    let n = S::of_usize(tail.len());
    let pts: Vec<(S, S)> = hist
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| {
            let (a, b) = (hist.edges[i], hist.edges[i + 1]);
            let density = S::of_usize(c) / (n * (b - a));
            ((a * b).sqrt().ln(), density.ln())
        })
        .collect();
    if pts.len() < 2 {
        return Err(insufficient);
    }
    let m = S::of_usize(pts.len());
    let mx = pts.iter().fold(S::zero(), |s, p| s + p.0) / m;
    let my = pts.iter().fold(S::zero(), |s, p| s + p.1) / m;
    let (mut sxy, mut sxx) = (S::zero(), S::zero());
    for &(x, y) in &pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(PowerLawFit {
        alpha: -(sxy / sxx),
        xmin: lo,
        n_tail: tail.len(),
        method: FitMethod::LogLogRegression,
        ks_distance: None,
    })
}

/// Inverse-CDF draw from `p(x) ~ x^-alpha`, `x >= xmin`, `alpha > 1`.
pub fn sample_power_law<R: rand_chacha::rand_core::RngCore>(rng: &mut R, alpha: f64, xmin: f64) -> f64 {
    xmin * rng::uniform_open0(rng).powf(-1.0 / (alpha - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geostats::Unit;
    use proptest::prelude::*;

    fn draws(alpha: f64, n: usize, seed: u64) -> EmpiricalDistribution<f64> {
        let mut g = rng::seeded(seed);
        let v = (0..n).map(|_| sample_power_law(&mut g, alpha, 1.0)).collect();
        EmpiricalDistribution::new(v, Unit::Seconds).unwrap()
    }

    #[test]
    fn mle_recovers_exponent() {
        let fit = fit_power_law(&draws(1.5, 100_000, 5), FitMethod::Mle).unwrap();
        assert!((fit.alpha - 1.5).abs() < 0.05, "{fit:?}");
        assert!(fit.n_tail >= MIN_TAIL);
        assert!(fit.xmin >= 1.0);
    }

    #[test]
    fn single_precision_fit() {
        let d = draws(2.5, 20_000, 8);
        let d32 = EmpiricalDistribution::new(d.samples().iter().map(|&x| x as f32).collect(), Unit::Seconds).unwrap();
        let fit = fit_power_law(&d32, FitMethod::Mle).unwrap();
        assert!((fit.alpha - 2.5).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn regression_is_roughly_right() {
        let fit = fit_power_law(&draws(2.5, 100_000, 6), FitMethod::LogLogRegression).unwrap();
        assert!((fit.alpha - 2.5).abs() < 0.25, "{fit:?}");
        assert_eq!(fit.method, FitMethod::LogLogRegression);
    }

    #[test]
    fn degenerate_inputs() {
        let same = EmpiricalDistribution::new(vec![3.0; 100], Unit::Count).unwrap();
        assert!(matches!(
            fit_power_law(&same, FitMethod::Mle),
            Err(FitError::InsufficientSamples { .. })
        ));
        assert!(matches!(
            fit_power_law(&same, FitMethod::LogLogRegression),
            Err(FitError::InsufficientSamples { .. })
        ));
        let few = EmpiricalDistribution::new(vec![1.0, 2.0], Unit::Count).unwrap();
        assert!(matches!(
            fit_power_law(&few, FitMethod::Mle),
            Err(FitError::InsufficientSamples { needed: 50, got: 2 })
        ));
        let mut v: Vec<f64> = (1..=60).map(f64::from).collect();
        v[0] = 0.0;
        let zero = EmpiricalDistribution::new(v, Unit::Count).unwrap();
        assert_eq!(fit_power_law(&zero, FitMethod::Mle), Err(FitError::NonPositiveSample(0.0)));
    }

    #[test]
    fn degree_options_enforce_xmin() {
        let d = draws(2.0, 5_000, 9).map_increasing(Unit::Count, f64::floor);
        let fit = fit_power_law_with(&d, FitMethod::Mle, &FitOptions::degrees()).unwrap();
        assert!(fit.xmin >= 2.0);
    }

    #[test]
    fn candidate_thinning() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        let c = candidates(&xs, &FitOptions::default());
        assert_eq!(c.len(), MAX_CANDIDATES);
        assert_eq!(c[0], 1.0);
        assert_eq!(*c.last().unwrap(), 991.0);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn scale_invariance(seed in 0u64..1000, c in 0.01f64..100.0) {
            let d = draws(1.8, 400, seed);
            let scaled = d.map_increasing(Unit::Seconds, |x| x * c);
            let a = fit_power_law(&d, FitMethod::Mle).unwrap();
            let b = fit_power_law(&scaled, FitMethod::Mle).unwrap();
            prop_assert!((a.alpha - b.alpha).abs() < 1e-9, "{a:?} {b:?}");
            prop_assert!((a.xmin * c - b.xmin).abs() <= 1e-9 * b.xmin);
        }
    }
}
