use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{total_cmp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Km,
    Seconds,
    Days,
    Btc,
    Count,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Km => "km",
            Unit::Seconds => "seconds",
            Unit::Days => "days",
            Unit::Btc => "btc",
            Unit::Count => "count",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmpiricalError {
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
}

/// Sorted sample of finite reals with a unit tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EmpiricalDistribution<S: Scalar = f64> {
    samples: Vec<S>,
    unit: Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SummaryStats<S: Scalar = f64> {
    pub mean: S,
    pub median: S,
    pub count: usize,
    pub min: S,
    pub max: S,
}

impl<S: Scalar> EmpiricalDistribution<S> {
    pub fn new(mut samples: Vec<S>, unit: Unit) -> Result<Self, EmpiricalError> {
        if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
            return Err(EmpiricalError::NonFiniteSample { index });
        }
        samples.sort_unstable_by(total_cmp);
        Ok(EmpiricalDistribution { samples, unit })
    }

    /// For samples already known to be finite (computed internally).
    pub(crate) fn from_finite(samples: Vec<S>, unit: Unit) -> Self {
        debug_assert!(samples.iter().all(|x| x.is_finite()));
        let mut samples = samples;
        samples.sort_unstable_by(total_cmp);
        EmpiricalDistribution { samples, unit }
    }

    pub fn samples(&self) -> &[S] {
        &self.samples
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min(&self) -> Option<S> {
        self.samples.first().copied()
    }

    pub fn max(&self) -> Option<S> {
        self.samples.last().copied()
    }

    /// Fraction of samples `<= x`.
    pub fn ecdf(&self, x: S) -> S {
        if self.samples.is_empty() {
            return S::zero();
        }
        let k = self.samples.partition_point(|&s| s <= x);
        S::of_usize(k) / S::of_usize(self.samples.len())
    }

    /// Linearly interpolated quantile (the usual "type 7" definition).
    pub fn quantile(&self, q: S) -> Option<S> {
        let n = self.samples.len();
        if n == 0 || !(q >= S::zero() && q <= S::one()) {
            return None;
        }
        let h = q * S::of_usize(n - 1);
        let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
        let hi = (lo + 1).min(n - 1);
        let frac = h - S::of_usize(lo);
        Some(self.samples[lo] + (self.samples[hi] - self.samples[lo]) * frac)
    }

    pub fn mean(&self) -> Option<S> {
        if self.samples.is_empty() {
            return None;
        }
        // Compensated summation keeps f32 means usable at 10^5 samples.
        let (mut sum, mut comp) = (S::zero(), S::zero());
        for &x in &self.samples {
            let y = x - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        Some(sum / S::of_usize(self.samples.len()))
    }

    pub fn summary(&self) -> Option<SummaryStats<S>> {
        Some(SummaryStats {
            mean: self.mean()?,
            median: self.quantile(S::lit(0.5))?,
            count: self.samples.len(),
            min: self.min()?,
            max: self.max()?,
        })
    }

    /// Applies a strictly increasing map, keeping the order.
    pub fn map_increasing(&self, unit: Unit, f: impl Fn(S) -> S) -> Self {
        EmpiricalDistribution::from_finite(self.samples.iter().map(|&x| f(x)).collect(), unit)
    }

    /// Samples `>= xmin` (a sorted suffix).
    pub fn tail(&self, xmin: S) -> &[S] {
        let k = self.samples.partition_point(|&s| s < xmin);
        &self.samples[k..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_on_construction() {
        let d = EmpiricalDistribution::new(vec![3.0, 1.0, 2.0], Unit::Km).unwrap();
        assert_eq!(d.samples(), &[1.0, 2.0, 3.0]);
        assert!(EmpiricalDistribution::new(vec![1.0, f64::NAN], Unit::Km).is_err());
    }

    #[test]
    fn ecdf_and_quantiles() {
        let d = EmpiricalDistribution::new(vec![1.0, 2.0, 2.0, 4.0], Unit::Count).unwrap();
        assert_eq!(d.ecdf(0.5), 0.0);
        assert_eq!(d.ecdf(2.0), 0.75);
        assert_eq!(d.ecdf(10.0), 1.0);
        assert_eq!(d.quantile(0.5), Some(2.0));
        assert_eq!(d.quantile(1.0), Some(4.0));
        assert_eq!(d.quantile(0.0), Some(1.0));
        assert_eq!(d.quantile(1.5), None);
        let s = d.summary().unwrap();
        assert_eq!(s.mean, 2.25);
        assert_eq!(s.count, 4);
        assert!(s.min <= s.median && s.median <= s.max);
    }

    #[test]
    fn empty_has_no_summary() {
        let d = EmpiricalDistribution::<f32>::new(vec![], Unit::Btc).unwrap();
        assert!(d.summary().is_none());
        assert_eq!(d.ecdf(1.0), 0.0);
    }

    #[test]
    fn tail_is_suffix() {
        let d = EmpiricalDistribution::new(vec![5.0, 1.0, 3.0, 3.0], Unit::Count).unwrap();
        assert_eq!(d.tail(3.0), &[3.0, 3.0, 5.0]);
        assert!(d.tail(6.0).is_empty());
    }
}
