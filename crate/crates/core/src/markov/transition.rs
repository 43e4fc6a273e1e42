use serde::{Deserialize, Serialize};

use crate::model::{Dataset, UserGroup, GROUP_COUNT};
use crate::scalar::Scalar;

use super::{Classification, MarkovError};

pub const MAX_ITERATIONS: usize = 1_000_000;
const ROW_TOL: f64 = 1e-12;

pub type Counts = [[u64; GROUP_COUNT]; GROUP_COUNT];

/// Row-stochastic 9x9 matrix in [`UserGroup`] index order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<S: Scalar = f64> {
    probs: [[S; GROUP_COUNT]; GROUP_COUNT],
    counts: Option<Counts>,
    uniform_rows: [bool; GROUP_COUNT],
}

impl<S: Scalar> TransitionMatrix<S> {
    /// Relative frequencies; rows with no outgoing records become uniform
    /// and are flagged.
    pub fn from_counts(counts: Counts) -> Self {
        let mut probs = [[S::zero(); GROUP_COUNT]; GROUP_COUNT];
        let mut uniform_rows = [false; GROUP_COUNT];
        let ninth = S::one() / S::of_usize(GROUP_COUNT);
        for (i, row) in counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                probs[i] = [ninth; GROUP_COUNT];
                uniform_rows[i] = true;
            } else {
                let t = S::lit(total as f64);
                for (p, &c) in probs[i].iter_mut().zip(row) {
                    *p = S::lit(c as f64) / t;
                }
            }
        }
        TransitionMatrix {
            probs,
            counts: Some(counts),
            uniform_rows,
        }
    }

    /// Validates a given matrix: entries in `[0, 1]`, rows summing to 1.
    pub fn from_probs(probs: [[S; GROUP_COUNT]; GROUP_COUNT]) -> Result<Self, MarkovError> {
        let tol = S::lit(ROW_TOL).max(S::epsilon() * S::lit(16.0));
        for (i, row) in probs.iter().enumerate() {
            let sum = row.iter().fold(S::zero(), |a, &p| a + p);
            let bad_entry = row.iter().any(|&p| !(p >= S::zero() && p <= S::one()));
            if bad_entry || (sum - S::one()).abs() > tol {
                return Err(MarkovError::NotStochastic {
                    row: UserGroup::from_index(i).label(),
                    sum: sum.as_f64(),
                });
            }
        }
        Ok(TransitionMatrix {
            probs,
            counts: None,
            uniform_rows: [false; GROUP_COUNT],
        })
    }

    pub fn uniform() -> Self {
        let ninth = S::one() / S::of_usize(GROUP_COUNT);
        TransitionMatrix {
            probs: [[ninth; GROUP_COUNT]; GROUP_COUNT],
            counts: None,
            uniform_rows: [false; GROUP_COUNT],
        }
    }

    pub fn probs(&self) -> &[[S; GROUP_COUNT]; GROUP_COUNT] {
        &self.probs
    }

    pub fn get(&self, from: UserGroup, to: UserGroup) -> S {
        self.probs[from.index()][to.index()]
    }

    pub fn row(&self, from: UserGroup) -> &[S; GROUP_COUNT] {
        &self.probs[from.index()]
    }

    pub fn counts(&self) -> Option<&Counts> {
        self.counts.as_ref()
    }

    /// Groups with no observed outgoing records (filled uniformly).
    pub fn uniform_rows(&self) -> Vec<UserGroup> {
        (0..GROUP_COUNT)
            .filter(|&i| self.uniform_rows[i])
            .map(UserGroup::from_index)
            .collect()
    }

    /// `v T` for a row vector `v`.
    pub fn left_mul(&self, v: &[S; GROUP_COUNT]) -> [S; GROUP_COUNT] {
        let mut out = [S::zero(); GROUP_COUNT];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(&self.probs[i]) {
                *o += vi * p;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &[[S; GROUP_COUNT]; GROUP_COUNT]) -> S {
        self.probs
            .iter()
            .flatten()
            .zip(other.iter().flatten())
            .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Sender-group by receiver-group record counts; records with an
/// unclassified endpoint are skipped.
pub fn transition_counts(ds: &Dataset, cls: &Classification) -> Counts {
    let mut counts = [[0u64; GROUP_COUNT]; GROUP_COUNT];
    for r in ds.records() {
        if let (Some(s), Some(t)) = (
            cls.group_of(&r.sender.address_id),
            cls.group_of(&r.receiver.address_id),
        ) {
            counts[s.index()][t.index()] += 1;
        }
    }
    counts
}

pub fn estimate_transition<S: Scalar>(ds: &Dataset, cls: &Classification) -> TransitionMatrix<S> {
    TransitionMatrix::from_counts(transition_counts(ds, cls))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Stationary<S: Scalar = f64> {
    pub pi: [S; GROUP_COUNT],
    pub iterations: usize,
    /// `max |(pi T - pi)_i|` at the returned vector.
    pub residual: S,
}

/// Left fixed point of `t` by power iteration from the uniform vector;
/// stops when successive iterates differ by less than `1e-12` (or a few ulps
/// for low-precision scalars) in the max norm.
pub fn stationary_distribution<S: Scalar>(t: &TransitionMatrix<S>) -> Result<Stationary<S>, MarkovError> {
    let tol = S::fixed_point_tol();
    let mut pi = [S::one() / S::of_usize(GROUP_COUNT); GROUP_COUNT];
    let mut delta = S::infinity();
    for it in 1..=MAX_ITERATIONS {
        let mut next = t.left_mul(&pi);
        let sum = next.iter().fold(S::zero(), |a, &x| a + x);
        for x in &mut next {
            *x /= sum;
        }
        delta = next
            .iter()
            .zip(&pi)
            .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        pi = next;
        if delta < tol {
            let after = t.left_mul(&pi);
            let residual = after
                .iter()
                .zip(&pi)
                .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()));
            return Ok(Stationary {
                pi,
                iterations: it,
                residual,
            });
        }
    }
    Err(MarkovError::NoConvergence {
        iterations: MAX_ITERATIONS,
        delta: delta.as_f64(),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct Repr<S: Scalar> {
    order: Vec<UserGroup>,
    probs: [[S; GROUP_COUNT]; GROUP_COUNT],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Counts>,
    #[serde(default)]
    uniform_rows: Vec<UserGroup>,
}

impl<S: Scalar> Serialize for TransitionMatrix<S> {
    fn serialize<Se: serde::Serializer>(&self, s: Se) -> Result<Se::Ok, Se::Error> {
        Repr {
            order: UserGroup::all().to_vec(),
            probs: self.probs,
            counts: self.counts,
            uniform_rows: self.uniform_rows(),
        }
        .serialize(s)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for TransitionMatrix<S> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = Repr::<S>::deserialize(d)?;
        if r.order != UserGroup::all() {
            return Err(D::Error::custom("transition matrix order must be the standard group order"));
        }
        let mut m = TransitionMatrix::from_probs(r.probs).map_err(D::Error::custom)?;
        m.counts = r.counts;
        for g in r.uniform_rows {
            m.uniform_rows[g.index()] = true;
        }
        Ok(m)
    }
}
