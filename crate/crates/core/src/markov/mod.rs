//! Nine-state Markov model of transactions between user groups.
//!
//! Addresses are classified into (role, continent) groups, the group-to-group
//! transition frequencies and per-pair distance samples are estimated from
//! the records, and synthetic transactions are generated by walking the
//! chain and drawing a distance from the kernel of each step.

mod classify;
mod transition;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dataset, ParamTriple, UserGroup, GROUP_COUNT};
use crate::rng::{self, Cumulative};
use crate::scalar::Scalar;

pub use classify::{classify, role_for, AddressProfiles, Classification};
pub use transition::{
    estimate_transition, stationary_distribution, transition_counts, Counts, Stationary,
    TransitionMatrix, MAX_ITERATIONS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("power iteration did not converge after {iterations} iterations (last change {delta:e})")]
    NoConvergence { iterations: usize, delta: f64 },
    #[error("row {row} is not a probability distribution (sum {sum})")]
    NotStochastic { row: String, sum: f64 },
    #[error("no record has both endpoints classified")]
    EmptyModel,
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Observed distances per (sender group, receiver group), each sorted, with
/// the full distance sample as fallback for pairs never observed.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceKernels {
    kernels: Vec<Vec<f64>>,
    global_fallback: Vec<f64>,
}

impl DistanceKernels {
    /// `kernels` holds 81 sorted lists in (from, to) index order; empty
    /// means absent.
    fn new(kernels: Vec<Vec<f64>>, global_fallback: Vec<f64>) -> Self {
        debug_assert_eq!(kernels.len(), GROUP_COUNT * GROUP_COUNT);
        DistanceKernels {
            kernels,
            global_fallback,
        }
    }

    pub fn get(&self, from: UserGroup, to: UserGroup) -> Option<&[f64]> {
        let k = &self.kernels[from.index() * GROUP_COUNT + to.index()];
        (!k.is_empty()).then_some(k.as_slice())
    }

    pub fn global_fallback(&self) -> &[f64] {
        &self.global_fallback
    }

    /// Kernel for the pair, or the fallback when the pair was never observed.
    pub fn sample_space(&self, from: UserGroup, to: UserGroup) -> &[f64] {
        self.get(from, to).unwrap_or(&self.global_fallback)
    }

    pub fn present_pairs(&self) -> impl Iterator<Item = (UserGroup, UserGroup)> + '_ {
        (0..GROUP_COUNT * GROUP_COUNT)
            .filter(|&i| !self.kernels[i].is_empty())
            .map(|i| (UserGroup::from_index(i / GROUP_COUNT), UserGroup::from_index(i % GROUP_COUNT)))
    }
}

#[derive(Serialize, Deserialize)]
struct KernelEntry {
    from: UserGroup,
    to: UserGroup,
    samples: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelsRepr {
    kernels: Vec<KernelEntry>,
    global_fallback: Vec<f64>,
}

impl Serialize for DistanceKernels {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        KernelsRepr {
            kernels: self
                .present_pairs()
                .map(|(from, to)| KernelEntry {
                    from,
                    to,
                    samples: self.sample_space(from, to).to_vec(),
                })
                .collect(),
            global_fallback: self.global_fallback.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DistanceKernels {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = KernelsRepr::deserialize(d)?;
        let check = |v: &mut Vec<f64>| -> Result<(), D::Error> {
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(D::Error::custom("kernel samples must be finite and non-negative"));
            }
            v.sort_by(f64::total_cmp);
            Ok(())
        };
        let mut kernels = vec![Vec::new(); GROUP_COUNT * GROUP_COUNT];
        for mut e in r.kernels {
            if e.samples.is_empty() {
                return Err(D::Error::custom(format!("empty kernel {}->{}", e.from, e.to)));
            }
            check(&mut e.samples)?;
            kernels[e.from.index() * GROUP_COUNT + e.to.index()] = e.samples;
        }
        let mut fallback = r.global_fallback;
        if fallback.is_empty() {
            return Err(D::Error::custom("empty global fallback kernel"));
        }
        check(&mut fallback)?;
        Ok(DistanceKernels::new(kernels, fallback))
    }
}

/// Everything estimated for one parameter triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MarkovModel<S: Scalar = f64> {
    pub params: ParamTriple,
    pub transition: TransitionMatrix<S>,
    pub stationary: Stationary<S>,
    /// Share of classified records sent by each group.
    pub sender_frequency: [S; GROUP_COUNT],
    pub kernels: DistanceKernels,
    pub classification: Classification,
}

/// Counts and kernels for one assignment of addresses to groups. Records are
/// visited in distance order so every kernel comes out sorted.
pub(crate) fn chain_stats(
    prof: &AddressProfiles,
    groups: &[Option<UserGroup>],
) -> (Counts, Vec<Vec<f64>>) {
    let mut counts = [[0u64; GROUP_COUNT]; GROUP_COUNT];
    let mut kernels = vec![Vec::new(); GROUP_COUNT * GROUP_COUNT];
    for &r in &prof.by_distance {
        let [s, t] = prof.ends[r as usize];
        if let (Some(gs), Some(gt)) = (groups[s as usize], groups[t as usize]) {
            let (i, j) = (gs.index(), gt.index());
            counts[i][j] += 1;
            kernels[i * GROUP_COUNT + j].push(prof.distances[r as usize]);
        }
    }
    (counts, kernels)
}

pub(crate) fn sender_frequency<S: Scalar>(counts: &Counts) -> Result<[S; GROUP_COUNT], MarkovError> {
    let total: u64 = counts.iter().flatten().sum();
    if total == 0 {
        return Err(MarkovError::EmptyModel);
    }
    let mut f = [S::zero(); GROUP_COUNT];
    for (fi, row) in f.iter_mut().zip(counts) {
        *fi = S::lit(row.iter().sum::<u64>() as f64) / S::lit(total as f64);
    }
    Ok(f)
}

pub fn build_model<S: Scalar>(ds: &Dataset, params: ParamTriple) -> Result<MarkovModel<S>, MarkovError> {
    build_model_from_profiles(&AddressProfiles::new(ds), params)
}

pub fn build_model_from_profiles<S: Scalar>(
    prof: &AddressProfiles,
    params: ParamTriple,
) -> Result<MarkovModel<S>, MarkovError> {
    let groups = prof.groups(&params);
    let (counts, kernels) = chain_stats(prof, &groups);
    let sender_frequency = sender_frequency(&counts)?;
    let transition = TransitionMatrix::from_counts(counts);
    let stationary = stationary_distribution(&transition)?;
    Ok(MarkovModel {
        params,
        transition,
        stationary,
        sender_frequency,
        kernels: DistanceKernels::new(kernels, prof.sorted_distances()),
        classification: prof.classify(params),
    })
}

impl<S: Scalar> MarkovModel<S> {
    /// Consistency checks for a model loaded from disk.
    pub fn validate(&self) -> Result<(), MarkovError> {
        let invalid = |m: &str| Err(MarkovError::InvalidModel(m.to_string()));
        let freq_sum = self.sender_frequency.iter().fold(S::zero(), |a, &x| a + x);
        if self.sender_frequency.iter().any(|&f| !(f >= S::zero())) || !(freq_sum > S::zero()) {
            return invalid("sender_frequency must be non-negative with a positive sum");
        }
        let pi_sum = self.stationary.pi.iter().fold(S::zero(), |a, &x| a + x);
        if self.stationary.pi.iter().any(|&p| !(p >= S::zero())) || !(pi_sum > S::zero()) {
            return invalid("stationary vector must be non-negative with a positive sum");
        }
        Ok(())
    }

    pub fn generate(&self, n: usize, seed: u64) -> Vec<GeneratedTransaction> {
        self.generate_with(n, seed, GenerationMode::Chain)
    }

    pub fn generate_with(&self, n: usize, seed: u64, mode: GenerationMode) -> Vec<GeneratedTransaction> {
        let mut out = Vec::with_capacity(n);
        let sampler = Sampler::new(&self.transition, &self.sender_frequency, &self.stationary.pi);
        sampler.run(n, seed, mode, |s, t| self.kernels.sample_space(s, t), |g| out.push(g));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationMode {
    /// The receiver of each step sends the next transaction.
    #[default]
    Chain,
    /// Every sender is drawn afresh from the stationary distribution.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTransaction {
    pub sender_group: UserGroup,
    pub receiver_group: UserGroup,
    pub distance_km: f64,
}

pub(crate) struct Sampler {
    rows: Vec<Cumulative>,
    initial: Cumulative,
    stationary: Cumulative,
}

impl Sampler {
    pub(crate) fn new<S: Scalar>(t: &TransitionMatrix<S>, freq: &[S; GROUP_COUNT], pi: &[S; GROUP_COUNT]) -> Self {
        let f64s = |v: &[S; GROUP_COUNT]| v.map(|x| x.as_f64());
        Sampler {
            rows: t.probs().iter().map(|r| Cumulative::new(&f64s(r))).collect(),
            initial: Cumulative::new(&f64s(freq)),
            stationary: Cumulative::new(&f64s(pi)),
        }
    }

    /// Draw order per step: sender (first step, or every step when
    /// independent), receiver, then a uniform index into the kernel.
    pub(crate) fn run<'k>(
        &self,
        n: usize,
        seed: u64,
        mode: GenerationMode,
        kernel: impl Fn(UserGroup, UserGroup) -> &'k [f64],
        mut emit: impl FnMut(GeneratedTransaction),
    ) {
        let mut g = rng::seeded(seed);
        let mut sender = match mode {
            GenerationMode::Chain => self.initial.sample(&mut g),
            GenerationMode::Independent => 0,
        };
        for _ in 0..n {
            if mode == GenerationMode::Independent {
                sender = self.stationary.sample(&mut g);
            }
            let receiver = self.rows[sender].sample(&mut g);
            let (s, t) = (UserGroup::from_index(sender), UserGroup::from_index(receiver));
            let space = kernel(s, t);
            let distance_km = space[rng::index(&mut g, space.len())];
            emit(GeneratedTransaction {
                sender_group: s,
                receiver_group: t,
                distance_km,
            });
            if mode == GenerationMode::Chain {
                sender = receiver;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{endpoint, record};
    use crate::model::{Continent, Role};

    fn toy() -> Dataset {
        // Miner in NY, user in LA, merchant in Paris.
        let mi = || endpoint("mi", 40.71, -74.01, Some("US"));
        let us = || endpoint("us", 34.05, -118.24, Some("US"));
        let me = || endpoint("me", 48.86, 2.35, Some("FR"));
        Dataset::build(vec![
            record("t1", 1, 25.0, mi(), us()),
            record("t2", 2, 1.0, mi(), us()),
            record("t3", 3, 1.0, mi(), me()),
            record("t4", 4, 1.0, mi(), me()),
        ])
        .unwrap()
    }

    fn params() -> ParamTriple {
        ParamTriple::from_btc(15.0, 50, 3).unwrap()
    }

    #[test]
    fn toy_model_composition() {
        let ds = toy();
        let m: MarkovModel = build_model(&ds, params()).unwrap();
        let mi = UserGroup::new(Role::Miner, Continent::Am);
        let us = UserGroup::new(Role::User, Continent::Am);
        let me = UserGroup::new(Role::User, Continent::Eu);
        assert_eq!(m.classification.group_of("mi"), Some(mi));
        assert_eq!(m.classification.group_of("us"), Some(us));
        assert_eq!(m.classification.group_of("me"), Some(me));
        assert_eq!(m.transition.get(mi, us), 0.5);
        assert_eq!(m.transition.get(mi, me), 0.5);
        let d_us = crate::geostats::haversine_km(&ds.records()[0].sender.geo, &ds.records()[0].receiver.geo);
        assert_eq!(m.kernels.get(mi, us).unwrap(), &[d_us, d_us]);
        assert_eq!(m.kernels.get(mi, me).unwrap().len(), 2);
        assert!(m.kernels.get(us, me).is_none());
        assert_eq!(m.kernels.global_fallback().len(), 4);
        assert_eq!(m.sender_frequency[mi.index()], 1.0);
        assert_eq!(m.transition.uniform_rows().len(), 8);
    }

    #[test]
    fn degenerate_single_group() {
        let a = || endpoint("a", 40.71, -74.01, None);
        let b = || endpoint("b", 40.71, -74.01, None);
        let ds = Dataset::build(vec![record("t", 1, 1.0, a(), b())]).unwrap();
        let m: MarkovModel = build_model(&ds, params()).unwrap();
        let g = UserGroup::new(Role::User, Continent::Am);
        let mut m = m;
        // Make the chain stay in the one group so every step is observed.
        let mut p = [[0.0; GROUP_COUNT]; GROUP_COUNT];
        for row in p.iter_mut() {
            row[g.index()] = 1.0;
        }
        m.transition = TransitionMatrix::from_probs(p).unwrap();
        let out = m.generate(1, 42);
        assert_eq!(out, vec![GeneratedTransaction { sender_group: g, receiver_group: g, distance_km: 0.0 }]);
    }

    #[test]
    fn generation_is_deterministic_and_supported() {
        let ds = toy();
        let m: MarkovModel = build_model(&ds, params()).unwrap();
        let a = m.generate(200, 9);
        assert_eq!(a, m.generate(200, 9));
        assert_ne!(a, m.generate(200, 10));
        let fallback = m.kernels.global_fallback();
        assert!(a.iter().all(|g| fallback.contains(&g.distance_km)));
        let ind = m.generate_with(200, 9, GenerationMode::Independent);
        assert_eq!(ind.len(), 200);
    }

    #[test]
    fn model_json_round_trip() {
        let m: MarkovModel = build_model(&toy(), params()).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: MarkovModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        back.validate().unwrap();
        assert_eq!(back.generate(50, 3), m.generate(50, 3));
    }

    #[test]
    fn no_classified_records() {
        let ds = Dataset::build(vec![record(
            "t",
            1,
            1.0,
            endpoint("k", -4.32, 15.31, None),
            endpoint("n", 40.71, -74.01, None),
        )])
        .unwrap();
        assert_eq!(build_model::<f64>(&ds, params()).unwrap_err(), MarkovError::EmptyModel);
    }
}
