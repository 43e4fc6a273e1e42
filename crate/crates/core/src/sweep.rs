//! Grid search over classification thresholds.
//!
//! Every triple is scored by building its Markov model, generating
//! `n_generate` transactions and comparing their distances with the full
//! empirical distance sample by a two-sample K-S test. Each triple's seed is
//! derived from the global seed and the triple's own values, so results do
//! not depend on grid order or thread scheduling.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{ks_numerator_against, result_from_numerator, KsMethod};
use crate::markov::{
    chain_stats, sender_frequency, stationary_distribution, AddressProfiles, GenerationMode,
    MarkovError, Sampler, TransitionMatrix,
};
use crate::model::{Dataset, ParamError, ParamTriple, Satoshi, GROUP_COUNT};
use crate::rng::derive_seed;

pub const DEFAULT_N_GENERATE: usize = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("grid has an empty axis")]
    EmptyGrid,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("n_generate must be at least 1")]
    ZeroGenerate,
    #[error("no triple produced a usable model")]
    NoUsableTriple,
}

impl From<ParamError> for SweepError {
    fn from(e: ParamError) -> Self {
        SweepError::InvalidGrid(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub val_btc: Vec<Satoshi>,
    pub tx_miner: Vec<u32>,
    pub tx_merch: Vec<u32>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            val_btc: [5u64, 10, 15, 20, 25]
                .iter()
                .map(|&b| Satoshi(b * crate::model::SATOSHI_PER_BTC))
                .collect(),
            tx_miner: vec![10, 25, 50, 75, 100],
            tx_merch: vec![60, 90, 120, 150, 200],
        }
    }
}

impl Grid {
    pub fn single(p: ParamTriple) -> Self {
        Grid {
            val_btc: vec![p.val],
            tx_miner: vec![p.tx_miner],
            tx_merch: vec![p.tx_merch],
        }
    }

    /// Distinct triples of the cross product, ascending.
    pub fn triples(&self) -> Result<Vec<ParamTriple>, SweepError> {
        if self.val_btc.is_empty() || self.tx_miner.is_empty() || self.tx_merch.is_empty() {
            return Err(SweepError::EmptyGrid);
        }
        let mut out = BTreeSet::new();
        for &v in &self.val_btc {
            for &mi in &self.tx_miner {
                for &me in &self.tx_merch {
                    out.insert(ParamTriple::new(v, mi, me)?);
                }
            }
        }
        Ok(out.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Largest p-value; ties go to the smaller statistic.
    #[default]
    MaxP,
    /// Smallest statistic; ties go to the larger p-value.
    MinD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub n_generate: usize,
    pub seed: u64,
    pub criterion: Criterion,
    pub mode: GenerationMode,
}

impl SweepOptions {
    pub fn new(seed: u64) -> Self {
        SweepOptions {
            n_generate: DEFAULT_N_GENERATE,
            seed,
            criterion: Criterion::MaxP,
            mode: GenerationMode::Chain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: ParamTriple,
    pub d_statistic: f64,
    pub p_value: f64,
    /// Addresses per group, in group order.
    pub group_sizes: [usize; GROUP_COUNT],
    pub seed: u64,
    /// Set when no model could be built; such rows score `d = 1, p = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub options: SweepOptions,
    /// One row per triple, ordered by triple.
    pub rows: Vec<SweepRow>,
    pub best: SweepRow,
}

/// `a` beats `b` under `criterion`.
fn better(a: &SweepRow, b: &SweepRow, criterion: Criterion) -> bool {
    let ord = match criterion {
        Criterion::MaxP => b
            .p_value
            .total_cmp(&a.p_value)
            .then(a.d_statistic.total_cmp(&b.d_statistic)),
        Criterion::MinD => a
            .d_statistic
            .total_cmp(&b.d_statistic)
            .then(b.p_value.total_cmp(&a.p_value)),
    };
    ord.then(a.params.cmp(&b.params)) == Ordering::Less
}

pub fn triple_seed(seed: u64, p: &ParamTriple) -> u64 {
    derive_seed(seed, &[p.val.0, u64::from(p.tx_miner), u64::from(p.tx_merch)])
}

/// Dataset-level work shared by every triple and every sweep seed.
#[derive(Debug, Clone)]
pub struct PreparedSweep {
    profiles: AddressProfiles,
    reference: Vec<f64>,
}

impl PreparedSweep {
    pub fn new(ds: &Dataset) -> Self {
        PreparedSweep::from_profiles(AddressProfiles::new(ds))
    }

    pub fn from_profiles(profiles: AddressProfiles) -> Self {
        let reference = profiles.sorted_distances();
        PreparedSweep {
            profiles,
            reference,
        }
    }

    pub fn profiles(&self) -> &AddressProfiles {
        &self.profiles
    }

    /// Scores one triple. Equivalent to building the model, generating with
    /// the triple's seed and testing against the empirical distances.
    pub fn evaluate(&self, params: ParamTriple, opts: &SweepOptions) -> SweepRow {
        let seed = triple_seed(opts.seed, &params);
        let groups = self.profiles.groups(&params);
        let mut group_sizes = [0usize; GROUP_COUNT];
        for g in groups.iter().flatten() {
            group_sizes[g.index()] += 1;
        }
        let failed = |e: MarkovError| SweepRow {
            params,
            d_statistic: 1.0,
            p_value: 0.0,
            group_sizes,
            seed,
            error: Some(e.to_string()),
        };
        let (counts, kernels) = chain_stats(&self.profiles, &groups);
        let freq = match sender_frequency::<f64>(&counts) {
            Ok(f) => f,
            Err(e) => return failed(e),
        };
        let transition = TransitionMatrix::<f64>::from_counts(counts);
        let stationary = match stationary_distribution(&transition) {
            Ok(s) => s,
            Err(e) => return failed(e),
        };
        let sampler = Sampler::new(&transition, &freq, &stationary.pi);
        let mut generated = Vec::with_capacity(opts.n_generate);
        sampler.run(
            opts.n_generate,
            seed,
            opts.mode,
            |s, t| {
                let k = &kernels[s.index() * GROUP_COUNT + t.index()];
                if k.is_empty() {
                    &self.reference
                } else {
                    k
                }
            },
            |g| generated.push(g.distance_km),
        );
        generated.sort_by(f64::total_cmp);
        let num = ks_numerator_against(&self.reference, &generated);
        let ks = result_from_numerator::<f64>(num, self.reference.len(), generated.len(), KsMethod::Asymptotic)
            .expect("asymptotic p-value never fails");
        SweepRow {
            params,
            d_statistic: ks.d_statistic,
            p_value: ks.p_value,
            group_sizes,
            seed,
            error: None,
        }
    }

    pub fn run(&self, grid: &Grid, opts: &SweepOptions) -> Result<SweepResult, SweepError> {
        if opts.n_generate == 0 {
            return Err(SweepError::ZeroGenerate);
        }
        let triples = grid.triples()?;
        let rows: Vec<SweepRow> = triples.par_iter().map(|&p| self.evaluate(p, opts)).collect();
        let best = rows
            .iter()
            .filter(|r| r.error.is_none())
            .fold(None::<&SweepRow>, |acc, r| match acc {
                Some(b) if !better(r, b, opts.criterion) => Some(b),
                _ => Some(r),
            })
            .ok_or(SweepError::NoUsableTriple)?
            .clone();
        Ok(SweepResult {
            options: *opts,
            rows,
            best,
        })
    }
}

pub fn run_sweep(ds: &Dataset, grid: &Grid, opts: &SweepOptions) -> Result<SweepResult, SweepError> {
    PreparedSweep::new(ds).run(grid, opts)
}
