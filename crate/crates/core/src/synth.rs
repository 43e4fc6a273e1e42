//! Ground-truth synthetic datasets.
//!
//! A group sequence is drawn from the planted transition matrix; consecutive
//! pairs become records. Each group's send and receive slots are then dealt
//! to freshly created addresses in participation strata chosen so that the
//! planted parameter triple classifies every address back into its group.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ContinentRules;
use crate::markov::{stationary_distribution, Classification, TransitionMatrix};
use crate::model::{
    Dataset, Endpoint, GeoPoint, OutputRef, ParamTriple, Role, Satoshi, TransactionRecord,
    UserGroup, GROUP_COUNT,
};
use crate::rng::{self, Cumulative, Rng};

/// 2013-10-06T00:00:00Z.
pub const DEFAULT_WINDOW_START: i64 = 1_381_017_600;
/// 2013-12-25T00:00:00Z.
pub const DEFAULT_WINDOW_END: i64 = 1_387_929_600;
pub const DEFAULT_LINKAGE_RATE: f64 = 0.5;

/// Groups below this stationary mass need no locations.
const ACTIVE_MASS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("infeasible spec: {0}")]
    InfeasibleSpec(String),
}

fn infeasible<T>(msg: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::InfeasibleSpec(msg.into()))
}

/// Distribution of sent values, in BTC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueSampler {
    Constant { btc: f64 },
    LogUniform { min_btc: f64, max_btc: f64 },
    Uniform { min_btc: f64, max_btc: f64 },
}

impl ValueSampler {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ValueSampler::Constant { btc } => (btc, btc),
            ValueSampler::LogUniform { min_btc, max_btc }
            | ValueSampler::Uniform { min_btc, max_btc } => (min_btc, max_btc),
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let (lo, hi) = self.bounds();
        let positive = matches!(self, ValueSampler::LogUniform { .. });
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0) || (positive && lo <= 0.0) {
            return infeasible(format!("bad value sampler {self:?}"));
        }
        Satoshi::from_btc(hi).map_err(|e| SynthError::InfeasibleSpec(e.to_string()))?;
        Ok(())
    }

    fn satoshi_bounds(&self) -> (Satoshi, Satoshi) {
        let (lo, hi) = self.bounds();
        (
            Satoshi::from_btc(lo).unwrap_or(Satoshi(0)),
            Satoshi::from_btc(hi).unwrap_or(Satoshi(u64::MAX)),
        )
    }

    pub fn sample(&self, g: &mut Rng) -> Satoshi {
        let (lo, hi) = self.bounds();
        let btc = match *self {
            ValueSampler::Constant { btc } => btc,
            ValueSampler::LogUniform { .. } => {
                (lo.ln() + rng::uniform01(g) * (hi.ln() - lo.ln())).exp()
            }
            ValueSampler::Uniform { .. } => lo + rng::uniform01(g) * (hi - lo),
        };
        let (a, b) = self.satoshi_bounds();
        Satoshi::from_btc(btc.clamp(lo, hi))
            .unwrap_or(a)
            .clamp(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueProfiles {
    pub miner: ValueSampler,
    pub merchant: ValueSampler,
    pub user: ValueSampler,
}

impl Default for ValueProfiles {
    fn default() -> Self {
        let retail = ValueSampler::LogUniform {
            min_btc: 0.001,
            max_btc: 10.0,
        };
        ValueProfiles {
            miner: ValueSampler::Constant { btc: 25.0 },
            merchant: retail,
            user: retail,
        }
    }
}

impl ValueProfiles {
    pub fn for_role(&self, role: Role) -> ValueSampler {
        match role {
            Role::Miner => self.miner,
            Role::Merchant => self.merchant,
            Role::User => self.user,
        }
    }
}

/// How a stratum's addresses use their slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flow {
    /// Only sends.
    Spender,
    /// Receives, plus exactly `sends` sends per address.
    Collector,
    /// Sends and receives in whatever mix the group's slots allow. Miner
    /// addresses always get at least one send.
    Mixed,
}

/// A band of addresses with participation counts in `participations`
/// (inclusive, sends included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub participations: [u32; 2],
    pub flow: Flow,
    /// Sends per address for [`Flow::Collector`]; ignored otherwise.
    #[serde(default)]
    pub sends: u32,
    /// Share of the group's slots (receive slots for collectors, send slots
    /// for spenders, both for mixed).
    #[serde(default = "one")]
    pub weight: f64,
    /// Overrides the role's value profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ValueSampler>,
}

fn one() -> f64 {
    1.0
}

impl Stratum {
    pub fn new(lo: u32, hi: u32, flow: Flow) -> Self {
        Stratum {
            participations: [lo, hi],
            flow,
            sends: 0,
            weight: 1.0,
            value: None,
        }
    }

    pub fn sends(mut self, n: u32) -> Self {
        self.sends = n;
        self
    }

    pub fn value(mut self, v: ValueSampler) -> Self {
        self.value = Some(v);
        self
    }

    fn receives(&self) -> bool {
        self.flow != Flow::Spender
    }

    fn takes_send_slots(&self) -> bool {
        self.flow != Flow::Collector
    }

    fn ever_sends(&self) -> bool {
        self.flow != Flow::Collector || self.sends > 0
    }

    /// Checks that every address this stratum can produce classifies as
    /// `role` under `params`.
    fn validate(&self, role: Role, params: &ParamTriple, value: &ValueSampler) -> Result<(), SynthError> {
        let [lo, hi] = self.participations;
        let fail = |why: &str| infeasible(format!("{} stratum {lo}..={hi}: {why}", role.label()));
        if lo > hi || hi == 0 {
            return fail("empty participation range");
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return fail("weight must be positive");
        }
        match self.flow {
            Flow::Collector if self.sends > lo || self.sends >= hi => {
                return fail("collector sends leave no room to receive")
            }
            Flow::Spender | Flow::Mixed if lo == 0 => return fail("zero participations"),
            _ => {}
        }
        value.validate()?;
        let (vmin, vmax) = value.satoshi_bounds();
        let could_mine = self.ever_sends() && vmax >= params.val && lo <= params.tx_miner;
        match role {
            Role::Miner => {
                if hi > params.tx_miner {
                    return fail("more participations than tx_miner");
                }
                if !self.ever_sends() {
                    return fail("miners must send");
                }
                if vmin < params.val {
                    return fail("miner values below val");
                }
            }
            Role::Merchant => {
                if lo < params.tx_merch {
                    return fail("fewer participations than tx_merch");
                }
                if could_mine {
                    return fail("would classify as miner");
                }
            }
            Role::User => {
                if hi >= params.tx_merch {
                    return fail("reaches tx_merch");
                }
                if could_mine {
                    return fail("would classify as miner");
                }
            }
        }
        Ok(())
    }
}

/// Per-group and per-role strata overrides; a group override wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrataSpec {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_group: BTreeMap<UserGroup, Vec<Stratum>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_role: BTreeMap<Role, Vec<Stratum>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country_code: Option<String>,
}

impl Location {
    pub fn new(lat: f64, lon: f64, country_code: Option<&str>) -> Self {
        Location {
            lat,
            lon,
            country_code: country_code.map(str::to_string),
        }
    }

    fn geo(&self) -> GeoPoint {
        GeoPoint {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

/// Waiting times follow a power law with density exponent `alpha` above
/// `xmin_seconds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitingSpec {
    pub alpha: f64,
    pub xmin_seconds: f64,
}

impl Default for WaitingSpec {
    fn default() -> Self {
        WaitingSpec {
            alpha: 1.08,
            xmin_seconds: 60.0,
        }
    }
}

/// From `date` (UTC midnight) on, the sending rate of addresses located in
/// `country_code` is multiplied by `multiplier`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalEvent {
    pub country_code: String,
    /// `YYYY-MM-DD`.
    pub date: String,
    pub multiplier: f64,
}

impl RegionalEvent {
    pub fn timestamp(&self) -> Result<i64, SynthError> {
        NaiveDate::parse_from_str(&self.date, "%Y-%m-%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(|d| d.and_utc().timestamp())
            .ok_or_else(|| SynthError::InfeasibleSpec(format!("bad event date {:?}", self.date)))
    }
}

fn default_window() -> (i64, i64) {
    (DEFAULT_WINDOW_START, DEFAULT_WINDOW_END)
}

fn default_linkage() -> f64 {
    DEFAULT_LINKAGE_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_records: usize,
    pub planted_params: ParamTriple,
    pub planted_transition: [[f64; GROUP_COUNT]; GROUP_COUNT],
    pub group_locations: BTreeMap<UserGroup, Vec<Location>>,
    #[serde(default)]
    pub value_profiles: ValueProfiles,
    #[serde(default)]
    pub strata: StrataSpec,
    #[serde(default = "default_linkage")]
    pub utxo_linkage_rate: f64,
    #[serde(default)]
    pub waiting_time: WaitingSpec,
    #[serde(default = "default_window")]
    pub window: (i64, i64),
    #[serde(default)]
    pub regional_events: Vec<RegionalEvent>,
}

impl SynthSpec {
    /// A spec with default values, strata, waiting times and window.
    pub fn new(
        n_records: usize,
        planted_params: ParamTriple,
        planted_transition: [[f64; GROUP_COUNT]; GROUP_COUNT],
        group_locations: BTreeMap<UserGroup, Vec<Location>>,
    ) -> Self {
        SynthSpec {
            n_records,
            planted_params,
            planted_transition,
            group_locations,
            value_profiles: ValueProfiles::default(),
            strata: StrataSpec::default(),
            utxo_linkage_rate: DEFAULT_LINKAGE_RATE,
            waiting_time: WaitingSpec::default(),
            window: default_window(),
            regional_events: Vec::new(),
        }
    }

    /// Reference scenario planted at (15 BTC, 50, 120): one city per group,
    /// a dominant successor cycle, and strata placed so that neighbouring
    /// grid triples reclassify some addresses. The narrow merchant bands
    /// need about 10,000 records or more.
    pub fn calibration(n_records: usize) -> Self {
        let cities = [
            (40.71, -74.01, "US"),
            (41.88, -87.63, "US"),
            (34.05, -118.24, "US"),
            (31.23, 121.47, "CN"),
            (35.68, 139.69, "JP"),
            (1.35, 103.82, "SG"),
            (52.52, 13.40, "DE"),
            (48.86, 2.35, "FR"),
            (40.42, -3.70, "ES"),
        ];
        let group_locations = UserGroup::all()
            .into_iter()
            .map(|g| {
                let (lat, lon, cc) = cities[g.index()];
                (g, vec![Location::new(lat, lon, Some(cc))])
            })
            .collect();
        let off = 0.2 / 8.0;
        let mut t = [[off; GROUP_COUNT]; GROUP_COUNT];
        for (g, row) in t.iter_mut().enumerate() {
            row[(g + 1) % GROUP_COUNT] = 0.8;
        }
        let lu = |a, b| ValueSampler::LogUniform {
            min_btc: a,
            max_btc: b,
        };
        let retail = lu(0.001, 4.9);
        let spenders = Stratum::new(20, 59, Flow::Spender).value(retail);
        let users = |c: Stratum| vec![spenders.clone(), c];
        let by_role = BTreeMap::from([
            (
                Role::Miner,
                vec![
                    Stratum::new(1, 10, Flow::Spender).value(lu(25.0, 30.0)),
                    Stratum::new(26, 50, Flow::Collector).sends(1).value(lu(15.0, 19.9)),
                ],
            ),
            (
                Role::Merchant,
                vec![
                    Stratum::new(200, 400, Flow::Spender).value(retail),
                    Stratum::new(120, 149, Flow::Collector).value(retail),
                ],
            ),
        ]);
        let by_group = BTreeMap::from([
            (
                "US-AM".parse().unwrap(),
                users(Stratum::new(20, 50, Flow::Collector).sends(1).value(lu(10.0, 14.9))),
            ),
            (
                "US-AS".parse().unwrap(),
                users(Stratum::new(51, 75, Flow::Collector).sends(1).value(lu(15.0, 19.9))),
            ),
            (
                "US-EU".parse().unwrap(),
                users(Stratum::new(90, 119, Flow::Collector).sends(1).value(retail)),
            ),
        ]);
        SynthSpec {
            strata: StrataSpec { by_group, by_role },
            regional_events: vec![RegionalEvent {
                country_code: "CN".into(),
                date: "2013-12-05".into(),
                multiplier: 0.3,
            }],
            ..SynthSpec::new(
                n_records,
                ParamTriple::from_btc(15.0, 50, 120).expect("valid triple"),
                t,
                group_locations,
            )
        }
    }

    /// Strata used for `group`: an override, or one mixed band per role
    /// (miners up to `tx_miner`, users strictly between, merchants from
    /// `tx_merch` to twice that).
    pub fn strata_for(&self, group: UserGroup) -> Vec<Stratum> {
        if let Some(s) = self.strata.by_group.get(&group) {
            return s.clone();
        }
        if let Some(s) = self.strata.by_role.get(&group.role) {
            return s.clone();
        }
        let p = &self.planted_params;
        let band = match group.role {
            Role::Miner => [1, p.tx_miner],
            Role::User => [p.tx_miner + 1, p.tx_merch.saturating_sub(1)],
            Role::Merchant => [p.tx_merch, p.tx_merch.saturating_mul(2)],
        };
        vec![Stratum::new(band[0], band[1], Flow::Mixed)]
    }

    fn value_for(&self, group: UserGroup, s: &Stratum) -> ValueSampler {
        s.value.unwrap_or_else(|| self.value_profiles.for_role(group.role))
    }

    /// Static checks; returns the groups with stationary mass.
    pub fn validate(&self) -> Result<Vec<UserGroup>, SynthError> {
        if self.n_records == 0 {
            return infeasible("n_records must be positive");
        }
        let p = &self.planted_params;
        if p.tx_merch <= p.tx_miner {
            return infeasible(format!(
                "tx_merch ({}) must exceed tx_miner ({})",
                p.tx_merch, p.tx_miner
            ));
        }
        if !(0.0..=1.0).contains(&self.utxo_linkage_rate) {
            return infeasible("utxo_linkage_rate must lie in [0, 1]");
        }
        let w = &self.waiting_time;
        if !(w.alpha.is_finite() && w.alpha > 1.0 && w.xmin_seconds.is_finite() && w.xmin_seconds >= 1.0) {
            return infeasible("waiting time needs alpha > 1 and xmin_seconds >= 1");
        }
        if self.window.0 > self.window.1 {
            return infeasible("window start after end");
        }
        for e in &self.regional_events {
            e.timestamp()?;
            if !(e.multiplier.is_finite() && e.multiplier >= 0.0) {
                return infeasible(format!("bad multiplier {} for {}", e.multiplier, e.country_code));
            }
        }
        let t = TransitionMatrix::from_probs(self.planted_transition)
            .map_err(|e| SynthError::InfeasibleSpec(e.to_string()))?;
        let pi = stationary_distribution(&t)
            .map_err(|e| SynthError::InfeasibleSpec(e.to_string()))?
            .pi;
        let active: Vec<UserGroup> = UserGroup::all()
            .into_iter()
            .filter(|g| pi[g.index()] > ACTIVE_MASS)
            .collect();
        let rules = ContinentRules::default();
        for (g, locs) in &self.group_locations {
            for l in locs {
                let geo = l.geo();
                geo.validate()
                    .map_err(|e| SynthError::InfeasibleSpec(format!("{g}: {e}")))?;
                if rules.assign(&geo).ok() != Some(g.continent) {
                    return infeasible(format!("{g}: location ({}, {}) lies outside its continent", l.lat, l.lon));
                }
            }
        }
        let overridden = self
            .strata
            .by_group
            .keys()
            .copied()
            .chain(UserGroup::all().into_iter().filter(|g| self.strata.by_role.contains_key(&g.role)));
        for g in active.iter().copied().chain(overridden) {
            let strata = self.strata_for(g);
            if strata.is_empty() {
                return infeasible(format!("{g}: no strata"));
            }
            for s in &strata {
                s.validate(g.role, p, &self.value_for(g, s))?;
            }
        }
        for g in &active {
            if self.group_locations.get(g).is_none_or(|l| l.is_empty()) {
                return infeasible(format!("{g}: no locations"));
            }
        }
        Ok(active)
    }
}

/// A generated dataset and the group every address was built for.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub dataset: Dataset,
    pub planted_assignment: BTreeMap<String, UserGroup>,
}

impl SynthDataset {
    pub fn planted_classification(&self, params: ParamTriple) -> Classification {
        Classification {
            params,
            assignment: self.planted_assignment.clone(),
            unassigned: Vec::new(),
        }
    }
}

/// Splits `total` into counts in `lo..=hi`, aiming for the midpoint.
fn split(g: &mut Rng, total: u64, lo: u64, hi: u64) -> Result<Vec<u64>, SynthError> {
    split_capped(g, total, lo, hi, u64::MAX)
}

/// As [`split`], with at most `max_parts` counts.
fn split_capped(g: &mut Rng, total: u64, lo: u64, hi: u64, max_parts: u64) -> Result<Vec<u64>, SynthError> {
    if total == 0 {
        return Ok(Vec::new());
    }
    let kmin = total.div_ceil(hi);
    let kmax = if lo == 0 { u64::MAX } else { total / lo }.min(max_parts);
    if kmin > kmax {
        return infeasible(format!("{total} slots cannot be split into bands of {lo}..={hi}"));
    }
    let mid = (lo + hi) as f64 / 2.0;
    let k = ((total as f64 / mid).round() as u64).clamp(kmin, kmax);
    let mut counts = vec![lo; k as usize];
    let mut open: Vec<usize> = (0..counts.len()).filter(|_| hi > lo).collect();
    let mut rest = total - k * lo;
    while rest > 0 {
        let j = rng::index(g, open.len());
        let i = open[j];
        counts[i] += 1;
        rest -= 1;
        if counts[i] == hi {
            open.swap_remove(j);
        }
    }
    Ok(counts)
}

/// Share of `total` for each weight; the rounding remainder goes to the last.
fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    let mut out: Vec<u64> = weights
        .iter()
        .map(|w| (total as f64 * w / sum).floor() as u64)
        .collect();
    let used: u64 = out.iter().sum();
    if let Some(last) = out.last_mut() {
        *last += total - used.min(total);
    }
    out
}

struct Builder<'a> {
    spec: &'a SynthSpec,
    sender: Vec<u32>,
    receiver: Vec<u32>,
    value: Vec<Satoshi>,
    addr_group: Vec<UserGroup>,
    addr_site: Vec<usize>,
}

impl Builder<'_> {
    fn new_address(&mut self, g: &mut Rng, group: UserGroup) -> u32 {
        let sites = self.spec.group_locations[&group].len();
        self.addr_group.push(group);
        self.addr_site.push(rng::index(g, sites));
        (self.addr_group.len() - 1) as u32
    }

    /// Deals the send slots `outs` and receive slots `ins` of `group`.
    fn allocate(
        &mut self,
        g: &mut Rng,
        group: UserGroup,
        mut outs: Vec<usize>,
        mut ins: Vec<usize>,
    ) -> Result<(), SynthError> {
        if outs.is_empty() && ins.is_empty() {
            return Ok(());
        }
        if self.spec.group_locations.get(&group).is_none_or(|l| l.is_empty()) {
            return infeasible(format!("{group}: no locations"));
        }
        rng::shuffle(g, &mut outs);
        rng::shuffle(g, &mut ins);
        let strata = self.spec.strata_for(group);
        let fail = |what: &str| infeasible(format!("{group}: {what}"));
        let in_group = |e: SynthError| match e {
            SynthError::InfeasibleSpec(m) => SynthError::InfeasibleSpec(format!("{group}: {m}")),
        };

        let recv_idx: Vec<usize> = (0..strata.len()).filter(|&i| strata[i].receives()).collect();
        let send_idx: Vec<usize> = (0..strata.len())
            .filter(|&i| strata[i].takes_send_slots())
            .collect();
        let mut plan_in = vec![0u64; strata.len()];
        let mut plan_out = vec![0u64; strata.len()];
        if !ins.is_empty() {
            if recv_idx.is_empty() {
                return fail("receives but has no receiving stratum");
            }
            let w: Vec<f64> = recv_idx.iter().map(|&i| strata[i].weight).collect();
            for (&i, n) in recv_idx.iter().zip(apportion(ins.len() as u64, &w)) {
                plan_in[i] = n;
            }
        }
        let mut collectors = vec![Vec::new(); strata.len()];
        let mut mandatory = 0u64;
        for (i, s) in strata.iter().enumerate() {
            if s.flow == Flow::Collector {
                let m = u64::from(s.sends);
                let [lo, hi] = s.participations.map(u64::from);
                collectors[i] = split(g, plan_in[i], lo - m, hi - m).map_err(in_group)?;
                mandatory += m * collectors[i].len() as u64;
            }
        }
        let Some(free) = (outs.len() as u64).checked_sub(mandatory) else {
            return fail("collectors need more sends than the group makes");
        };
        if free > 0 {
            if send_idx.is_empty() {
                return fail("sends but has no sending stratum");
            }
            let w: Vec<f64> = send_idx.iter().map(|&i| strata[i].weight).collect();
            for (&i, n) in send_idx.iter().zip(apportion(free, &w)) {
                plan_out[i] = n;
            }
        }

        for (i, s) in strata.iter().enumerate() {
            let value = self.spec.value_for(group, s);
            let [lo, hi] = s.participations.map(u64::from);
            match s.flow {
                Flow::Collector => {
                    for &c in &collectors[i] {
                        let a = self.new_address(g, group);
                        for _ in 0..s.sends {
                            self.send(g, a, &mut outs, &value);
                        }
                        for _ in 0..c {
                            self.receive(a, &mut ins);
                        }
                    }
                }
                Flow::Spender => {
                    for c in split(g, plan_out[i], lo, hi).map_err(in_group)? {
                        let a = self.new_address(g, group);
                        for _ in 0..c {
                            self.send(g, a, &mut outs, &value);
                        }
                    }
                }
                Flow::Mixed => {
                    let miner = group.role == Role::Miner;
                    let cap = if miner { plan_out[i] } else { u64::MAX };
                    let counts = split_capped(g, plan_in[i] + plan_out[i], lo, hi, cap).map_err(in_group)?;
                    let reserved = if miner { counts.len() as u64 } else { 0 };
                    let mut slots: Vec<bool> = std::iter::repeat_n(true, (plan_out[i] - reserved) as usize)
                        .chain(std::iter::repeat_n(false, plan_in[i] as usize))
                        .collect();
                    rng::shuffle(g, &mut slots);
                    let mut pos = 0;
                    for c in counts {
                        let a = self.new_address(g, group);
                        let mut c = c as usize;
                        if reserved > 0 {
                            self.send(g, a, &mut outs, &value);
                            c -= 1;
                        }
                        for &is_send in &slots[pos..pos + c] {
                            if is_send {
                                self.send(g, a, &mut outs, &value);
                            } else {
                                self.receive(a, &mut ins);
                            }
                        }
                        pos += c;
                    }
                }
            }
        }
        debug_assert!(outs.is_empty() && ins.is_empty());
        Ok(())
    }

    fn send(&mut self, g: &mut Rng, a: u32, outs: &mut Vec<usize>, value: &ValueSampler) {
        let t = outs.pop().expect("send slot");
        self.sender[t] = a;
        self.value[t] = value.sample(g);
    }

    fn receive(&mut self, a: u32, ins: &mut Vec<usize>) {
        let t = ins.pop().expect("receive slot");
        self.receiver[t] = a;
    }
}

/// Piecewise-constant activity rate over the window for one country.
struct TimeSampler {
    starts: Vec<i64>,
    ends: Vec<i64>,
    pick: Cumulative,
}

impl TimeSampler {
    fn new(window: (i64, i64), mut steps: Vec<(i64, f64)>) -> Option<Self> {
        steps.sort_by_key(|s| s.0);
        let mut starts = vec![window.0];
        let mut rates = vec![1.0];
        for (t, m) in steps {
            let t = t.clamp(window.0, window.1 + 1);
            let rate = rates.last().copied().unwrap_or(1.0) * m;
            if t == *starts.last().unwrap() {
                *rates.last_mut().unwrap() = rate;
            } else {
                starts.push(t);
                rates.push(rate);
            }
        }
        let mut ends: Vec<i64> = starts[1..].iter().map(|t| t - 1).collect();
        ends.push(window.1);
        let weights: Vec<f64> = rates
            .iter()
            .zip(starts.iter().zip(&ends))
            .map(|(r, (s, e))| if e >= s { r * (e - s + 1) as f64 } else { 0.0 })
            .collect();
        (weights.iter().sum::<f64>() > 0.0).then(|| TimeSampler {
            starts,
            ends,
            pick: Cumulative::new(&weights),
        })
    }

    fn sample(&self, g: &mut Rng) -> i64 {
        let i = self.pick.sample(g);
        let span = (self.ends[i] - self.starts[i]) as u64;
        self.starts[i] + rng::range_inclusive(g, 0, span) as i64
    }
}

/// Builds a dataset from `spec`; identical `(spec, seed)` give identical
/// output.
pub fn generate_dataset(spec: &SynthSpec, seed: u64) -> Result<SynthDataset, SynthError> {
    spec.validate()?;
    let n = spec.n_records;
    let t = TransitionMatrix::from_probs(spec.planted_transition)
        .map_err(|e| SynthError::InfeasibleSpec(e.to_string()))?;
    let pi = stationary_distribution(&t)
        .map_err(|e| SynthError::InfeasibleSpec(e.to_string()))?
        .pi;

    let mut g = rng::stream(seed, 0);
    let rows: Vec<Cumulative> = t.probs().iter().map(|r| Cumulative::new(r)).collect();
    let mut chain = Vec::with_capacity(n + 1);
    chain.push(Cumulative::new(&pi).sample(&mut g));
    for i in 0..n {
        let next = rows[chain[i]].sample(&mut g);
        chain.push(next);
    }

    let mut b = Builder {
        spec,
        sender: vec![0; n],
        receiver: vec![0; n],
        value: vec![Satoshi(0); n],
        addr_group: Vec::new(),
        addr_site: Vec::new(),
    };
    let mut outs = vec![Vec::new(); GROUP_COUNT];
    let mut ins = vec![Vec::new(); GROUP_COUNT];
    for i in 0..n {
        outs[chain[i]].push(i);
        ins[chain[i + 1]].push(i);
    }
    for (k, (o, r)) in outs.into_iter().zip(ins).enumerate() {
        b.allocate(&mut g, UserGroup::from_index(k), o, r)?;
    }

    let location = |a: u32| &spec.group_locations[&b.addr_group[a as usize]][b.addr_site[a as usize]];
    let country: Vec<Option<&str>> = b
        .sender
        .iter()
        .map(|&a| location(a).country_code.as_deref())
        .collect();
    let timestamps = draw_timestamps(spec, &mut rng::stream(seed, 1), &country)?;
    let (timestamps, inputs) = link_outputs(spec, &mut rng::stream(seed, 2), timestamps, &country);

    let address_id = |a: u32| format!("addr{a:06}");
    let endpoint = |a: u32| {
        let l = location(a);
        Endpoint {
            address_id: address_id(a),
            geo: l.geo(),
            country_code: l.country_code.clone(),
        }
    };
    let records: Vec<TransactionRecord> = inputs
        .into_iter()
        .enumerate()
        .map(|(i, input)| TransactionRecord {
            tx_id: tx_id(i),
            timestamp: timestamps[i],
            value: b.value[i],
            sender: endpoint(b.sender[i]),
            receiver: endpoint(b.receiver[i]),
            inputs: input.into_iter().collect(),
        })
        .collect();
    let planted_assignment = b
        .addr_group
        .iter()
        .enumerate()
        .map(|(a, &grp)| (address_id(a as u32), grp))
        .collect();
    let dataset = Dataset::with_window(records, spec.window)
        .map_err(|e| SynthError::InfeasibleSpec(e.to_string()))?;
    Ok(SynthDataset {
        dataset,
        planted_assignment,
    })
}

fn tx_id(i: usize) -> String {
    format!("tx{i:08}")
}

fn draw_timestamps(spec: &SynthSpec, g: &mut Rng, country: &[Option<&str>]) -> Result<Vec<i64>, SynthError> {
    let mut by_country: BTreeMap<String, Vec<(i64, f64)>> = BTreeMap::new();
    for e in &spec.regional_events {
        by_country
            .entry(e.country_code.to_ascii_uppercase())
            .or_default()
            .push((e.timestamp()?, e.multiplier));
    }
    let base = TimeSampler::new(spec.window, Vec::new()).expect("non-empty window");
    let mut samplers: BTreeMap<String, TimeSampler> = BTreeMap::new();
    for (cc, steps) in by_country {
        let Some(s) = TimeSampler::new(spec.window, steps) else {
            return infeasible(format!("events silence {cc} for the whole window"));
        };
        samplers.insert(cc, s);
    }
    Ok(country
        .iter()
        .map(|c| {
            let s = c
                .and_then(|c| samplers.get(&c.to_ascii_uppercase()))
                .unwrap_or(&base);
            s.sample(g)
        })
        .collect())
}

/// Links a `utxo_linkage_rate` share of records to an earlier unlinked
/// record sent from the same country, moving the spender to creation time
/// plus a power-law wait. Draws that fit no creator inside the window stay
/// unlinked.
fn link_outputs(
    spec: &SynthSpec,
    g: &mut Rng,
    mut ts: Vec<i64>,
    country: &[Option<&str>],
) -> (Vec<i64>, Vec<Option<OutputRef>>) {
    let n = ts.len();
    let mut inputs = vec![None; n];
    let target = (spec.utxo_linkage_rate * n as f64).round() as usize;
    if target == 0 {
        return (ts, inputs);
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(g, &mut order);
    let mut linked = order[..target].to_vec();
    linked.sort_unstable();
    let mut pools: BTreeMap<Option<&str>, Vec<usize>> = BTreeMap::new();
    for &i in &order[target..] {
        pools.entry(country[i]).or_default().push(i);
    }
    let pools: BTreeMap<Option<&str>, (Vec<usize>, Vec<i64>)> = pools
        .into_iter()
        .map(|(cc, mut v)| {
            v.sort_by_key(|&i| (ts[i], i));
            let t = v.iter().map(|&i| ts[i]).collect();
            (cc, (v, t))
        })
        .collect();
    let mut spent = vec![0u32; n];
    let WaitingSpec { alpha, xmin_seconds } = spec.waiting_time;
    let (start, end) = spec.window;
    for i in linked {
        let w = (xmin_seconds * rng::uniform_open0(g).powf(-1.0 / (alpha - 1.0))).floor();
        if !(w <= (end - start) as f64) {
            continue;
        }
        let w = w as i64;
        let Some((creators, creator_ts)) = pools.get(&country[i]) else {
            continue;
        };
        let eligible = creator_ts.partition_point(|&t| t <= end - w);
        if eligible == 0 {
            continue;
        }
        let c = creators[rng::index(g, eligible)];
        ts[i] = ts[c] + w;
        inputs[i] = Some(OutputRef {
            tx_id: tx_id(c),
            output_index: spent[c],
        });
        spent[c] += 1;
    }
    (ts, inputs)
}
