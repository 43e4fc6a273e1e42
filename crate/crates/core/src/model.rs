//! Domain types and the validated, indexed in-memory dataset.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Scalar;

pub const SATOSHI_PER_BTC: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("negative value")]
    Negative,
    #[error("non-finite value")]
    NonFinite,
    #[error("malformed decimal {0:?}")]
    Malformed(String),
    #[error("value out of range")]
    Overflow,
}

/// Integer amount in satoshi; exposed to users as a BTC decimal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Satoshi(pub u64);

impl Satoshi {
    pub const ZERO: Satoshi = Satoshi(0);

    pub fn from_btc(btc: f64) -> Result<Self, ValueError> {
        if !btc.is_finite() {
            return Err(ValueError::NonFinite);
        }
        if btc < 0.0 {
            return Err(ValueError::Negative);
        }
        let sats = (btc * SATOSHI_PER_BTC as f64).round();
        if sats >= u64::MAX as f64 {
            return Err(ValueError::Overflow);
        }
        Ok(Satoshi(sats as u64))
    }

    /// Parses a plain decimal BTC string exactly (at most 8 fractional digits
    /// are significant; further digits must be zero).
    pub fn parse_btc(s: &str) -> Result<Self, ValueError> {
        let t = s.trim();
        let malformed = || ValueError::Malformed(s.to_string());
        if t.is_empty() {
            return Err(malformed());
        }
        let lower = t.to_ascii_lowercase();
        if matches!(
            lower.trim_start_matches(['+', '-']),
            "nan" | "inf" | "infinity"
        ) {
            return Err(ValueError::NonFinite);
        }
        let (neg, body) = match t.as_bytes()[0] {
            b'-' => (true, &t[1..]),
            b'+' => (false, &t[1..]),
            _ => (false, t),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(malformed());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            // Exponent notation and the like: fall back to float parsing.
            let v: f64 = t.parse().map_err(|_| malformed())?;
            return Satoshi::from_btc(v);
        }
        let int_val: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| ValueError::Overflow)?
        };
        let (head, tail) = frac_part.split_at(frac_part.len().min(8));
        if tail.bytes().any(|b| b != b'0') {
            return Err(malformed());
        }
        let mut frac_val: u64 = 0;
        for (i, b) in head.bytes().enumerate() {
            frac_val += u64::from(b - b'0') * 10u64.pow(7 - i as u32);
        }
        let total = int_val
            .checked_mul(SATOSHI_PER_BTC)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or(ValueError::Overflow)?;
        if neg && total != 0 {
            return Err(ValueError::Negative);
        }
        Ok(Satoshi(total))
    }

    pub fn to_btc(self) -> f64 {
        self.0 as f64 / SATOSHI_PER_BTC as f64
    }
}

impl fmt::Display for Satoshi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let int = self.0 / SATOSHI_PER_BTC;
        let frac = self.0 % SATOSHI_PER_BTC;
        if frac == 0 {
            write!(f, "{int}")
        } else {
            let digits = format!("{frac:08}");
            write!(f, "{int}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl FromStr for Satoshi {
    type Err = ValueError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Satoshi::parse_btc(s)
    }
}

impl Serialize for Satoshi {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_btc())
    }
}

impl<'de> Deserialize<'de> for Satoshi {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        Satoshi::from_btc(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("coordinate is not finite")]
    NonFinite,
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    OutOfRange { lat: f64, lon: f64 },
}

/// Latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GeoPoint<S: Scalar = f64> {
    pub lat: S,
    pub lon: S,
}

impl<S: Scalar> GeoPoint<S> {
    pub fn new(lat: S, lon: S) -> Result<Self, GeoError> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !self.lat.is_finite() || !self.lon.is_finite() {
            return Err(GeoError::NonFinite);
        }
        if self.lat.abs() > S::lit(90.0) || self.lon.abs() > S::lit(180.0) {
            return Err(GeoError::OutOfRange {
                lat: self.lat.as_f64(),
                lon: self.lon.as_f64(),
            });
        }
        Ok(())
    }
}

impl GeoPoint<f64> {
    /// Bit-level key for exact-coordinate grouping.
    pub(crate) fn key(&self) -> (u64, u64) {
        (self.lat.to_bits(), self.lon.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub address_id: String,
    pub geo: GeoPoint,
    pub country_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutputRef {
    pub tx_id: String,
    pub output_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub tx_id: String,
    /// Unix seconds, UTC.
    pub timestamp: i64,
    pub value: Satoshi,
    pub sender: Endpoint,
    pub receiver: Endpoint,
    /// Spent outputs; empty for a coinbase-like origin.
    pub inputs: Vec<OutputRef>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("empty tx_id")]
    EmptyTxId,
    #[error("empty address_id")]
    EmptyAddress,
    #[error(transparent)]
    Geo(#[from] GeoError),
}

impl TransactionRecord {
    pub fn validate(&self) -> Result<(), RecordError> {
        if self.tx_id.is_empty() {
            return Err(RecordError::EmptyTxId);
        }
        for ep in [&self.sender, &self.receiver] {
            if ep.address_id.is_empty() {
                return Err(RecordError::EmptyAddress);
            }
            ep.geo.validate()?;
        }
        Ok(())
    }
}

macro_rules! labelled_enum {
    ($(#[$m:meta])* $name:ident { $($var:ident => $label:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($var),+ }

        impl $name {
            pub const ALL: [$name; 3] = [$($name::$var),+];

            pub fn label(self) -> &'static str {
                match self { $($name::$var => $label),+ }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($label => Ok($name::$var),)+
                    _ => Err(format!("unknown {} {s:?}", stringify!($name))),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.label())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

labelled_enum!(
    /// The three continents carried by the model. Oceania is folded into AS.
    Continent { Am => "AM", As => "AS", Eu => "EU" }
);

labelled_enum!(
    /// Behavioural role of an address.
    Role { Miner => "MI", Merchant => "ME", User => "US" }
);

/// One of the nine Markov states. Ordered continent-major:
/// (AM, AS, EU) x (Miner, Merchant, User).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserGroup {
    pub continent: Continent,
    pub role: Role,
}

pub const GROUP_COUNT: usize = 9;

impl UserGroup {
    pub const fn new(role: Role, continent: Continent) -> Self {
        UserGroup { continent, role }
    }

    pub fn all() -> [UserGroup; GROUP_COUNT] {
        std::array::from_fn(UserGroup::from_index)
    }

    pub fn index(self) -> usize {
        self.continent.index() * 3 + self.role.index()
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < GROUP_COUNT, "group index {i} out of range");
        UserGroup {
            continent: Continent::ALL[i / 3],
            role: Role::ALL[i % 3],
        }
    }

    /// `"MI-AM"` style label.
    pub fn label(self) -> String {
        format!("{}-{}", self.role.label(), self.continent.label())
    }
}

impl fmt::Display for UserGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.role, self.continent)
    }
}

impl FromStr for UserGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (r, c) = s
            .split_once('-')
            .ok_or_else(|| format!("malformed group label {s:?}"))?;
        Ok(UserGroup::new(r.parse()?, c.parse()?))
    }
}

impl Serialize for UserGroup {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UserGroup {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("val must be positive")]
    NonPositiveVal,
    #[error("tx_miner must be at least 1")]
    ZeroTxMiner,
    #[error("tx_merch must be at least 1")]
    ZeroTxMerch,
}

/// Classification thresholds `(val, tx_miner, tx_merch)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamTriple {
    pub val: Satoshi,
    pub tx_miner: u32,
    pub tx_merch: u32,
}

impl ParamTriple {
    pub fn new(val: Satoshi, tx_miner: u32, tx_merch: u32) -> Result<Self, ParamError> {
        if val.0 == 0 {
            return Err(ParamError::NonPositiveVal);
        }
        if tx_miner == 0 {
            return Err(ParamError::ZeroTxMiner);
        }
        if tx_merch == 0 {
            return Err(ParamError::ZeroTxMerch);
        }
        Ok(ParamTriple {
            val,
            tx_miner,
            tx_merch,
        })
    }

    pub fn from_btc(val_btc: f64, tx_miner: u32, tx_merch: u32) -> Result<Self, ParamError> {
        let val = Satoshi::from_btc(val_btc).map_err(|_| ParamError::NonPositiveVal)?;
        ParamTriple::new(val, tx_miner, tx_merch)
    }
}

impl fmt::Display for ParamTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} BTC, {}, {})", self.val, self.tx_miner, self.tx_merch)
    }
}

#[derive(Serialize, Deserialize)]
struct ParamTripleRepr {
    val_btc: Satoshi,
    tx_miner: u32,
    tx_merch: u32,
}

impl Serialize for ParamTriple {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ParamTripleRepr {
            val_btc: self.val,
            tx_miner: self.tx_miner,
            tx_merch: self.tx_merch,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ParamTriple {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = ParamTripleRepr::deserialize(deserializer)?;
        ParamTriple::new(r.val_btc, r.tx_miner, r.tx_merch).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Sender,
    Receiver,
}

/// One appearance of an address in a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Participation {
    pub record: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("duplicate tx_id {0:?}")]
    DuplicateTxId(String),
    #[error("record {tx_id:?} is invalid: {source}")]
    InvalidRecord {
        tx_id: String,
        #[source]
        source: RecordError,
    },
    #[error("record {tx_id:?} timestamp {timestamp} outside window [{start}, {end}]")]
    OutsideWindow {
        tx_id: String,
        timestamp: i64,
        start: i64,
        end: i64,
    },
    #[error("window start {0} after end {1}")]
    InvalidWindow(i64, i64),
}

/// Immutable, sorted and indexed collection of records.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<TransactionRecord>,
    window: (i64, i64),
    index: HashMap<String, usize>,
    address_index: BTreeMap<String, Vec<Participation>>,
}

impl Dataset {
    /// Builds a dataset whose window is the span of the record timestamps.
    pub fn build(records: Vec<TransactionRecord>) -> Result<Self, DatasetError> {
        let (lo, hi) = records
            .iter()
            .fold((i64::MAX, i64::MIN), |(lo, hi), r| {
                (lo.min(r.timestamp), hi.max(r.timestamp))
            });
        if records.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        Dataset::with_window(records, (lo, hi))
    }

    /// Builds a dataset with a declared observation window (inclusive).
    pub fn with_window(
        mut records: Vec<TransactionRecord>,
        window: (i64, i64),
    ) -> Result<Self, DatasetError> {
        if records.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        if window.0 > window.1 {
            return Err(DatasetError::InvalidWindow(window.0, window.1));
        }
        for r in &records {
            r.validate().map_err(|source| DatasetError::InvalidRecord {
                tx_id: r.tx_id.clone(),
                source,
            })?;
            if r.timestamp < window.0 || r.timestamp > window.1 {
                return Err(DatasetError::OutsideWindow {
                    tx_id: r.tx_id.clone(),
                    timestamp: r.timestamp,
                    start: window.0,
                    end: window.1,
                });
            }
        }
        records.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.tx_id.cmp(&b.tx_id))
        });

        let mut index = HashMap::with_capacity(records.len());
        let mut address_index: BTreeMap<String, Vec<Participation>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.tx_id.clone(), i).is_some() {
                return Err(DatasetError::DuplicateTxId(r.tx_id.clone()));
            }
            for (ep, side) in [(&r.sender, Side::Sender), (&r.receiver, Side::Receiver)] {
                address_index
                    .entry(ep.address_id.clone())
                    .or_default()
                    .push(Participation { record: i, side });
            }
        }
        Ok(Dataset {
            records,
            window,
            index,
            address_index,
        })
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Always false for a constructed dataset.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    pub fn get(&self, tx_id: &str) -> Option<&TransactionRecord> {
        self.index.get(tx_id).map(|&i| &self.records[i])
    }

    pub fn position(&self, tx_id: &str) -> Option<usize> {
        self.index.get(tx_id).copied()
    }

    /// Every address with its (record, side) appearances in record order.
    pub fn address_index(&self) -> &BTreeMap<String, Vec<Participation>> {
        &self.address_index
    }

    pub fn participations(&self, address_id: &str) -> &[Participation] {
        self.address_index
            .get(address_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn into_records(self) -> Vec<TransactionRecord> {
        self.records
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn endpoint(addr: &str, lat: f64, lon: f64, country: Option<&str>) -> Endpoint {
        Endpoint {
            address_id: addr.to_string(),
            geo: GeoPoint { lat, lon },
            country_code: country.map(str::to_string),
        }
    }

    pub fn record(tx: &str, ts: i64, btc: f64, from: Endpoint, to: Endpoint) -> TransactionRecord {
        TransactionRecord {
            tx_id: tx.to_string(),
            timestamp: ts,
            value: Satoshi::from_btc(btc).unwrap(),
            sender: from,
            receiver: to,
            inputs: Vec::new(),
        }
    }

    /// `from -> to` between two fixed New York / Berlin points.
    pub fn simple(tx: &str, ts: i64, from: &str, to: &str) -> TransactionRecord {
        record(
            tx,
            ts,
            1.0,
            endpoint(from, 40.7128, -74.006, Some("US")),
            endpoint(to, 52.52, 13.405, Some("DE")),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_dataset_rejected() {
        assert_eq!(Dataset::build(vec![]).unwrap_err(), DatasetError::EmptyDataset);
    }

    #[test]
    fn duplicate_tx_id_rejected() {
        let err = Dataset::build(vec![simple("t1", 1, "a", "b"), simple("t1", 2, "c", "d")])
            .unwrap_err();
        assert_eq!(err, DatasetError::DuplicateTxId("t1".into()));
    }

    #[test]
    fn records_sorted_by_timestamp_then_id() {
        let ds = Dataset::build(vec![
            simple("c", 30, "a", "b"),
            simple("b", 10, "a", "b"),
            simple("a", 30, "a", "b"),
        ])
        .unwrap();
        let ids: Vec<_> = ds.records().iter().map(|r| r.tx_id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
        assert_eq!(ds.window(), (10, 30));
        assert_eq!(ds.get("c").unwrap().timestamp, 30);
        assert_eq!(ds.position("b"), Some(0));
    }

    #[test]
    fn window_enforced() {
        let err = Dataset::with_window(vec![simple("t", 100, "a", "b")], (0, 50)).unwrap_err();
        assert!(matches!(err, DatasetError::OutsideWindow { .. }));
    }

    #[test]
    fn invalid_record_rejected() {
        let mut r = simple("t", 1, "a", "b");
        r.sender.geo.lat = 91.0;
        assert!(matches!(
            Dataset::build(vec![r]).unwrap_err(),
            DatasetError::InvalidRecord { .. }
        ));
    }

    #[test]
    fn satoshi_parse_and_display() {
        assert_eq!(Satoshi::parse_btc("25").unwrap(), Satoshi(2_500_000_000));
        assert_eq!(Satoshi::parse_btc("0.001").unwrap(), Satoshi(100_000));
        assert_eq!(Satoshi::parse_btc(".5").unwrap(), Satoshi(50_000_000));
        assert_eq!(Satoshi::parse_btc("1.234567890").unwrap(), Satoshi(123_456_789));
        assert_eq!(Satoshi::parse_btc("1e-3").unwrap(), Satoshi(100_000));
        assert_eq!(Satoshi::parse_btc("-1").unwrap_err(), ValueError::Negative);
        assert_eq!(Satoshi::parse_btc("NaN").unwrap_err(), ValueError::NonFinite);
        assert!(matches!(
            Satoshi::parse_btc("1.000000001"),
            Err(ValueError::Malformed(_))
        ));
        assert!(matches!(Satoshi::parse_btc("abc"), Err(ValueError::Malformed(_))));
        assert_eq!(Satoshi(2_500_000_000).to_string(), "25");
        assert_eq!(Satoshi(100_000).to_string(), "0.001");
        assert_eq!(Satoshi(1).to_string(), "0.00000001");
    }

    #[test]
    fn group_order_is_continent_major() {
        let labels: Vec<_> = UserGroup::all().iter().map(|g| g.label()).collect();
        assert_eq!(
            labels,
            ["MI-AM", "ME-AM", "US-AM", "MI-AS", "ME-AS", "US-AS", "MI-EU", "ME-EU", "US-EU"]
        );
        for (i, g) in UserGroup::all().into_iter().enumerate() {
            assert_eq!(g.index(), i);
            assert_eq!(g.label().parse::<UserGroup>().unwrap(), g);
        }
    }

    #[test]
    fn param_triple_validation() {
        assert!(ParamTriple::from_btc(15.0, 50, 120).is_ok());
        assert_eq!(
            ParamTriple::from_btc(0.0, 50, 120).unwrap_err(),
            ParamError::NonPositiveVal
        );
        assert_eq!(
            ParamTriple::from_btc(1.0, 0, 120).unwrap_err(),
            ParamError::ZeroTxMiner
        );
        let json = serde_json::to_string(&ParamTriple::from_btc(15.0, 50, 120).unwrap()).unwrap();
        assert_eq!(json, r#"{"val_btc":15.0,"tx_miner":50,"tx_merch":120}"#);
    }

    proptest! {
        #[test]
        fn satoshi_display_round_trips(s in 0u64..=21_000_000 * SATOSHI_PER_BTC) {
            let sat = Satoshi(s);
            prop_assert_eq!(Satoshi::parse_btc(&sat.to_string()).unwrap(), sat);
            prop_assert_eq!(Satoshi::from_btc(sat.to_btc()).unwrap(), sat);
        }

        #[test]
        fn index_is_sorted_and_complete(
            stamps in proptest::collection::vec((0i64..1000, 0usize..6, 0usize..6), 1..60)
        ) {
            let records: Vec<_> = stamps
                .iter()
                .enumerate()
                .map(|(i, &(ts, a, b))| simple(&format!("tx{i}"), ts, &format!("a{a}"), &format!("a{b}")))
                .collect();
            let n = records.len();
            let ds = Dataset::build(records).unwrap();
            prop_assert!(ds.records().windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
            let total: usize = ds.address_index().values().map(Vec::len).sum();
            prop_assert_eq!(total, 2 * n);
            for (addr, parts) in ds.address_index() {
                for p in parts {
                    let r = &ds.records()[p.record];
                    let ep = match p.side { Side::Sender => &r.sender, Side::Receiver => &r.receiver };
                    prop_assert_eq!(&ep.address_id, addr);
                }
            }
        }
    }
}
