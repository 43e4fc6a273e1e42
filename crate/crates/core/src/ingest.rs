//! Reading and writing transaction files, and continent tagging.
//!
//! Two formats are supported: CSV with the fixed header [`CSV_HEADER`], and
//! JSON-lines with the same field names (inputs as an array of
//! `{tx_id, output_index}` objects). Bad rows are counted in the
//! [`IngestReport`] and skipped; only an unreadable source, an unknown format
//! or a wrong CSV header aborts parsing.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Continent, Endpoint, GeoError, GeoPoint, OutputRef, Satoshi, TransactionRecord, ValueError,
};

pub const CSV_HEADER: [&str; 12] = [
    "tx_id",
    "timestamp",
    "value_btc",
    "sender_address",
    "sender_lat",
    "sender_lon",
    "sender_country",
    "receiver_address",
    "receiver_lat",
    "receiver_lon",
    "receiver_country",
    "inputs",
];

const MAX_REJECT_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Format, IngestError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default()
            .to_ascii_lowercase();
        ext.parse()
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

impl FromStr for Format {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, IngestError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json-lines" | "ndjson" => Ok(Format::Jsonl),
            _ => Err(IngestError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable source: {0}")]
    UnreadableSource(String),
    #[error("unknown format {0:?} (expected csv or jsonl)")]
    UnknownFormat(String),
    #[error("CSV header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    /// Wrong column count, unparsable JSON, or an unparsable number.
    Malformed,
    MalformedInputs,
    EmptyTxId,
    EmptyAddress,
    InvalidCountryCode,
    OutOfRangeCoordinate,
    NegativeValue,
    NonFiniteValue,
    UnsupportedRegion,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    pub rejection_reasons: BTreeMap<RejectReason, usize>,
    /// `(min, max)` timestamp over accepted records.
    pub window: Option<(i64, i64)>,
    /// Accepted endpoints lying near a continent boundary, by country code
    /// (`"??"` when absent).
    pub boundary_flags: BTreeMap<String, usize>,
    /// First few rejected rows, for diagnostics.
    pub rejected_samples: Vec<RejectedRow>,
}

impl IngestReport {
    fn reject(&mut self, row: usize, reason: RejectReason) {
        self.rejected += 1;
        *self.rejection_reasons.entry(reason).or_default() += 1;
        if self.rejected_samples.len() < MAX_REJECT_SAMPLES {
            self.rejected_samples.push(RejectedRow { row, reason });
        }
    }

    fn accept(&mut self, rec: &TransactionRecord, rules: &ContinentRules) {
        self.accepted += 1;
        self.window = Some(match self.window {
            None => (rec.timestamp, rec.timestamp),
            Some((lo, hi)) => (lo.min(rec.timestamp), hi.max(rec.timestamp)),
        });
        for ep in [&rec.sender, &rec.receiver] {
            if rules.near_boundary(&ep.geo) {
                let key = ep.country_code.clone().unwrap_or_else(|| "??".into());
                *self.boundary_flags.entry(key).or_default() += 1;
            }
        }
    }

    pub fn total(&self) -> usize {
        self.accepted + self.rejected
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "accepted {}, rejected {}", self.accepted, self.rejected)?;
        for (reason, n) in &self.rejection_reasons {
            write!(f, "\n  {reason}: {n}")?;
        }
        if !self.boundary_flags.is_empty() {
            write!(f, "\n  near continent boundaries:")?;
            for (cc, n) in &self.boundary_flags {
                write!(f, " {cc}={n}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("coordinate ({lat}, {lon}) lies in an unsupported region")]
pub struct UnsupportedRegion {
    pub lat: f64,
    pub lon: f64,
}

/// Axis-aligned box in degrees, edges inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GeoBox {
    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.lat_min..=self.lat_max).contains(&p.lat) && (self.lon_min..=self.lon_max).contains(&p.lon)
    }
}

/// Bounding rules mapping coordinates onto continents.
///
/// Checked in order: `lon < am_max_lon` is AM; inside `unsupported` is
/// rejected; `lat >= eu_min_lat && lon < eu_max_lon` is EU; anything else
/// (including Oceania) is AS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinentRules {
    pub am_max_lon: f64,
    pub eu_min_lat: f64,
    pub eu_max_lon: f64,
    pub unsupported: GeoBox,
    /// Distance in degrees from a rule edge within which a point is flagged.
    pub boundary_margin: f64,
}

impl Default for ContinentRules {
    fn default() -> Self {
        ContinentRules {
            am_max_lon: -30.0,
            eu_min_lat: 35.0,
            eu_max_lon: 60.0,
            unsupported: GeoBox {
                lat_min: -35.0,
                lat_max: 35.0,
                lon_min: -20.0,
                lon_max: 52.0,
            },
            boundary_margin: 2.0,
        }
    }
}

impl ContinentRules {
    pub fn assign(&self, p: &GeoPoint) -> Result<Continent, UnsupportedRegion> {
        if p.lon < self.am_max_lon {
            Ok(Continent::Am)
        } else if self.unsupported.contains(p) {
            Err(UnsupportedRegion {
                lat: p.lat,
                lon: p.lon,
            })
        } else if p.lat >= self.eu_min_lat && p.lon < self.eu_max_lon {
            Ok(Continent::Eu)
        } else {
            Ok(Continent::As)
        }
    }

    /// True when moving the point by `boundary_margin` degrees could change
    /// its assignment.
    pub fn near_boundary(&self, p: &GeoPoint) -> bool {
        let m = self.boundary_margin;
        if m <= 0.0 {
            return false;
        }
        let base = self.assign(p).ok();
        [(m, 0.0), (-m, 0.0), (0.0, m), (0.0, -m)]
            .iter()
            .any(|&(dlat, dlon)| {
                let q = GeoPoint {
                    lat: (p.lat + dlat).clamp(-90.0, 90.0),
                    lon: (p.lon + dlon).clamp(-180.0, 180.0),
                };
                self.assign(&q).ok() != base
            })
    }
}

/// Assigns a continent with the default rules.
pub fn assign_continent(p: &GeoPoint) -> Result<Continent, UnsupportedRegion> {
    ContinentRules::default().assign(p)
}

/// Parses with the default continent rules.
pub fn parse_records<R: Read>(
    source: R,
    format: Format,
) -> Result<(Vec<TransactionRecord>, IngestReport), IngestError> {
    parse_records_with(source, format, &ContinentRules::default())
}

pub fn parse_records_with<R: Read>(
    mut source: R,
    format: Format,
    rules: &ContinentRules,
) -> Result<(Vec<TransactionRecord>, IngestReport), IngestError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| IngestError::UnreadableSource(e.to_string()))?;
    let rows: Vec<Result<TransactionRecord, RejectReason>> = match format {
        Format::Csv => csv_rows(&text)?,
        Format::Jsonl => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(json_row)
            .collect(),
    };

    let mut report = IngestReport::default();
    let mut records = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        let checked = row.and_then(|r| {
            for ep in [&r.sender, &r.receiver] {
                rules
                    .assign(&ep.geo)
                    .map_err(|_| RejectReason::UnsupportedRegion)?;
            }
            Ok(r)
        });
        match checked {
            Ok(r) => {
                report.accept(&r, rules);
                records.push(r);
            }
            Err(reason) => report.reject(i + 1, reason),
        }
    }
    Ok((records, report))
}

/// Opens `path` and parses it, inferring the format from the extension when
/// `format` is `None`.
pub fn read_path(
    path: &Path,
    format: Option<Format>,
    rules: &ContinentRules,
) -> Result<(Vec<TransactionRecord>, IngestReport), IngestError> {
    let format = match format {
        Some(f) => f,
        None => Format::from_path(path)?,
    };
    let file = File::open(path)
        .map_err(|e| IngestError::UnreadableSource(format!("{}: {e}", path.display())))?;
    parse_records_with(io::BufReader::new(file), format, rules)
}

fn csv_rows(text: &str) -> Result<Vec<Result<TransactionRecord, RejectReason>>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| IngestError::UnreadableSource(e.to_string()))?
        .clone();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(IngestError::HeaderMismatch {
            expected: CSV_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(reader
        .records()
        .map(|row| {
            let row = row.map_err(|_| RejectReason::Malformed)?;
            if row.len() != CSV_HEADER.len() {
                return Err(RejectReason::Malformed);
            }
            csv_record(&row)
        })
        .collect())
}

fn csv_record(row: &csv::StringRecord) -> Result<TransactionRecord, RejectReason> {
    let f = |i: usize| row[i].trim();
    let timestamp: i64 = f(1).parse().map_err(|_| RejectReason::Malformed)?;
    let value = Satoshi::parse_btc(f(2)).map_err(value_reason)?;
    let coord = |s: &str| s.parse::<f64>().map_err(|_| RejectReason::Malformed);
    let sender = endpoint(f(3), coord(f(4))?, coord(f(5))?, f(6))?;
    let receiver = endpoint(f(7), coord(f(8))?, coord(f(9))?, f(10))?;
    let inputs = parse_inputs(f(11))?;
    finish(f(0), timestamp, value, sender, receiver, inputs)
}

fn parse_inputs(s: &str) -> Result<Vec<OutputRef>, RejectReason> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (tx, idx) = p.rsplit_once(':').ok_or(RejectReason::MalformedInputs)?;
            let output_index = idx.parse().map_err(|_| RejectReason::MalformedInputs)?;
            if tx.is_empty() {
                return Err(RejectReason::MalformedInputs);
            }
            Ok(OutputRef {
                tx_id: tx.to_string(),
                output_index,
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    tx_id: String,
    timestamp: i64,
    value_btc: f64,
    sender_address: String,
    sender_lat: f64,
    sender_lon: f64,
    sender_country: Option<String>,
    receiver_address: String,
    receiver_lat: f64,
    receiver_lon: f64,
    receiver_country: Option<String>,
    #[serde(default)]
    inputs: Vec<OutputRef>,
}

fn json_row(line: &str) -> Result<TransactionRecord, RejectReason> {
    let row: JsonRow = serde_json::from_str(line).map_err(|_| RejectReason::Malformed)?;
    let value = Satoshi::from_btc(row.value_btc).map_err(value_reason)?;
    let sender = endpoint(
        &row.sender_address,
        row.sender_lat,
        row.sender_lon,
        row.sender_country.as_deref().unwrap_or(""),
    )?;
    let receiver = endpoint(
        &row.receiver_address,
        row.receiver_lat,
        row.receiver_lon,
        row.receiver_country.as_deref().unwrap_or(""),
    )?;
    if row.inputs.iter().any(|i| i.tx_id.is_empty()) {
        return Err(RejectReason::MalformedInputs);
    }
    finish(&row.tx_id, row.timestamp, value, sender, receiver, row.inputs)
}

fn value_reason(e: ValueError) -> RejectReason {
    match e {
        ValueError::Negative => RejectReason::NegativeValue,
        ValueError::NonFinite => RejectReason::NonFiniteValue,
        ValueError::Malformed(_) | ValueError::Overflow => RejectReason::Malformed,
    }
}

fn endpoint(addr: &str, lat: f64, lon: f64, country: &str) -> Result<Endpoint, RejectReason> {
    if addr.is_empty() {
        return Err(RejectReason::EmptyAddress);
    }
    let geo = GeoPoint::new(lat, lon).map_err(|e| match e {
        GeoError::NonFinite | GeoError::OutOfRange { .. } => RejectReason::OutOfRangeCoordinate,
    })?;
    let country_code = match country.trim() {
        "" => None,
        c if is_country_code(c) => Some(c.to_ascii_uppercase()),
        _ => return Err(RejectReason::InvalidCountryCode),
    };
    Ok(Endpoint {
        address_id: addr.to_string(),
        geo,
        country_code,
    })
}

/// ISO 3166 alpha-2 shape check (two ASCII letters); not a registry lookup.
pub fn is_country_code(s: &str) -> bool {
    s.len() == 2 && s.bytes().all(|b| b.is_ascii_alphabetic())
}

fn finish(
    tx_id: &str,
    timestamp: i64,
    value: Satoshi,
    sender: Endpoint,
    receiver: Endpoint,
    inputs: Vec<OutputRef>,
) -> Result<TransactionRecord, RejectReason> {
    if tx_id.is_empty() {
        return Err(RejectReason::EmptyTxId);
    }
    Ok(TransactionRecord {
        tx_id: tx_id.to_string(),
        timestamp,
        value,
        sender,
        receiver,
        inputs,
    })
}

/// Writes records in the given format. Coordinates use the shortest
/// round-trip decimal form, so parsing the output reproduces every field.
pub fn write_records<W: Write>(
    sink: W,
    records: &[TransactionRecord],
    format: Format,
) -> io::Result<()> {
    let mut sink = io::BufWriter::new(sink);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut sink);
            w.write_record(CSV_HEADER)?;
            for r in records {
                let inputs = r
                    .inputs
                    .iter()
                    .map(|i| format!("{}:{}", i.tx_id, i.output_index))
                    .collect::<Vec<_>>()
                    .join(";");
                w.write_record([
                    r.tx_id.as_str(),
                    &r.timestamp.to_string(),
                    &r.value.to_string(),
                    &r.sender.address_id,
                    &r.sender.geo.lat.to_string(),
                    &r.sender.geo.lon.to_string(),
                    r.sender.country_code.as_deref().unwrap_or(""),
                    &r.receiver.address_id,
                    &r.receiver.geo.lat.to_string(),
                    &r.receiver.geo.lon.to_string(),
                    r.receiver.country_code.as_deref().unwrap_or(""),
                    &inputs,
                ])?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            for r in records {
                let row = JsonRow {
                    tx_id: r.tx_id.clone(),
                    timestamp: r.timestamp,
                    value_btc: r.value.to_btc(),
                    sender_address: r.sender.address_id.clone(),
                    sender_lat: r.sender.geo.lat,
                    sender_lon: r.sender.geo.lon,
                    sender_country: r.sender.country_code.clone(),
                    receiver_address: r.receiver.address_id.clone(),
                    receiver_lat: r.receiver.geo.lat,
                    receiver_lon: r.receiver.geo.lon,
                    receiver_country: r.receiver.country_code.clone(),
                    inputs: r.inputs.clone(),
                };
                serde_json::to_writer(&mut sink, &row)?;
                sink.write_all(b"\n")?;
            }
        }
    }
    sink.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "tx_id,timestamp,value_btc,sender_address,sender_lat,sender_lon,sender_country,receiver_address,receiver_lat,receiver_lon,receiver_country,inputs";

    fn csv(rows: &[&str]) -> String {
        let mut s = String::from(HEADER);
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s
    }

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint { lat, lon }
    }

    #[test]
    fn continent_examples() {
        assert_eq!(assign_continent(&pt(-33.87, 151.21)), Ok(Continent::As));
        assert_eq!(assign_continent(&pt(40.71, -74.01)), Ok(Continent::Am));
        assert!(assign_continent(&pt(-4.32, 15.31)).is_err());
        assert_eq!(assign_continent(&pt(52.52, 13.405)), Ok(Continent::Eu));
        assert_eq!(assign_continent(&pt(55.75, 37.62)), Ok(Continent::Eu));
        assert_eq!(assign_continent(&pt(35.68, 139.69)), Ok(Continent::As));
        assert_eq!(assign_continent(&pt(-23.55, -46.63)), Ok(Continent::Am));
    }

    #[test]
    fn out_of_range_latitude_rejected() {
        let text = csv(&["t1,100,1.5,a,95.0,0,,b,10,100,,"]);
        let (recs, rep) = parse_records(text.as_bytes(), Format::Csv).unwrap();
        assert!(recs.is_empty());
        assert_eq!(rep.rejection_reasons[&RejectReason::OutOfRangeCoordinate], 1);
    }

    #[test]
    fn negative_value_rejected() {
        let text = csv(&["t1,100,-2,a,10,100,,b,10,100,,"]);
        let (_, rep) = parse_records(text.as_bytes(), Format::Csv).unwrap();
        assert_eq!(rep.rejection_reasons[&RejectReason::NegativeValue], 1);
    }

    #[test]
    fn json_row_accepted_verbatim() {
        let line = r#"{"tx_id":"t9","timestamp":1381017600,"value_btc":0.25,"sender_address":"a","sender_lat":40.71,"sender_lon":-74.01,"sender_country":"US","receiver_address":"b","receiver_lat":52.52,"receiver_lon":13.405,"receiver_country":null,"inputs":[{"tx_id":"t1","output_index":3}]}"#;
        let (recs, rep) = parse_records(line.as_bytes(), Format::Jsonl).unwrap();
        assert_eq!(rep.accepted, 1);
        let r = &recs[0];
        assert_eq!(r.tx_id, "t9");
        assert_eq!(r.timestamp, 1381017600);
        assert_eq!(r.value, Satoshi(25_000_000));
        assert_eq!(r.sender.geo, pt(40.71, -74.01));
        assert_eq!(r.sender.country_code.as_deref(), Some("US"));
        assert_eq!(r.receiver.country_code, None);
        assert_eq!(
            r.inputs,
            vec![OutputRef {
                tx_id: "t1".into(),
                output_index: 3
            }]
        );
    }

    #[test]
    fn counts_cover_every_row() {
        let text = csv(&[
            "t1,100,1,a,10,100,CN,b,10,100,CN,",
            "t2,100,1,a,10,100",
            "t3,abc,1,a,10,100,,b,10,100,,",
            "t4,100,1,a,0,10,,b,10,100,,",
            "t5,100,1,,10,100,,b,10,100,,",
            "t6,100,1,a,10,100,,b,10,100,,x:1;bad",
            "t7,100,1,a,10,100,CHN,b,10,100,,",
            "t8,200,1,a,10,100,,b,10,100,,t1:0;t1:1",
        ]);
        let (recs, rep) = parse_records(text.as_bytes(), Format::Csv).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(rep.total(), 8);
        assert_eq!(rep.window, Some((100, 200)));
        let r = &rep.rejection_reasons;
        assert_eq!(r[&RejectReason::Malformed], 2);
        assert_eq!(r[&RejectReason::UnsupportedRegion], 1);
        assert_eq!(r[&RejectReason::EmptyAddress], 1);
        assert_eq!(r[&RejectReason::MalformedInputs], 1);
        assert_eq!(r[&RejectReason::InvalidCountryCode], 1);
        assert_eq!(recs[1].inputs.len(), 2);
    }

    #[test]
    fn header_mismatch_is_fatal() {
        let err = parse_records("a,b,c\n1,2,3".as_bytes(), Format::Csv).unwrap_err();
        assert!(matches!(err, IngestError::HeaderMismatch { .. }));
    }

    #[test]
    fn empty_input_yields_nothing() {
        for f in [Format::Csv, Format::Jsonl] {
            let (recs, rep) = parse_records("".as_bytes(), f).unwrap();
            assert!(recs.is_empty());
            assert_eq!(rep.total(), 0);
        }
    }

    #[test]
    fn invalid_utf8_is_unreadable() {
        let bytes: &[u8] = &[0xff, 0xfe, 0x00];
        assert!(matches!(
            parse_records(bytes, Format::Csv),
            Err(IngestError::UnreadableSource(_))
        ));
    }

    #[test]
    fn unknown_format_name() {
        assert!(matches!("xml".parse::<Format>(), Err(IngestError::UnknownFormat(_))));
        assert_eq!(Format::from_path(Path::new("x.JSONL")).unwrap(), Format::Jsonl);
    }

    #[test]
    fn boundary_points_flagged() {
        let text = csv(&["t1,100,1,a,41.0,29.0,TR,b,10,100,CN,"]);
        let (_, rep) = parse_records(text.as_bytes(), Format::Csv).unwrap();
        assert_eq!(rep.boundary_flags.get("TR"), None);
        let text = csv(&["t1,100,1,a,36.0,30.0,TR,b,10,100,CN,"]);
        let (_, rep) = parse_records(text.as_bytes(), Format::Csv).unwrap();
        assert_eq!(rep.boundary_flags.get("TR"), Some(&1));
        assert_eq!(rep.boundary_flags.get("CN"), None);
    }

    fn arb_endpoint() -> impl Strategy<Value = Endpoint> {
        (
            "[a-z0-9]{1,12}",
            -90.0f64..=90.0,
            -180.0f64..=-31.0,
            proptest::option::of("[A-Z]{2}"),
        )
            .prop_map(|(address_id, lat, lon, country_code)| Endpoint {
                address_id,
                geo: GeoPoint { lat, lon },
                country_code,
            })
    }

    fn arb_record() -> impl Strategy<Value = TransactionRecord> {
        (
            "[a-z0-9]{1,10}",
            0i64..2_000_000_000,
            0u64..2_100_000_000_000_000,
            arb_endpoint(),
            arb_endpoint(),
            proptest::collection::vec(("[a-z0-9]{1,10}", 0u32..100), 0..3),
        )
            .prop_map(|(tx_id, timestamp, sats, sender, receiver, ins)| TransactionRecord {
                tx_id,
                timestamp,
                value: Satoshi(sats),
                sender,
                receiver,
                inputs: ins
                    .into_iter()
                    .map(|(tx_id, output_index)| OutputRef {
                        tx_id,
                        output_index,
                    })
                    .collect(),
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(records in proptest::collection::vec(arb_record(), 0..20)) {
            for f in [Format::Csv, Format::Jsonl] {
                let mut buf = Vec::new();
                write_records(&mut buf, &records, f).unwrap();
                let (parsed, rep) = parse_records(buf.as_slice(), f).unwrap();
                prop_assert_eq!(rep.rejected, 0);
                prop_assert_eq!(&parsed, &records);
            }
        }

        #[test]
        fn assignment_is_total_outside_africa(lat in -90.0f64..=90.0, lon in -180.0f64..=180.0) {
            let p = pt(lat, lon);
            let rules = ContinentRules::default();
            let res = rules.assign(&p);
            let in_box = rules.unsupported.contains(&p) && lon >= rules.am_max_lon;
            prop_assert_eq!(res.is_err(), in_box);
            prop_assert_eq!(res, rules.assign(&p));
        }
    }
}
