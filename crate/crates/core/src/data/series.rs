use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::DataError;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const ACCEPTED_FORMATS: [&str; 3] = [TIMESTAMP_FORMAT, "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    #[serde(rename = "degC")]
    DegC,
    #[serde(rename = "kW")]
    Kw,
    /// Energy per slot.
    #[serde(rename = "kWh")]
    Kwh,
}

impl Units {
    pub fn tag(self) -> &'static str {
        match self {
            Units::DegC => "degC",
            Units::Kw => "kW",
            Units::Kwh => "kWh",
        }
    }

    fn non_negative(self) -> bool {
        self != Units::DegC
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Uniformly spaced series in local time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub start: NaiveDateTime,
    pub slot_seconds: i64,
    pub units: Units,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub len: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl TimeSeries {
    pub fn new(
        start: NaiveDateTime,
        slot_seconds: i64,
        units: Units,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        if slot_seconds <= 0 {
            return Err(DataError::Invalid(format!("slot length must be positive, got {slot_seconds}")));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::Invalid(format!("value {i} is not finite")));
            }
            if units.non_negative() && v < 0.0 {
                return Err(DataError::Invalid(format!("value {i} is negative ({v} {units})")));
            }
        }
        Ok(Self { start, slot_seconds, units, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::seconds(self.slot_seconds * i as i64)
    }

    pub fn slot_hours(&self) -> f64 {
        self.slot_seconds as f64 / 3600.0
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn summary(&self) -> SeriesSummary {
        let n = self.values.len();
        SeriesSummary {
            len: n,
            min: self.values.iter().copied().fold(f64::INFINITY, f64::min),
            max: self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: if n == 0 { f64::NAN } else { self.total() / n as f64 },
        }
    }

    /// `len` slots starting at slot `from`.
    pub fn window(&self, from: usize, len: usize) -> Result<Self, DataError> {
        if from + len > self.len() {
            return Err(DataError::Invalid(format!(
                "window {from}..{} exceeds series of length {}",
                from + len,
                self.len()
            )));
        }
        Ok(Self {
            start: self.timestamp(from),
            slot_seconds: self.slot_seconds,
            units: self.units,
            values: self.values[from..from + len].to_vec(),
        })
    }

    /// Reads `timestamp,<units>` rows, checking the units tag, the slot
    /// length and that no slot is missing or repeated.
    pub fn read_from<R: Read>(reader: R, units: Units, slot_seconds: i64) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| DataError::Parse { row: 0, detail: e.to_string() })?
            .clone();
        if headers.len() != 2 || &headers[0] != "timestamp" {
            return Err(DataError::Parse {
                row: 0,
                detail: format!("expected header `timestamp,{units}`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        if &headers[1] != units.tag() {
            return Err(DataError::Units { expected: units.tag().into(), found: headers[1].to_string() });
        }
        let step = Duration::seconds(slot_seconds);
        let mut start = None;
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| DataError::Parse { row, detail: e.to_string() })?;
            if rec.len() != 2 {
                return Err(DataError::Parse { row, detail: format!("expected 2 fields, got {}", rec.len()) });
            }
            let ts = parse_timestamp(&rec[0]).ok_or_else(|| DataError::Parse {
                row,
                detail: format!("bad timestamp `{}`", &rec[0]),
            })?;
            let v: f64 = rec[1]
                .parse()
                .map_err(|_| DataError::Parse { row, detail: format!("bad value `{}`", &rec[1]) })?;
            let t0 = *start.get_or_insert(ts);
            let expected = t0 + step * values.len() as i32;
            if ts > expected {
                return Err(DataError::Gap { row, timestamp: expected.format(TIMESTAMP_FORMAT).to_string() });
            }
            if ts < expected {
                return Err(DataError::Duplicate { row, timestamp: ts.format(TIMESTAMP_FORMAT).to_string() });
            }
            values.push(v);
        }
        let start = start.ok_or_else(|| DataError::Invalid("series has no rows".into()))?;
        Self::new(start, slot_seconds, units, values)
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| DataError::Invalid(format!("write failed: {e}"));
        w.write_record(["timestamp", self.units.tag()]).map_err(io)?;
        for (i, v) in self.values.iter().enumerate() {
            let ts = self.timestamp(i).format(TIMESTAMP_FORMAT).to_string();
            w.write_record([ts, format!("{v}")]).map_err(io)?;
        }
        w.flush().map_err(|e| DataError::Invalid(format!("write failed: {e}")))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let f = std::fs::File::create(path)
            .map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        self.write_to(std::io::BufWriter::new(f))
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    ACCEPTED_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Loads a series file and logs its summary.
pub fn load_series(path: &Path, units: Units, slot_seconds: i64) -> Result<TimeSeries, DataError> {
    let f = std::fs::File::open(path)
        .map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    let s = TimeSeries::read_from(std::io::BufReader::new(f), units, slot_seconds)?;
    let sum = s.summary();
    log::info!(
        "{}: {} slots, min {:.2}, max {:.2}, mean {:.2} {}",
        path.display(),
        sum.len,
        sum.min,
        sum.max,
        sum.mean,
        units
    );
    Ok(s)
}
