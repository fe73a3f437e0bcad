//! Price ingestion: CSV loading, log-return construction, and alignment of
//! multi-asset panels on common timestamps.
//!
//! Conventions:
//!
//! - timestamps are integer epoch seconds (UTC) and strictly increasing
//!   within a series;
//! - prices are strictly positive;
//! - a series carries one sampling frequency tag, and series of different
//!   frequencies never mix in one panel;
//! - log returns are r_t = ln(p_t / p_{t-1}); for minute-frequency data,
//!   return pairs that span a UTC session (calendar-day) boundary are
//!   dropped rather than treated as one-minute moves.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling frequency of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Minute,
    Day,
}

impl Frequency {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "minute" | "min" => Ok(Frequency::Minute),
            "day" | "daily" => Ok(Frequency::Day),
            other => Err(Error::InvalidParameter {
                name: "frequency",
                message: format!("expected 'minute' or 'day', got '{other}'"),
            }),
        }
    }
}

impl std::fmt::Display for Frequency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Frequency::Minute => write!(f, "minute"),
            Frequency::Day => write!(f, "day"),
        }
    }
}

/// A single asset's price history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceSeries {
    pub asset_id: String,
    pub frequency: Frequency,
    /// Epoch seconds, strictly increasing.
    pub timestamps: Vec<i64>,
    /// Strictly positive prices, same length as `timestamps`.
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(
        asset_id: impl Into<String>,
        frequency: Frequency,
        timestamps: Vec<i64>,
        prices: Vec<f64>,
    ) -> Result<Self> {
        let asset_id = asset_id.into();
        if timestamps.len() != prices.len() {
            return Err(Error::LengthMismatch {
                context: "price series timestamps/prices",
                left: timestamps.len(),
                right: prices.len(),
            });
        }
        for w in timestamps.windows(2) {
            if w[1] <= w[0] {
                if w[1] == w[0] {
                    return Err(Error::DuplicateTimestamp {
                        asset_id,
                        timestamp: w[0],
                    });
                }
                return Err(Error::invalid(format!(
                    "timestamps not strictly increasing in {asset_id}: {} after {}",
                    w[1], w[0]
                )));
            }
        }
        if let Some(p) = prices.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!(
                "non-positive or non-finite price {p} in {asset_id}"
            )));
        }
        Ok(PriceSeries {
            asset_id,
            frequency,
            timestamps,
            prices,
        })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// A single asset's log-return history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub asset_id: String,
    pub frequency: Frequency,
    /// Timestamp of the *end* of each return interval.
    pub timestamps: Vec<i64>,
    pub returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

/// How to interpret the timestamp column of an input CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimestampFormat {
    /// Try epoch seconds first, then common ISO-8601 shapes.
    Auto,
    /// Integer epoch seconds.
    Epoch,
    /// ISO-8601 date or datetime (e.g. `2018-09-03`, `2018-09-03T14:05:00`).
    Iso8601,
}

/// Column layout of an input CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp_col: String,
    pub price_col: String,
    pub timestamp_format: TimestampFormat,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp_col: "timestamp".to_string(),
            price_col: "price".to_string(),
            timestamp_format: TimestampFormat::Auto,
        }
    }
}

impl CsvSchema {
    /// Reads a plain `key=value` configuration file. Recognized keys:
    /// `timestamp_col`, `price_col`, `timestamp_format` (auto|epoch|iso8601).
    /// Unknown keys are rejected so typos surface immediately.
    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut schema = CsvSchema::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "timestamp_col" => schema.timestamp_col = value.to_string(),
                "price_col" => schema.price_col = value.to_string(),
                "timestamp_format" => {
                    schema.timestamp_format = match value.to_ascii_lowercase().as_str() {
                        "auto" => TimestampFormat::Auto,
                        "epoch" => TimestampFormat::Epoch,
                        "iso8601" | "iso" => TimestampFormat::Iso8601,
                        other => {
                            return Err(Error::InvalidParameter {
                                name: "timestamp_format",
                                message: format!("unknown format '{other}'"),
                            })
                        }
                    }
                }
                other => {
                    return Err(Error::invalid(format!(
                        "{}:{}: unknown config key '{other}'",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Ok(schema)
    }
}

/// A row that failed to parse, with its 1-based line number and reason.
#[derive(Debug, Clone, Serialize)]
pub struct RowDiagnostic {
    pub line: usize,
    pub reason: String,
}

/// Result of loading one CSV: the parsed series plus per-row diagnostics
/// for every rejected row.
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub series: PriceSeries,
    pub rejected: Vec<RowDiagnostic>,
}

fn parse_iso8601(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y/%m/%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    for fmt in ["%Y-%m-%d", "%Y/%m/%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp());
        }
    }
    None
}

fn parse_timestamp(s: &str, format: TimestampFormat) -> Option<i64> {
    let s = s.trim();
    match format {
        TimestampFormat::Epoch => s.parse::<i64>().ok(),
        TimestampFormat::Iso8601 => parse_iso8601(s),
        TimestampFormat::Auto => s.parse::<i64>().ok().or_else(|| parse_iso8601(s)),
    }
}

/// Loads one asset's prices from CSV.
///
/// Malformed rows (unparseable timestamp, unparseable or non-positive
/// price) are rejected with a diagnostic instead of aborting the load;
/// rows are then sorted by timestamp. A duplicate timestamp is a hard
/// error naming the offending timestamp. The asset id is the file stem.
pub fn load_csv(path: &Path, schema: &CsvSchema, frequency: Frequency) -> Result<CsvLoad> {
    let asset_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| path.display().to_string());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .clone();
    let ts_idx = headers
        .iter()
        .position(|h| h == schema.timestamp_col)
        .ok_or_else(|| Error::Csv {
            path: path.display().to_string(),
            message: format!("missing timestamp column '{}'", schema.timestamp_col),
        })?;
    let px_idx = headers
        .iter()
        .position(|h| h == schema.price_col)
        .ok_or_else(|| Error::Csv {
            path: path.display().to_string(),
            message: format!("missing price column '{}'", schema.price_col),
        })?;

    let mut rows: Vec<(i64, f64)> = Vec::new();
    let mut rejected: Vec<RowDiagnostic> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header row
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RowDiagnostic {
                    line,
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let ts_raw = record.get(ts_idx).unwrap_or("");
        let px_raw = record.get(px_idx).unwrap_or("");
        let Some(ts) = parse_timestamp(ts_raw, schema.timestamp_format) else {
            rejected.push(RowDiagnostic {
                line,
                reason: format!("unparseable timestamp '{ts_raw}'"),
            });
            continue;
        };
        let price = match px_raw.parse::<f64>() {
            Ok(p) if p.is_finite() && p > 0.0 => p,
            Ok(p) => {
                rejected.push(RowDiagnostic {
                    line,
                    reason: format!("non-positive price {p}"),
                });
                continue;
            }
            Err(_) => {
                rejected.push(RowDiagnostic {
                    line,
                    reason: format!("unparseable price '{px_raw}'"),
                });
                continue;
            }
        };
        rows.push((ts, price));
    }

    rows.sort_by_key(|(ts, _)| *ts);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateTimestamp {
                asset_id,
                timestamp: w[0].0,
            });
        }
    }

    let (timestamps, prices): (Vec<i64>, Vec<f64>) = rows.into_iter().unzip();
    let series = PriceSeries::new(asset_id, frequency, timestamps, prices)?;
    Ok(CsvLoad { series, rejected })
}

fn utc_day(epoch: i64) -> i64 {
    epoch.div_euclid(86_400)
}

/// Log returns r_t = ln(p_t / p_{t-1}).
///
/// For minute data, pairs whose endpoints fall on different UTC calendar
/// days are treated as session breaks and dropped (overnight gaps are not
/// one-minute returns). Daily data keeps every consecutive pair.
pub fn to_log_returns(p: &PriceSeries) -> Result<ReturnSeries> {
    if p.len() < 2 {
        return Err(Error::SeriesTooShort {
            context: "to_log_returns",
            len: p.len(),
            min: 2,
        });
    }
    let mut timestamps = Vec::with_capacity(p.len() - 1);
    let mut returns = Vec::with_capacity(p.len() - 1);
    for t in 1..p.len() {
        if p.frequency == Frequency::Minute
            && utc_day(p.timestamps[t]) != utc_day(p.timestamps[t - 1])
        {
            continue;
        }
        timestamps.push(p.timestamps[t]);
        returns.push((p.prices[t] / p.prices[t - 1]).ln());
    }
    if returns.is_empty() {
        return Err(Error::invalid(format!(
            "no usable return pairs in {}",
            p.asset_id
        )));
    }
    Ok(ReturnSeries {
        asset_id: p.asset_id.clone(),
        frequency: p.frequency,
        timestamps,
        returns,
    })
}

/// Restricts every series to the timestamps common to all of them.
///
/// Errors if the frequencies differ or the intersection is empty.
/// Aligning already-aligned series is a no-op.
pub fn align(series: &[ReturnSeries]) -> Result<Vec<ReturnSeries>> {
    if series.is_empty() {
        return Err(Error::invalid("align requires at least one series"));
    }
    let freq = series[0].frequency;
    for s in series {
        if s.frequency != freq {
            return Err(Error::MixedFrequencies(format!(
                "{} is {} but {} is {}",
                series[0].asset_id, freq, s.asset_id, s.frequency
            )));
        }
    }
    let mut common: BTreeSet<i64> = series[0].timestamps.iter().copied().collect();
    for s in &series[1..] {
        let set: BTreeSet<i64> = s.timestamps.iter().copied().collect();
        common = common.intersection(&set).copied().collect();
        if common.is_empty() {
            return Err(Error::EmptyAlignment);
        }
    }
    let mut out = Vec::with_capacity(series.len());
    for s in series {
        let mut timestamps = Vec::with_capacity(common.len());
        let mut returns = Vec::with_capacity(common.len());
        for (ts, r) in s.timestamps.iter().zip(&s.returns) {
            if common.contains(ts) {
                timestamps.push(*ts);
                returns.push(*r);
            }
        }
        out.push(ReturnSeries {
            asset_id: s.asset_id.clone(),
            frequency: s.frequency,
            timestamps,
            returns,
        });
    }
    Ok(out)
}

/// An aligned multi-asset return panel (rows = time, columns = assets).
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub asset_ids: Vec<String>,
    pub frequency: Frequency,
    pub timestamps: Vec<i64>,
    /// T × n matrix of log returns.
    pub data: DMatrix<f64>,
}

impl ReturnPanel {
    /// Builds a panel from series, aligning them on common timestamps first.
    pub fn from_series(series: &[ReturnSeries]) -> Result<Self> {
        let aligned = align(series)?;
        let t = aligned[0].len();
        let n = aligned.len();
        let mut data = DMatrix::zeros(t, n);
        for (j, s) in aligned.iter().enumerate() {
            for (i, r) in s.returns.iter().enumerate() {
                data[(i, j)] = *r;
            }
        }
        Ok(ReturnPanel {
            asset_ids: aligned.iter().map(|s| s.asset_id.clone()).collect(),
            frequency: aligned[0].frequency,
            timestamps: aligned[0].timestamps.clone(),
            data,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.data.ncols()
    }

    pub fn n_obs(&self) -> usize {
        self.data.nrows()
    }

    /// Column view as a plain slice copy.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }
}
