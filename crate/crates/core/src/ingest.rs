//! CSV ingestion, gap handling and windowing.
//!
//! Input files carry a `timestamp` column (ISO-8601, UTC) followed by one
//! column per channel. A channel header may carry its unit in brackets,
//! e.g. `humidity[%RH]`; otherwise the unit comes from [`ColumnSpec`].
//! Empty cells are treated as missing samples.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate timestamp {timestamp} at line {line}")]
    NonMonotonicTimestamps { line: u64, timestamp: String },
    #[error("unknown unit {unit:?} for column {column:?}")]
    UnknownUnit { column: String, unit: String },
    #[error("missing timestamp column {0:?}")]
    MissingTimestampColumn(String),
    #[error("input has no channel columns")]
    NoChannels,
    #[error("input has no data rows")]
    EmptyInput,
    #[error("window of {window} samples is longer than the series ({series} samples)")]
    WindowLongerThanSeries { window: usize, series: usize },
    #[error("invalid ingest configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Physical unit of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "kW")]
    Kw,
    #[serde(rename = "%RH")]
    PercentRh,
    #[serde(rename = "m/s")]
    MPerS,
    #[serde(rename = "C")]
    Celsius,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Kw => "kW",
            Unit::PercentRh => "%RH",
            Unit::MPerS => "m/s",
            Unit::Celsius => "C",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kw" => Ok(Unit::Kw),
            "%" | "%rh" | "percent_rh" | "rh" => Ok(Unit::PercentRh),
            "m/s" | "m_per_s" | "mps" => Ok(Unit::MPerS),
            "c" | "°c" | "celsius" | "degc" => Ok(Unit::Celsius),
            other => Err(other.to_string()),
        }
    }
}

/// How to read an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSpec {
    pub timestamp_column: String,
    /// Unit for channels whose header carries no `[unit]` suffix.
    pub default_unit: String,
    /// Per-channel unit overrides, keyed by channel name.
    pub units: BTreeMap<String, String>,
    pub sample_period_secs: u64,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            timestamp_column: "timestamp".to_string(),
            default_unit: "kW".to_string(),
            units: BTreeMap::new(),
            sample_period_secs: 60,
        }
    }
}

/// A regularly sampled channel.
///
/// `values` may hold NaN for missing samples straight out of [`parse_csv`];
/// after [`fill_gaps`] every value is finite and spans that could not be
/// interpolated are listed in `excluded`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub channel_id: String,
    pub unit: Unit,
    pub sample_period_secs: u64,
    pub start_time: DateTime<Utc>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub excluded: Vec<Range<usize>>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        1.0 / self.sample_period_secs as f64
    }

    pub fn time_at(&self, index: usize) -> DateTime<Utc> {
        self.start_time + TimeDelta::seconds((index as u64 * self.sample_period_secs) as i64)
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|v| !v.is_finite())
    }
}

/// A fixed-length slice of a series, the unit every encoder works on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub parent_channel: String,
    pub start_index: usize,
    pub start_time: DateTime<Utc>,
    pub sample_period_secs: u64,
    pub samples: Vec<f64>,
    pub normalized: bool,
}

impl Window {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        1.0 / self.sample_period_secs as f64
    }

    /// Compact UTC stamp used in file names, e.g. `20230701T000000Z`.
    pub fn start_stamp(&self) -> String {
        self.start_time.format("%Y%m%dT%H%M%SZ").to_string()
    }
}

pub(crate) fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .map(|naive| naive.and_utc())
}

fn split_header(name: &str) -> (String, Option<String>) {
    let name = name.trim();
    match (name.find('['), name.ends_with(']')) {
        (Some(open), true) => (
            name[..open].trim().to_string(),
            Some(name[open + 1..name.len() - 1].trim().to_string()),
        ),
        _ => (name.to_string(), None),
    }
}

/// Parses a CSV stream into one [`TimeSeries`] per value column.
///
/// Rows may arrive in any order; they are sorted by timestamp and placed on
/// the regular grid defined by `spec.sample_period_secs`, starting at the
/// earliest timestamp. Timestamps that do not fall on that grid are
/// rejected, as are duplicates. Grid slots with no row become NaN.
pub fn parse_csv<R: Read>(reader: R, spec: &ColumnSpec) -> Result<Vec<TimeSeries>, IngestError> {
    if spec.sample_period_secs == 0 {
        return Err(IngestError::InvalidConfig("sample period must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| IngestError::MalformedRow { line: 1, reason: e.to_string() })?
        .clone();
    let ts_col = headers
        .iter()
        .position(|h| h == spec.timestamp_column)
        .ok_or_else(|| IngestError::MissingTimestampColumn(spec.timestamp_column.clone()))?;

    let mut channels = Vec::new();
    for (idx, raw) in headers.iter().enumerate() {
        if idx == ts_col {
            continue;
        }
        let (name, inline_unit) = split_header(raw);
        let unit_str = inline_unit
            .or_else(|| spec.units.get(&name).cloned())
            .unwrap_or_else(|| spec.default_unit.clone());
        let unit = unit_str
            .parse::<Unit>()
            .map_err(|_| IngestError::UnknownUnit { column: name.clone(), unit: unit_str.clone() })?;
        channels.push((idx, name, unit));
    }
    if channels.is_empty() {
        return Err(IngestError::NoChannels);
    }

    let mut rows: Vec<(DateTime<Utc>, u64, Vec<f64>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| IngestError::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let ts = parse_timestamp(&record[ts_col]).ok_or_else(|| IngestError::MalformedRow {
            line,
            reason: format!("unparseable timestamp {:?}", &record[ts_col]),
        })?;
        let mut values = Vec::with_capacity(channels.len());
        for (idx, name, _) in &channels {
            let cell = &record[*idx];
            if cell.is_empty() {
                values.push(f64::NAN);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| IngestError::MalformedRow {
                line,
                reason: format!("column {name}: not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: format!("column {name}: non-finite value"),
                });
            }
            values.push(v);
        }
        rows.push((ts, line, values));
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyInput);
    }

    rows.sort_by_key(|(ts, line, _)| (*ts, *line));
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(IngestError::NonMonotonicTimestamps {
                line: pair[1].1,
                timestamp: pair[1].0.to_rfc3339(),
            });
        }
    }

    let start = rows[0].0;
    let period = spec.sample_period_secs as i64;
    let mut slots = Vec::with_capacity(rows.len());
    for (ts, line, _) in &rows {
        let offset = (*ts - start).num_seconds();
        if offset % period != 0 {
            return Err(IngestError::MalformedRow {
                line: *line,
                reason: format!("timestamp {ts} is not on the {period} s sampling grid"),
            });
        }
        slots.push((offset / period) as usize);
    }
    let len = slots.last().copied().unwrap_or(0) + 1;

    Ok(channels
        .iter()
        .enumerate()
        .map(|(c, (_, name, unit))| {
            let mut values = vec![f64::NAN; len];
            for (slot, (_, _, row)) in slots.iter().zip(&rows) {
                values[*slot] = row[c];
            }
            TimeSeries {
                channel_id: name.clone(),
                unit: *unit,
                sample_period_secs: spec.sample_period_secs,
                start_time: start,
                values,
                excluded: Vec::new(),
            }
        })
        .collect())
}

/// Writes series sharing a start time and period in the ingest CSV format.
pub fn write_csv<W: Write>(series: &[TimeSeries], writer: W) -> Result<(), IngestError> {
    let Some(first) = series.first() else {
        return Err(IngestError::NoChannels);
    };
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(series.iter().map(|s| match s.unit {
        Unit::Kw => s.channel_id.clone(),
        unit => format!("{}[{}]", s.channel_id, unit),
    }));
    wtr.write_record(&header).map_err(csv_io)?;
    let len = series.iter().map(TimeSeries::len).max().unwrap_or(0);
    for i in 0..len {
        let mut row = vec![first.time_at(i).format("%Y-%m-%dT%H:%M:%SZ").to_string()];
        row.extend(series.iter().map(|s| match s.values.get(i) {
            Some(v) if v.is_finite() => format!("{v}"),
            _ => String::new(),
        }));
        wtr.write_record(&row).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> IngestError {
    IngestError::Io(std::io::Error::other(e))
}

/// Fills missing samples.
///
/// Runs of missing samples whose total duration is at most `max_gap_secs`
/// and that have observed neighbours on both sides are linearly
/// interpolated. Longer runs (or runs touching either end) are still filled,
/// so the series stays finite, but their index range is appended to
/// `excluded` and [`make_windows`] will skip any window overlapping it.
pub fn fill_gaps(ts: &TimeSeries, max_gap_secs: u64) -> TimeSeries {
    let mut out = ts.clone();
    let n = out.values.len();
    let mut i = 0;
    while i < n {
        if out.values[i].is_finite() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !out.values[i].is_finite() {
            i += 1;
        }
        let end = i;
        let left = start.checked_sub(1).map(|k| out.values[k]);
        let right = (end < n).then(|| out.values[end]);
        let duration = (end - start) as u64 * out.sample_period_secs;
        match (left, right) {
            (Some(l), Some(r)) => {
                let span = (end - start + 1) as f64;
                for (k, slot) in out.values[start..end].iter_mut().enumerate() {
                    let frac = (k + 1) as f64 / span;
                    *slot = l + (r - l) * frac;
                }
                if duration > max_gap_secs {
                    out.excluded.push(start..end);
                }
            }
            (Some(v), None) | (None, Some(v)) => {
                out.values[start..end].fill(v);
                out.excluded.push(start..end);
            }
            (None, None) => {
                out.values.fill(0.0);
                out.excluded.push(start..end);
            }
        }
    }
    out.excluded.sort_by_key(|r| (r.start, r.end));
    out
}

/// Cuts a series into windows of `length_secs`, advancing by `stride_secs`.
///
/// The trailing partial window is dropped. Windows that overlap an excluded
/// span, or still contain missing samples, are skipped.
pub fn make_windows(
    ts: &TimeSeries,
    length_secs: u64,
    stride_secs: u64,
) -> Result<Vec<Window>, IngestError> {
    let period = ts.sample_period_secs;
    if period == 0 || length_secs < period || stride_secs < period {
        return Err(IngestError::InvalidConfig(format!(
            "window length ({length_secs} s) and stride ({stride_secs} s) must be at least one sample period ({period} s)"
        )));
    }
    let len = (length_secs / period) as usize;
    let stride = (stride_secs / period) as usize;
    if len > ts.values.len() {
        return Err(IngestError::WindowLongerThanSeries { window: len, series: ts.values.len() });
    }
    let mut windows = Vec::new();
    let mut start = 0;
    while start + len <= ts.values.len() {
        let span = start..start + len;
        let overlaps = ts.excluded.iter().any(|ex| ex.start < span.end && span.start < ex.end);
        let samples = &ts.values[span];
        if !overlaps && samples.iter().all(|v| v.is_finite()) {
            windows.push(Window {
                parent_channel: ts.channel_id.clone(),
                start_index: start,
                start_time: ts.time_at(start),
                sample_period_secs: period,
                samples: samples.to_vec(),
                normalized: false,
            });
        }
        start += stride;
    }
    Ok(windows)
}

/// Min-max scales a window onto [0, 1]; constant windows become all 0.5.
///
/// Already-normalized windows are returned unchanged.
pub fn normalize_minmax(w: Window) -> Window {
    if w.normalized {
        return w;
    }
    let (lo, hi) = w
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let samples = if w.samples.is_empty() {
        Vec::new()
    } else if range > 0.0 && range.is_finite() {
        w.samples.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.5; w.samples.len()]
    };
    Window { samples, normalized: true, ..w }
}

/// Ingest settings, as they appear in the `[ingest]` table of a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    #[serde(flatten)]
    pub columns: ColumnSpec,
    pub window_length_secs: u64,
    pub stride_secs: u64,
    pub max_gap_secs: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            columns: ColumnSpec::default(),
            window_length_secs: 24 * 3600,
            stride_secs: 24 * 3600,
            max_gap_secs: 15 * 60,
        }
    }
}

/// Parses, gap-fills, windows and normalizes every channel of a CSV stream.
pub fn ingest_windows<R: Read>(reader: R, cfg: &IngestConfig) -> Result<Vec<Window>, IngestError> {
    let series = parse_csv(reader, &cfg.columns)?;
    let mut windows = Vec::new();
    for ts in &series {
        let filled = fill_gaps(ts, cfg.max_gap_secs);
        windows.extend(
            make_windows(&filled, cfg.window_length_secs, cfg.stride_secs)?
                .into_iter()
                .map(normalize_minmax),
        );
    }
    Ok(windows)
}
