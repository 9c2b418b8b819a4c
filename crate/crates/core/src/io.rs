//! CSV ingestion and export of series frames.
//!
//! Input files carry a header row with a time column — `t` (integer step or
//! epoch seconds) or `timestamp` (ISO-8601, converted to epoch seconds) — a
//! `y` target column, and optional feature columns `f1`, `f2`, ... Other
//! columns are ignored. Empty cells are rejected; no imputation happens.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::model::SeriesFrame;

fn ingest(line: usize, message: impl Into<String>) -> Error {
    Error::Ingest { line, message: message.into() }
}

/// Parses an ISO-8601 date or date-time into epoch seconds; offset-less
/// values are taken as UTC.
pub fn parse_timestamp(text: &str) -> Option<i64> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

enum TimeColumn {
    Step(usize),
    Iso(usize),
}

/// Reads and validates a frame from CSV text.
pub fn read_frame<R: Read>(input: R) -> Result<SeriesFrame> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let time = match (find("t"), find("timestamp")) {
        (Some(i), _) => TimeColumn::Step(i),
        (None, Some(i)) => TimeColumn::Iso(i),
        (None, None) => return Err(ingest(1, "missing time column `t` or `timestamp`")),
    };
    let y_col = find("y").ok_or_else(|| ingest(1, "missing target column `y`"))?;
    let mut feature_cols = Vec::new();
    while let Some(i) = find(&format!("f{}", feature_cols.len() + 1)) {
        feature_cols.push(i);
    }

    let mut timestamps = Vec::new();
    let mut target = Vec::new();
    let mut features = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let cell = |i: usize, name: &str| -> Result<&str> {
            match record.get(i) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(ingest(line, format!("missing value in column `{name}`"))),
            }
        };
        let number = |i: usize, name: &str| -> Result<f64> {
            let v = cell(i, name)?;
            v.parse().map_err(|_| ingest(line, format!("`{v}` in column `{name}` is not a number")))
        };
        timestamps.push(match time {
            TimeColumn::Step(i) => {
                let v = cell(i, "t")?;
                v.parse().map_err(|_| ingest(line, format!("`{v}` in column `t` is not an integer")))?
            }
            TimeColumn::Iso(i) => {
                let v = cell(i, "timestamp")?;
                parse_timestamp(v).ok_or_else(|| ingest(line, format!("`{v}` is not an ISO-8601 timestamp")))?
            }
        });
        target.push(number(y_col, "y")?);
        if !feature_cols.is_empty() {
            features.push(
                feature_cols
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| number(i, &format!("f{}", k + 1)))
                    .collect::<Result<Vec<f64>>>()?,
            );
        }
    }
    let mut frame = SeriesFrame::new(timestamps, target);
    if !feature_cols.is_empty() {
        frame = frame.with_features(features);
    }
    frame.validate()
}

pub fn load_frame(path: impl AsRef<Path>) -> Result<SeriesFrame> {
    read_frame(std::fs::File::open(path)?)
}

/// Writes `t,y[,f1..]` with integer time stamps.
pub fn write_frame<W: Write>(frame: &SeriesFrame, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = frame.features.as_ref().and_then(|f| f.first()).map_or(0, Vec::len);
    let mut header = vec!["t".to_string(), "y".to_string()];
    header.extend((1..=dim).map(|k| format!("f{k}")));
    w.write_record(&header)?;
    for i in 0..frame.len() {
        let mut row = vec![frame.timestamps[i].to_string(), frame.target[i].to_string()];
        if let Some(f) = &frame.features {
            row.extend(f[i].iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_frame(frame: &SeriesFrame, path: impl AsRef<Path>) -> Result<()> {
    write_frame(frame, std::fs::File::create(path)?)
}
