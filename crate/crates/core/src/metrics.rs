//! Interval forecast scoring: coverage deviation, mean width and the
//! Winkler interval score.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IntervalSeries;

fn aligned<'a>(intervals: &'a [IntervalSeries], truths: &'a [Vec<f64>]) -> Result<impl Iterator<Item = (f64, f64, f64)> + 'a> {
    if intervals.len() != truths.len() || intervals.iter().zip(truths).any(|(iv, t)| iv.horizon() != t.len()) {
        return Err(Error::Misaligned);
    }
    Ok(intervals
        .iter()
        .zip(truths)
        .flat_map(|(iv, t)| iv.lower.iter().zip(&iv.upper).zip(t).map(|((l, u), y)| (*l, *u, *y))))
}

/// Empirical pointwise coverage minus `1 - alpha`, in percentage points.
pub fn delta_cov(intervals: &[IntervalSeries], truths: &[Vec<f64>], alpha: f64) -> Result<f64> {
    let mut n = 0usize;
    let mut hit = 0usize;
    for (l, u, y) in aligned(intervals, truths)? {
        n += 1;
        if l <= y && y <= u {
            hit += 1;
        }
    }
    if n == 0 {
        return Err(Error::Empty);
    }
    Ok(100.0 * (hit as f64 / n as f64 - (1.0 - alpha)))
}

/// Mean `upper - lower` over every point.
pub fn pi_width(intervals: &[IntervalSeries]) -> Result<f64> {
    let (sum, n) = intervals
        .iter()
        .flat_map(|iv| iv.widths())
        .fold((0.0, 0usize), |(s, n), w| (s + w, n + 1));
    if n == 0 {
        return Err(Error::Empty);
    }
    Ok(sum / n as f64)
}

/// Winkler score of a single interval at miscoverage `alpha`.
pub fn winkler_point(lower: f64, upper: f64, y: f64, alpha: f64) -> f64 {
    let width = upper - lower;
    if y < lower {
        width + 2.0 / alpha * (lower - y)
    } else if y > upper {
        width + 2.0 / alpha * (y - upper)
    } else {
        width
    }
}

/// Mean Winkler score over every point.
pub fn winkler(intervals: &[IntervalSeries], truths: &[Vec<f64>], alpha: f64) -> Result<f64> {
    let (sum, n) = aligned(intervals, truths)?
        .fold((0.0, 0usize), |(s, n), (l, u, y)| (s + winkler_point(l, u, y, alpha), n + 1));
    if n == 0 {
        return Err(Error::Empty);
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub alpha: f64,
    /// Coverage deviation in percentage points; negative means undercoverage.
    pub delta_cov: f64,
    pub pi_width: f64,
    pub winkler: f64,
    pub n_windows: usize,
    pub n_points: usize,
}

impl EvalReport {
    pub fn evaluate(method: &str, alpha: f64, intervals: &[IntervalSeries], truths: &[Vec<f64>]) -> Result<Self> {
        Ok(Self {
            method: method.to_string(),
            alpha,
            delta_cov: delta_cov(intervals, truths, alpha)?,
            pi_width: pi_width(intervals)?,
            winkler: winkler(intervals, truths, alpha)?,
            n_windows: intervals.len(),
            n_points: truths.iter().map(Vec::len).sum(),
        })
    }
}

pub const REPORT_CSV_HEADER: [&str; 7] = ["method", "alpha", "delta_cov", "pi_width", "winkler", "n_windows", "n_points"];

/// One row per report.
pub fn write_reports_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.method.clone(),
            r.alpha.to_string(),
            r.delta_cov.to_string(),
            r.pi_width.to_string(),
            r.winkler.to_string(),
            r.n_windows.to_string(),
            r.n_points.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn reports_to_json(reports: &[EvalReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}
