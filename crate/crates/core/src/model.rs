//! Domain types shared by every stage: the input series, forecast windows,
//! signed error records and interval forecasts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A regularly sampled univariate target with optional per-step features.
///
/// Time is an integer index (step counter or epoch seconds) advancing by a
/// fixed `stride`. Features ride along for predictors that want them; the
/// built-in predictors only read `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFrame {
    pub timestamps: Vec<i64>,
    pub stride: i64,
    pub target: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
}

impl SeriesFrame {
    /// Frame indexed `0, 1, 2, ...` with unit stride.
    pub fn from_target(target: Vec<f64>) -> Self {
        let timestamps = (0..target.len() as i64).collect();
        Self { timestamps, stride: 1, target, features: None }
    }

    /// Builds a frame, inferring the stride from the first two timestamps.
    pub fn new(timestamps: Vec<i64>, target: Vec<f64>) -> Self {
        let stride = match timestamps.as_slice() {
            [a, b, ..] => b - a,
            _ => 1,
        };
        Self { timestamps, stride, target, features: None }
    }

    pub fn with_features(mut self, features: Vec<Vec<f64>>) -> Self {
        self.features = Some(features);
        self
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Contiguous sub-frame over row positions `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> SeriesFrame {
        SeriesFrame {
            timestamps: self.timestamps[start..end].to_vec(),
            stride: self.stride,
            target: self.target[start..end].to_vec(),
            features: self.features.as_ref().map(|f| f[start..end].to_vec()),
        }
    }

    /// Checks ordering, uniform spacing, shape and finiteness.
    pub fn validate(self) -> Result<Self> {
        if self.timestamps.len() != self.target.len() {
            return Err(Error::ShapeMismatch { expected: self.timestamps.len(), got: self.target.len() });
        }
        if self.stride <= 0 && self.timestamps.len() > 1 {
            return Err(Error::NonMonotoneTime(1));
        }
        for (i, pair) in self.timestamps.windows(2).enumerate() {
            if pair[1] - pair[0] != self.stride {
                return Err(Error::NonMonotoneTime(i + 1));
            }
        }
        if let Some(row) = self.target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(row));
        }
        if let Some(features) = &self.features {
            if features.len() != self.target.len() {
                return Err(Error::ShapeMismatch { expected: self.target.len(), got: features.len() });
            }
            let dim = features.first().map_or(0, Vec::len);
            for (row, f) in features.iter().enumerate() {
                if f.len() != dim {
                    return Err(Error::RaggedFeatures { row, expected: dim, got: f.len() });
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(row));
                }
            }
        }
        Ok(self)
    }
}

/// One supervised example: `a` input steps ending at `position`, followed by
/// the `b` true values that a forecast anchored there should hit.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedPair {
    /// Row position of the last input step.
    pub position: usize,
    /// Timestamp of the last input step.
    pub anchor: i64,
    pub input: Vec<f64>,
    pub truth: Vec<f64>,
}

/// Every fully contained (input, truth) pair with input size `a` and horizon `b`.
pub fn make_supervised(frame: &SeriesFrame, a: usize, b: usize) -> Result<Vec<SupervisedPair>> {
    if a == 0 || b == 0 {
        return Err(Error::InvalidConfig("input size and horizon must be at least 1".into()));
    }
    let n = frame.len();
    if n < a + b {
        return Err(Error::TooShort { needed: a + b, got: n });
    }
    Ok((a - 1..n - b)
        .map(|t| SupervisedPair {
            position: t,
            anchor: frame.timestamps[t],
            input: frame.target[t + 1 - a..=t].to_vec(),
            truth: frame.target[t + 1..=t + b].to_vec(),
        })
        .collect())
}

/// A b-step point forecast issued at `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastWindow {
    pub anchor: i64,
    pub values: Vec<f64>,
}

impl ForecastWindow {
    pub fn new(anchor: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ShapeMismatch { expected: 1, got: 0 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { anchor, values })
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }
}

/// Signed per-step errors of one forecast window, `truth - forecast`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub window: ForecastWindow,
    pub errors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
}

impl ErrorRecord {
    pub fn horizon(&self) -> usize {
        self.errors.len()
    }

    /// Recovers the truth the record was built from.
    pub fn truth(&self) -> Vec<f64> {
        self.window.values.iter().zip(&self.errors).map(|(p, e)| p + e).collect()
    }
}

/// Lower and upper bounds for each step of one forecast window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSeries {
    pub anchor: i64,
    pub point: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
    /// Set when the interval was built from a fallback error pool.
    #[serde(default)]
    pub fallback: bool,
}

impl IntervalSeries {
    /// Interval `point + lo ..= point + hi` for per-step offsets.
    pub fn from_offsets(window: &ForecastWindow, lo: &[f64], hi: &[f64], alpha: f64) -> Self {
        let lower = window.values.iter().zip(lo).map(|(p, q)| p + q).collect();
        let upper = window.values.iter().zip(hi).map(|(p, q)| p + q).collect();
        Self { anchor: window.anchor, point: window.values.clone(), lower, upper, alpha, fallback: false }
    }

    pub fn horizon(&self) -> usize {
        self.point.len()
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l)
    }

    pub fn covers(&self, step: usize, y: f64) -> bool {
        self.lower[step] <= y && y <= self.upper[step]
    }

    /// Fraction of steps in `truth` that fall outside the interval.
    pub fn miss_rate(&self, truth: &[f64]) -> f64 {
        let misses = truth.iter().enumerate().filter(|(j, y)| !self.covers(*j, **y)).count();
        misses as f64 / truth.len().max(1) as f64
    }
}
