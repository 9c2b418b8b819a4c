//! Dual-splitting conformal prediction for multi-step time-series forecasts.
//!
//! Forecast windows are clustered by shape, and within each cluster the
//! per-step signed errors are merged across adjacent steps whose error
//! distributions are indistinguishable. Intervals are then read off the
//! lower and upper quantiles of the relevant merged set, so they can be
//! asymmetric and adapt to regime and horizon. Baseline conformal methods,
//! evaluation metrics, synthetic data, a benchmark runner and a
//! carbon-aware scheduling simulator are included.

pub mod bench;
pub mod carbon;
pub mod clustering;
pub mod conformal;
pub mod error;
pub mod io;
pub mod merge;
pub mod metrics;
pub mod model;
pub mod predictors;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
