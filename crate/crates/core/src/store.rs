//! The persisted calibration state: per-cluster error records, their merged
//! per-step error sets, and the settings that produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::vote_cluster;
use crate::error::{Error, Result};
use crate::merge::MergedErrorSets;
use crate::model::{ErrorRecord, ForecastWindow};
use crate::predictors::Predictor;

pub const SCHEMA_TAG: &str = "dscp.calibration-store";
pub const SCHEMA_VERSION: u32 = 1;

/// How order statistics are read off an error set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileRule {
    /// Finite-sample order statistics with the `(n + 1)` correction.
    #[default]
    Conservative,
    /// Linear interpolation between order statistics; no coverage guarantee.
    Interpolated,
}

/// Settings captured alongside the calibration so a store is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub theta: f64,
    pub n_max: usize,
    pub alpha: f64,
    pub gamma_dtw: f64,
    pub seed: u64,
    #[serde(default)]
    pub quantile_rule: QuantileRule,
    /// Two-sample test flavour used for merging.
    pub ks_p_value: String,
    #[serde(default)]
    pub recluster_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub id: usize,
    pub centroid: Vec<f64>,
    pub records: Vec<ErrorRecord>,
    pub merged: MergedErrorSets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStore {
    pub schema: String,
    pub schema_version: u32,
    pub horizon: usize,
    pub config: StoreConfig,
    pub clusters: Vec<ClusterEntry>,
    pub smallest_cluster_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub silhouette: Option<f64>,
    /// Point predictor the calibration errors were measured against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<Predictor>,
}

impl CalibrationStore {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_records(&self) -> usize {
        self.clusters.iter().map(|c| c.records.len()).sum()
    }

    pub fn recompute_smallest(&mut self) {
        self.smallest_cluster_size = self.clusters.iter().map(|c| c.records.len()).min().unwrap_or(0);
    }

    /// Every stored window with its cluster id, ordered by anchor.
    pub fn history(&self) -> Vec<(&ErrorRecord, usize)> {
        let mut all: Vec<(&ErrorRecord, usize)> =
            self.clusters.iter().flat_map(|c| c.records.iter().map(move |r| (r, c.id))).collect();
        all.sort_by_key(|(r, _)| r.window.anchor);
        all
    }

    pub fn check_horizon(&self, window: &ForecastWindow) -> Result<()> {
        if window.horizon() != self.horizon {
            return Err(Error::HorizonMismatch { expected: self.horizon, got: window.horizon() });
        }
        Ok(())
    }

    /// Cluster of a new window by majority vote over its `s` most similar
    /// stored windows, `s` being the smallest cluster size.
    pub fn assign_cluster(&self, window: &ForecastWindow) -> Result<usize> {
        self.check_horizon(window)?;
        if self.k() == 1 {
            return Ok(self.clusters[0].id);
        }
        let history = self.history();
        vote_cluster(
            &window.values,
            history.iter().map(|(r, id)| (r.window.values.as_slice(), *id)),
            self.smallest_cluster_size,
            self.config.gamma_dtw,
        )
    }

    pub fn cluster(&self, id: usize) -> Option<&ClusterEntry> {
        self.clusters.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(Error::Schema(format!("version {v}, expected {SCHEMA_VERSION}"))),
            None => return Err(Error::Schema("missing schema_version".into())),
        }
        if value.get("schema").and_then(|v| v.as_str()) != Some(SCHEMA_TAG) {
            return Err(Error::Schema(format!("schema tag is not {SCHEMA_TAG:?}")));
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
