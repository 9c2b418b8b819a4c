//! Interval constructors: dual-splitting conformal prediction and the
//! baselines it is compared against (pooled split CP, an error-set-updating
//! variant, adaptive alpha, and per-step CP).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::clustering::self_cluster;
use crate::error::{Error, Result};
use crate::merge::{adaptive_merge, build_step_sets, signed_errors, DEFAULT_THETA};
use crate::model::{make_supervised, ErrorRecord, ForecastWindow, IntervalSeries, SeriesFrame};
use crate::predictors::Predictor;
use crate::store::{CalibrationStore, ClusterEntry, QuantileRule, StoreConfig, SCHEMA_TAG, SCHEMA_VERSION};

/// Clamp applied to adaptive alpha before it is used to read a quantile.
pub const ACI_EPSILON: f64 = 1e-4;
pub const DEFAULT_N_MAX: usize = 6;
pub const DEFAULT_GAMMA_DTW: f64 = 1.0;
pub const DEFAULT_GAMMA_ACI: f64 = 0.01;
pub const DEFAULT_ENBPI_CAPACITY: usize = 2000;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

// Rounding guard so that e.g. (n + 1) * 0.75 = 3.0000000000000004 still
// selects rank 3.
const RANK_EPS: f64 = 1e-9;

/// 1-based rank `ceil((n + 1) * level)`, clamped to `1..=n`.
fn rank_ceil(n: usize, level: f64) -> usize {
    (((n + 1) as f64 * level - RANK_EPS).ceil() as usize).clamp(1, n)
}

/// 1-based rank `floor((n + 1) * level)`, clamped to `1..=n`.
fn rank_floor(n: usize, level: f64) -> usize {
    (((n + 1) as f64 * level + RANK_EPS).floor().max(0.0) as usize).clamp(1, n)
}

fn interpolated(sorted: &[f64], level: f64) -> f64 {
    let pos = level.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Lower and upper error quantiles of an ascending error set.
pub fn quantiles_sorted(sorted: &[f64], alpha: f64, rule: QuantileRule) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let n = sorted.len();
    if n == 0 {
        return Err(Error::EmptySet);
    }
    Ok(match rule {
        QuantileRule::Conservative => {
            (sorted[rank_floor(n, alpha / 2.0) - 1], sorted[rank_ceil(n, 1.0 - alpha / 2.0) - 1])
        }
        QuantileRule::Interpolated => (interpolated(sorted, alpha / 2.0), interpolated(sorted, 1.0 - alpha / 2.0)),
    })
}

/// `(q_lo, q_hi)`: the `floor((n+1) alpha/2)`-th and `ceil((n+1)(1 - alpha/2))`-th
/// smallest errors, clamped into the set.
pub fn conformal_quantiles(errors: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantiles_sorted(&sorted, alpha, QuantileRule::Conservative)
}

/// One-sided `(1 - alpha)` quantile of an ascending set of absolute errors.
fn abs_quantile(sorted: &[f64], alpha: f64, rule: QuantileRule) -> Result<f64> {
    check_alpha(alpha)?;
    if sorted.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(match rule {
        QuantileRule::Conservative => sorted[rank_ceil(sorted.len(), 1.0 - alpha) - 1],
        QuantileRule::Interpolated => interpolated(sorted, 1.0 - alpha),
    })
}

fn symmetric(window: &ForecastWindow, half_widths: &[f64], alpha: f64) -> IntervalSeries {
    let lo: Vec<f64> = half_widths.iter().map(|q| -q).collect();
    IntervalSeries::from_offsets(window, &lo, half_widths, alpha)
}

// ---------------------------------------------------------------------------
// Dual-splitting conformal prediction

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DscpConfig {
    pub theta: f64,
    pub n_max: usize,
    pub gamma_dtw: f64,
    /// Default miscoverage recorded in the store.
    pub alpha: f64,
    pub quantile_rule: QuantileRule,
    /// Re-run clustering after this many updates; 0 keeps the clustering fixed.
    pub recluster_every: usize,
}

impl Default for DscpConfig {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            n_max: DEFAULT_N_MAX,
            gamma_dtw: DEFAULT_GAMMA_DTW,
            alpha: 0.1,
            quantile_rule: QuantileRule::Conservative,
            recluster_every: 0,
        }
    }
}

fn rebuild_cluster(entry: &mut ClusterEntry, theta: f64) -> Result<()> {
    let sets = build_step_sets(&entry.records)?;
    entry.merged = adaptive_merge(theta, &sets)?;
    let b = sets.horizon();
    let n = entry.records.len() as f64;
    entry.centroid = (0..b).map(|j| entry.records.iter().map(|r| r.window.values[j]).sum::<f64>() / n).collect();
    Ok(())
}

/// Builds a store from signed error records (forecast windows with their
/// errors), clustering the windows and merging steps inside each cluster.
pub fn calibrate_records(mut records: Vec<ErrorRecord>, cfg: &DscpConfig, seed: u64) -> Result<CalibrationStore> {
    let horizon = records.first().ok_or(Error::EmptySet)?.horizon();
    for r in &records {
        if r.horizon() != horizon || r.window.horizon() != horizon {
            return Err(Error::ShapeMismatch { expected: horizon, got: r.horizon() });
        }
    }
    check_alpha(cfg.alpha)?;
    records.sort_by_key(|r| r.window.anchor);
    let points: Vec<Vec<f64>> = records.iter().map(|r| r.window.values.clone()).collect();
    let model = self_cluster(&points, cfg.n_max, seed)?;

    let mut members: Vec<Vec<ErrorRecord>> = vec![Vec::new(); model.k];
    for (mut rec, &label) in records.into_iter().zip(&model.labels) {
        rec.cluster = Some(label);
        members[label].push(rec);
    }
    let mut clusters = Vec::with_capacity(model.k);
    for (id, recs) in members.into_iter().enumerate() {
        let mut entry = ClusterEntry {
            id,
            centroid: model.centroids[id].clone(),
            records: recs,
            merged: Default::default(),
        };
        rebuild_cluster(&mut entry, cfg.theta)?;
        clusters.push(entry);
    }
    let mut store = CalibrationStore {
        schema: SCHEMA_TAG.to_string(),
        schema_version: SCHEMA_VERSION,
        horizon,
        config: StoreConfig {
            theta: cfg.theta,
            n_max: cfg.n_max,
            alpha: cfg.alpha,
            gamma_dtw: cfg.gamma_dtw,
            seed,
            quantile_rule: cfg.quantile_rule,
            ks_p_value: "asymptotic".to_string(),
            recluster_every: cfg.recluster_every,
        },
        clusters,
        smallest_cluster_size: 0,
        silhouette: model.silhouette,
        predictor: None,
    };
    store.recompute_smallest();
    Ok(store)
}

/// Error records for every supervised pair of `frame`.
pub fn error_records(pred: &Predictor, frame: &SeriesFrame, a: usize, b: usize) -> Result<Vec<ErrorRecord>> {
    make_supervised(frame, a, b)?
        .iter()
        .map(|pair| signed_errors(&pair.truth, &pred.forecast(pair)?))
        .collect()
}

/// Predicts every calibration window, clusters the forecasts, and stores
/// merged signed-error sets per cluster.
pub fn dscp_calibrate(
    pred: &Predictor,
    calib: &SeriesFrame,
    cfg: &DscpConfig,
    a: usize,
    b: usize,
    seed: u64,
) -> Result<CalibrationStore> {
    if calib.len() < a + b + 3 {
        return Err(Error::TooShort { needed: a + b + 3, got: calib.len() });
    }
    let mut store = calibrate_records(error_records(pred, calib, a, b)?, cfg, seed)?;
    store.predictor = Some(pred.clone());
    Ok(store)
}

/// Interval for `window` using the merged sets of cluster `id`. Clusters
/// without records fall back to all clusters' errors pooled per step, and
/// the result is flagged.
pub fn dscp_interval_for(store: &CalibrationStore, id: usize, window: &ForecastWindow, alpha: f64) -> Result<IntervalSeries> {
    store.check_horizon(window)?;
    let rule = store.config.quantile_rule;
    let b = store.horizon;
    let mut lo = Vec::with_capacity(b);
    let mut hi = Vec::with_capacity(b);
    match store.cluster(id).filter(|c| !c.records.is_empty()) {
        Some(entry) => {
            for j in 0..b {
                let (l, h) = quantiles_sorted(entry.merged.set_for_step(j), alpha, rule)?;
                lo.push(l);
                hi.push(h);
            }
            Ok(IntervalSeries::from_offsets(window, &lo, &hi, alpha))
        }
        None => {
            let all: Vec<&ErrorRecord> = store.clusters.iter().flat_map(|c| &c.records).collect();
            if all.is_empty() {
                return Err(Error::EmptyCluster(id));
            }
            for j in 0..b {
                let mut set: Vec<f64> = all.iter().map(|r| r.errors[j]).collect();
                set.sort_by(f64::total_cmp);
                let (l, h) = quantiles_sorted(&set, alpha, rule)?;
                lo.push(l);
                hi.push(h);
            }
            let mut out = IntervalSeries::from_offsets(window, &lo, &hi, alpha);
            out.fallback = true;
            Ok(out)
        }
    }
}

/// Assigns `window` to a cluster and reads its per-step error quantiles;
/// lower and upper bounds move independently.
pub fn dscp_predict(store: &CalibrationStore, window: &ForecastWindow, alpha: f64) -> Result<IntervalSeries> {
    let id = store.assign_cluster(window)?;
    dscp_interval_for(store, id, window, alpha)
}

impl CalibrationStore {
    /// In-place form of [`dscp_update`]; returns the cluster that absorbed the record.
    pub fn apply_update(&mut self, window: &ForecastWindow, truth: &[f64]) -> Result<usize> {
        self.check_horizon(window)?;
        let id = self.assign_cluster(window)?;
        let mut rec = signed_errors(truth, window)?;
        rec.cluster = Some(id);
        let theta = self.config.theta;
        let entry = self.clusters.iter_mut().find(|c| c.id == id).ok_or(Error::EmptyCluster(id))?;
        entry.records.push(rec);
        rebuild_cluster(entry, theta)?;
        self.recompute_smallest();
        Ok(id)
    }

    /// Re-clusters every stored record from scratch with the store's settings.
    pub fn recluster(&self, seed: u64) -> Result<CalibrationStore> {
        let records: Vec<ErrorRecord> = self.clusters.iter().flat_map(|c| c.records.iter().cloned()).collect();
        let cfg = DscpConfig {
            theta: self.config.theta,
            n_max: self.config.n_max,
            gamma_dtw: self.config.gamma_dtw,
            alpha: self.config.alpha,
            quantile_rule: self.config.quantile_rule,
            recluster_every: self.config.recluster_every,
        };
        let mut next = calibrate_records(records, &cfg, seed)?;
        next.predictor = self.predictor.clone();
        Ok(next)
    }
}

/// Appends the realised errors of `window` to its cluster and re-merges that
/// cluster. The input store is left untouched.
pub fn dscp_update(store: &CalibrationStore, window: &ForecastWindow, truth: &[f64]) -> Result<CalibrationStore> {
    let mut next = store.clone();
    next.apply_update(window, truth)?;
    Ok(next)
}

// ---------------------------------------------------------------------------
// Baselines

/// Absolute errors pooled over every record and step.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsPool {
    sorted: Vec<f64>,
    rule: QuantileRule,
}

impl AbsPool {
    pub fn from_records(records: &[ErrorRecord], rule: QuantileRule) -> Result<Self> {
        let mut sorted: Vec<f64> = records.iter().flat_map(|r| r.errors.iter().map(|e| e.abs())).collect();
        if sorted.is_empty() {
            return Err(Error::EmptySet);
        }
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted, rule })
    }

    pub fn half_width(&self, alpha: f64) -> Result<f64> {
        abs_quantile(&self.sorted, alpha, self.rule)
    }

    pub fn interval(&self, window: &ForecastWindow, alpha: f64) -> Result<IntervalSeries> {
        let q = self.half_width(alpha)?;
        Ok(symmetric(window, &vec![q; window.horizon()], alpha))
    }
}

/// Split CP: `forecast +/- q`, with `q` the `ceil((n+1)(1-alpha))`-th smallest
/// absolute calibration error pooled across steps.
pub fn cp_interval(records: &[ErrorRecord], window: &ForecastWindow, alpha: f64) -> Result<IntervalSeries> {
    AbsPool::from_records(records, QuantileRule::Conservative)?.interval(window, alpha)
}

/// Per-step split CP: step `j` uses only step-`j` absolute errors.
#[derive(Debug, Clone, PartialEq)]
pub struct PerStepPool {
    per_step: Vec<Vec<f64>>,
    rule: QuantileRule,
}

impl PerStepPool {
    pub fn from_records(records: &[ErrorRecord], rule: QuantileRule) -> Result<Self> {
        let sets = build_step_sets(records)?;
        let per_step = sets
            .per_step
            .into_iter()
            .map(|s| {
                let mut v: Vec<f64> = s.iter().map(|e| e.abs()).collect();
                v.sort_by(f64::total_cmp);
                v
            })
            .collect();
        Ok(Self { per_step, rule })
    }

    pub fn interval(&self, window: &ForecastWindow, alpha: f64) -> Result<IntervalSeries> {
        if window.horizon() != self.per_step.len() {
            return Err(Error::HorizonMismatch { expected: self.per_step.len(), got: window.horizon() });
        }
        let q = self.per_step.iter().map(|s| abs_quantile(s, alpha, self.rule)).collect::<Result<Vec<_>>>()?;
        Ok(symmetric(window, &q, alpha))
    }
}

pub fn per_step_cp_interval(records: &[ErrorRecord], window: &ForecastWindow, alpha: f64) -> Result<IntervalSeries> {
    PerStepPool::from_records(records, QuantileRule::Conservative)?.interval(window, alpha)
}

/// Pooled absolute errors kept in a FIFO window of fixed capacity and fed
/// with realised errors as test truths arrive.
#[derive(Debug, Clone, PartialEq)]
pub struct EnbpiState {
    pool: VecDeque<f64>,
    capacity: usize,
    rule: QuantileRule,
}

impl EnbpiState {
    pub fn new(capacity: usize, rule: QuantileRule) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("error pool capacity must be at least 1".into()));
        }
        Ok(Self { pool: VecDeque::with_capacity(capacity), capacity, rule })
    }

    /// Seeds the pool with calibration errors in time order; only the most
    /// recent `capacity` survive.
    pub fn from_records(records: &[ErrorRecord], capacity: usize, rule: QuantileRule) -> Result<Self> {
        let mut ordered: Vec<&ErrorRecord> = records.iter().collect();
        ordered.sort_by_key(|r| r.window.anchor);
        let mut state = Self::new(capacity, rule)?;
        for r in ordered {
            for e in &r.errors {
                state.push(e.abs());
            }
        }
        Ok(state)
    }

    pub fn push(&mut self, abs_error: f64) {
        if self.pool.len() == self.capacity {
            self.pool.pop_front();
        }
        self.pool.push_back(abs_error);
    }

    pub fn pool(&self) -> impl Iterator<Item = f64> + '_ {
        self.pool.iter().copied()
    }

    pub fn interval(&self, window: &ForecastWindow, alpha: f64) -> Result<IntervalSeries> {
        let mut sorted: Vec<f64> = self.pool.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let q = abs_quantile(&sorted, alpha, self.rule)?;
        Ok(symmetric(window, &vec![q; window.horizon()], alpha))
    }

    /// Absorbs the realised absolute errors of a past interval.
    pub fn update(mut self, truth: &[f64], interval: &IntervalSeries) -> Self {
        for (y, p) in truth.iter().zip(&interval.point) {
            self.push((y - p).abs());
        }
        self
    }
}

/// `alpha_t + gamma * (alpha_target - err_t)` with `err_t` the miss indicator.
pub fn aci_step(alpha_t: f64, alpha_target: f64, gamma: f64, covered: bool) -> f64 {
    aci_update(alpha_t, alpha_target, gamma, if covered { 0.0 } else { 1.0 })
}

/// Adaptive-alpha update with a fractional miss signal in `[0, 1]`.
pub fn aci_update(alpha_t: f64, alpha_target: f64, gamma: f64, err: f64) -> f64 {
    alpha_t + gamma * (alpha_target - err)
}

/// The adaptive alpha as used for quantile lookup.
pub fn aci_lookup_alpha(alpha_t: f64) -> f64 {
    alpha_t.clamp(ACI_EPSILON, 1.0 - ACI_EPSILON)
}

/// Adaptive alpha wrapped around the pooled split-CP interval. One alpha is
/// shared by every step of a window; the miss signal fed back is the
/// fraction of the window's steps left uncovered.
#[derive(Debug, Clone, PartialEq)]
pub struct AciState {
    pub alpha_t: f64,
    pub target: f64,
    pub gamma: f64,
    pool: AbsPool,
}

impl AciState {
    pub fn new(pool: AbsPool, target: f64, gamma: f64) -> Result<Self> {
        check_alpha(target)?;
        if !(gamma > 0.0) {
            return Err(Error::InvalidConfig(format!("ACI step size must be positive, got {gamma}")));
        }
        Ok(Self { alpha_t: target, target, gamma, pool })
    }

    pub fn interval(&self, window: &ForecastWindow) -> Result<IntervalSeries> {
        let mut out = self.pool.interval(window, aci_lookup_alpha(self.alpha_t))?;
        out.alpha = self.target;
        Ok(out)
    }

    pub fn observe(&mut self, interval: &IntervalSeries, truth: &[f64]) {
        self.alpha_t = aci_update(self.alpha_t, self.target, self.gamma, interval.miss_rate(truth));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::FittedModel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn window(values: Vec<f64>) -> ForecastWindow {
        ForecastWindow::new(0, values).unwrap()
    }

    fn record(anchor: i64, pred: Vec<f64>, errors: Vec<f64>) -> ErrorRecord {
        ErrorRecord { window: ForecastWindow::new(anchor, pred).unwrap(), errors, cluster: None }
    }

    /// k-th smallest by full sort, 1-based, with explicit clamping.
    fn sort_oracle(set: &[f64], alpha: f64) -> (f64, f64) {
        let mut s = set.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len();
        let hi = ((n as f64 + 1.0) * (1.0 - alpha / 2.0) - 1e-9).ceil() as usize;
        let lo = ((n as f64 + 1.0) * (alpha / 2.0) + 1e-9).floor() as usize;
        (s[lo.max(1).min(n) - 1], s[hi.max(1).min(n) - 1])
    }

    #[test]
    fn quantiles_small_set() {
        assert_eq!(conformal_quantiles(&[2.0, -1.0, 0.0, 1.0, -2.0], 0.2).unwrap(), (-2.0, 2.0));
        assert_eq!(conformal_quantiles(&[3.5], 0.3).unwrap(), (3.5, 3.5));
        assert_eq!(conformal_quantiles(&[-1.0, 0.0, 1.0], 0.5).unwrap(), (-1.0, 1.0));
        assert!(matches!(conformal_quantiles(&[], 0.1), Err(Error::EmptySet)));
    }

    #[test]
    fn quantiles_of_normal_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let e: Vec<f64> = (0..1000).map(|_| normal.sample(&mut rng)).collect();
        let (lo, hi) = conformal_quantiles(&e, 0.1).unwrap();
        assert_eq!((lo, hi), sort_oracle(&e, 0.1));
        assert!((1.52..=1.77).contains(&hi), "{hi}");
        assert!((-1.77..=-1.52).contains(&lo), "{lo}");
    }

    #[test]
    fn dscp_interval_hand_traced() {
        let recs = vec![
            record(0, vec![0.0], vec![-1.0]),
            record(1, vec![0.0], vec![0.0]),
            record(2, vec![0.0], vec![1.0]),
        ];
        let store = calibrate_records(recs, &DscpConfig { n_max: 1, ..Default::default() }, 0).unwrap();
        let out = dscp_predict(&store, &window(vec![10.0]), 0.5).unwrap();
        assert_eq!(out.lower, vec![9.0]);
        assert_eq!(out.upper, vec![11.0]);
    }

    #[test]
    fn zero_error_pipeline_collapses() {
        let y: Vec<f64> = (0..200).map(|i| [1.0, 4.0, 2.0, 8.0][i % 4]).collect();
        let frame = SeriesFrame::from_target(y);
        let pred = Predictor { input_size: 4, horizon: 3, model: FittedModel::SeasonalNaive { period: 4 } };
        let store = dscp_calibrate(&pred, &frame, &DscpConfig::default(), 4, 3, 9).unwrap();
        for c in &store.clusters {
            assert!(c.records.iter().all(|r| r.errors.iter().all(|e| *e == 0.0)));
        }
        let w = window(vec![1.0, 4.0, 2.0]);
        let out = dscp_predict(&store, &w, 0.1).unwrap();
        assert_eq!(out.lower, w.values);
        assert_eq!(out.upper, w.values);
    }

    #[test]
    fn update_leaves_input_store_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let recs: Vec<ErrorRecord> = (0..40)
            .map(|t| {
                let level = if t % 2 == 0 { 0.0 } else { 30.0 };
                let pred: Vec<f64> = (0..3).map(|_| level + rng.random::<f64>()).collect();
                record(t, pred, (0..3).map(|_| rng.random::<f64>() - 0.5).collect())
            })
            .collect();
        let store = calibrate_records(recs, &DscpConfig::default(), 1).unwrap();
        let before = store.to_json().unwrap();
        let w = ForecastWindow::new(100, vec![30.2, 30.5, 30.1]).unwrap();
        let id = store.assign_cluster(&w).unwrap();
        let sizes_before: Vec<usize> = store.cluster(id).unwrap().merged.sets.iter().map(Vec::len).collect();
        let next = dscp_update(&store, &w, &[30.0, 30.0, 30.0]).unwrap();
        assert_eq!(store.to_json().unwrap(), before);
        let entry = next.cluster(id).unwrap();
        assert_eq!(entry.records.len(), store.cluster(id).unwrap().records.len() + 1);
        let per_step: Vec<usize> = (0..3).map(|j| entry.records.iter().filter(|r| r.errors.len() > j).count()).collect();
        assert!(per_step.iter().all(|&n| n == entry.records.len()));
        let total_after: usize = entry.merged.sets.iter().map(Vec::len).sum();
        assert_eq!(total_after, sizes_before.iter().sum::<usize>() + 3);
    }

    #[test]
    fn cp_constant_and_zero_pools() {
        let recs = vec![record(0, vec![0.0], vec![1.0]), record(1, vec![0.0], vec![-1.0]), record(2, vec![0.0], vec![1.0])];
        let out = cp_interval(&recs, &window(vec![5.0]), 0.5).unwrap();
        assert_eq!((out.lower[0], out.upper[0]), (4.0, 6.0));
        let recs = vec![record(0, vec![0.0, 0.0], vec![0.0, 0.0])];
        let out = cp_interval(&recs, &window(vec![5.0, 1.0]), 0.1).unwrap();
        assert!(out.widths().all(|w| w == 0.0));
    }

    #[test]
    fn cp_normal_half_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let recs: Vec<ErrorRecord> = (0..1000).map(|t| record(t, vec![0.0], vec![normal.sample(&mut rng)])).collect();
        let out = cp_interval(&recs, &window(vec![0.0]), 0.1).unwrap();
        assert!((out.upper[0] - 1.645).abs() <= 0.15, "{}", out.upper[0]);
    }

    #[test]
    fn enbpi_fifo_eviction() {
        let mut s = EnbpiState::new(3, QuantileRule::Conservative).unwrap();
        for v in [1.0, 2.0, 3.0, 4.0] {
            s.push(v);
        }
        assert_eq!(s.pool().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn enbpi_without_updates_equals_cp() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let recs: Vec<ErrorRecord> =
            (0..50).map(|t| record(t, vec![0.0, 0.0], vec![rng.random::<f64>() - 0.5, rng.random::<f64>()])).collect();
        let w = window(vec![3.0, 4.0]);
        let enbpi = EnbpiState::from_records(&recs, 10_000, QuantileRule::Conservative).unwrap();
        assert_eq!(enbpi.interval(&w, 0.1).unwrap(), cp_interval(&recs, &w, 0.1).unwrap());
    }

    #[test]
    fn enbpi_tracks_variance_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let before = Normal::new(0.0, 1.0).unwrap();
        let after = Normal::new(0.0, 3.0).unwrap();
        let recs: Vec<ErrorRecord> = (0..500).map(|t| record(t, vec![0.0], vec![before.sample(&mut rng)])).collect();
        let capacity = 400;
        let mut state = EnbpiState::from_records(&recs, capacity, QuantileRule::Conservative).unwrap();
        let w = window(vec![0.0]);
        for _ in 0..capacity {
            let iv = state.interval(&w, 0.1).unwrap();
            state = state.update(&[after.sample(&mut rng)], &iv);
        }
        let hw = state.interval(&w, 0.1).unwrap().upper[0];
        let ideal = 3.0 * 1.6449;
        assert!((hw - ideal).abs() / ideal < 0.2, "{hw}");
    }

    #[test]
    fn aci_formula() {
        assert!((aci_step(0.1, 0.1, 0.01, false) - 0.091).abs() < 1e-15);
        assert!((aci_step(0.1, 0.1, 0.01, true) - 0.101).abs() < 1e-15);
        assert_eq!(aci_lookup_alpha(-0.3), ACI_EPSILON);
        assert_eq!(aci_lookup_alpha(1.2), 1.0 - ACI_EPSILON);
    }

    #[test]
    fn per_step_heteroscedastic_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let s1 = Normal::new(0.0, 1.0).unwrap();
        let s5 = Normal::new(0.0, 5.0).unwrap();
        let recs: Vec<ErrorRecord> = (0..2000)
            .map(|t| record(t, vec![0.0, 0.0], vec![s1.sample(&mut rng), s5.sample(&mut rng)]))
            .collect();
        let out = per_step_cp_interval(&recs, &window(vec![0.0, 0.0]), 0.1).unwrap();
        let w: Vec<f64> = out.widths().collect();
        assert!((w[1] / w[0] - 5.0).abs() <= 1.0, "{w:?}");
    }

    #[test]
    fn per_step_homoscedastic_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let n = Normal::new(0.0, 2.0).unwrap();
        let recs: Vec<ErrorRecord> =
            (0..2000).map(|t| record(t, vec![0.0; 4], (0..4).map(|_| n.sample(&mut rng)).collect())).collect();
        let out = per_step_cp_interval(&recs, &window(vec![0.0; 4]), 0.1).unwrap();
        let w: Vec<f64> = out.widths().collect();
        let mean = w.iter().sum::<f64>() / 4.0;
        assert!(w.iter().all(|x| (x - mean).abs() / mean < 0.1), "{w:?}");
    }

    #[test]
    fn per_step_single_record_is_degenerate() {
        let recs = vec![record(0, vec![1.0, 1.0], vec![0.5, -2.0])];
        let out = per_step_cp_interval(&recs, &window(vec![1.0, 1.0]), 0.1).unwrap();
        assert_eq!(out.widths().collect::<Vec<_>>(), vec![1.0, 4.0]);
    }

    #[test]
    fn single_cluster_without_merging_matches_per_step() {
        // with one cluster and no merging, signed quantiles of a symmetric
        // law should land where the per-step absolute quantile does
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let recs: Vec<ErrorRecord> = (0..3000)
            .map(|t| {
                let e = (1..=4).map(|s| Normal::new(0.0, s as f64).unwrap().sample(&mut rng)).collect();
                record(t, vec![0.0; 4], e)
            })
            .collect();
        let cfg = DscpConfig { n_max: 1, theta: 1.0, ..Default::default() };
        let store = calibrate_records(recs.clone(), &cfg, 0).unwrap();
        assert_eq!(store.k(), 1);
        assert_eq!(store.clusters[0].merged.ranges.len(), 4);
        let w = window(vec![0.0; 4]);
        let dscp: Vec<f64> = dscp_predict(&store, &w, 0.1).unwrap().widths().collect();
        let per_step: Vec<f64> = per_step_cp_interval(&recs, &w, 0.1).unwrap().widths().collect();
        for (d, p) in dscp.iter().zip(&per_step) {
            assert!((d - p).abs() / p < 0.06, "{dscp:?} vs {per_step:?}");
        }
    }

    #[test]
    fn biased_predictor_gives_shifted_midpoints() {
        // forecasts overshoot by c = 2, so truth - forecast centres on -2
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let recs: Vec<ErrorRecord> = (0..800)
            .map(|t| record(t, vec![0.0; 3], (0..3).map(|_| noise.sample(&mut rng) - 2.0).collect()))
            .collect();
        let store = calibrate_records(recs, &DscpConfig { n_max: 1, ..Default::default() }, 0).unwrap();
        let out = dscp_predict(&store, &window(vec![7.0; 3]), 0.1).unwrap();
        for j in 0..3 {
            let mid = (out.lower[j] + out.upper[j]) / 2.0 - 7.0;
            assert!((mid + 2.0).abs() < 0.25, "{mid}");
        }
    }

    proptest! {
        #[test]
        fn quantiles_match_sort_oracle(set in prop::collection::vec(-100.0f64..100.0, 1..200), alpha in 0.001f64..0.999) {
            prop_assert_eq!(conformal_quantiles(&set, alpha).unwrap(), sort_oracle(&set, alpha));
        }

        #[test]
        fn smaller_alpha_nests_larger(seed in 0u64..300, a1 in 0.01f64..0.5, gap in 0.01f64..0.4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let recs: Vec<ErrorRecord> = (0..60)
                .map(|t| record(t, vec![rng.random::<f64>() * 5.0; 2], vec![rng.random::<f64>() - 0.3, rng.random::<f64>() * 2.0]))
                .collect();
            let store = calibrate_records(recs.clone(), &DscpConfig::default(), seed).unwrap();
            let w = window(vec![2.0, 2.5]);
            let a2 = a1 + gap;
            for (wide, narrow) in [
                (dscp_predict(&store, &w, a1).unwrap(), dscp_predict(&store, &w, a2).unwrap()),
                (cp_interval(&recs, &w, a1).unwrap(), cp_interval(&recs, &w, a2).unwrap()),
                (per_step_cp_interval(&recs, &w, a1).unwrap(), per_step_cp_interval(&recs, &w, a2).unwrap()),
            ] {
                for j in 0..2 {
                    prop_assert!(wide.lower[j] <= narrow.lower[j] && narrow.upper[j] <= wide.upper[j]);
                    prop_assert!(narrow.lower[j] <= narrow.upper[j]);
                }
            }
        }
    }
}
