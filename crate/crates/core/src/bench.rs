//! Benchmark orchestration: chronological three-way split, predictor fit,
//! calibration of every method, time-ordered evaluation on the test segment
//! and report emission.

use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conformal::{
    calibrate_records, dscp_interval_for, error_records, AbsPool, AciState, DscpConfig, EnbpiState, PerStepPool,
    DEFAULT_ENBPI_CAPACITY, DEFAULT_GAMMA_ACI, DEFAULT_GAMMA_DTW, DEFAULT_N_MAX,
};
use crate::error::{Error, Result};
use crate::io::load_frame;
use crate::merge::DEFAULT_THETA;
use crate::metrics::{write_reports_csv, EvalReport};
use crate::model::{make_supervised, ErrorRecord, ForecastWindow, IntervalSeries, SeriesFrame};
use crate::predictors::{fit, Predictor, PredictorSpec, DEFAULT_RIDGE};
use crate::store::{CalibrationStore, QuantileRule};
use crate::synth::{generate, ScenarioSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cp,
    Dscp,
    EnbpiStyle,
    Aci,
    PerStepCp,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Cp, Method::Dscp, Method::EnbpiStyle, Method::Aci, Method::PerStepCp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cp => "cp",
            Method::Dscp => "dscp",
            Method::EnbpiStyle => "enbpi_style",
            Method::Aci => "aci",
            Method::PerStepCp => "per_step_cp",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_split() -> [f64; 3] {
    [0.7, 0.15, 0.15]
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_alpha() -> Vec<f64> {
    vec![0.1]
}
fn default_theta() -> f64 {
    DEFAULT_THETA
}
fn default_gamma_aci() -> f64 {
    DEFAULT_GAMMA_ACI
}
fn default_n_max() -> usize {
    DEFAULT_N_MAX
}
fn default_gamma_dtw() -> f64 {
    DEFAULT_GAMMA_DTW
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_enbpi_capacity() -> usize {
    DEFAULT_ENBPI_CAPACITY
}

/// A benchmark run, as read from a TOML config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// CSV input; mutually exclusive with `scenario`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    /// Train / calibration / test fractions, in time order.
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    pub a: usize,
    pub b: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_gamma_aci")]
    pub gamma_aci: f64,
    #[serde(rename = "N_max", default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_gamma_dtw")]
    pub gamma_dtw: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Re-cluster the DSCP store after this many updates (0 = never).
    #[serde(default)]
    pub recluster_every: usize,
    /// Capacity of the error pool kept by `enbpi_style`, in individual errors.
    #[serde(default = "default_enbpi_capacity")]
    pub enbpi_capacity: usize,
    /// Feed realised test errors back into the DSCP store.
    #[serde(default)]
    pub dscp_update: bool,
    #[serde(default)]
    pub quantile_rule: QuantileRule,
    /// Point predictor; defaults to a linear AR of order `a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<PredictorSpec>,
}

impl RunConfig {
    /// A config with every optional key at its default.
    pub fn new(a: usize, b: usize) -> Self {
        Self {
            data: None,
            scenario: None,
            split: default_split(),
            a,
            b,
            methods: default_methods(),
            alpha: default_alpha(),
            theta: default_theta(),
            gamma_aci: default_gamma_aci(),
            n_max: default_n_max(),
            gamma_dtw: default_gamma_dtw(),
            seed: 0,
            out_dir: default_out_dir(),
            recluster_every: 0,
            enbpi_capacity: default_enbpi_capacity(),
            dscp_update: false,
            quantile_rule: QuantileRule::Conservative,
            predictor: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        if cfg.data.is_some() == cfg.scenario.is_some() {
            return Err(Error::InvalidConfig("exactly one of `data` and `scenario` must be given".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn predictor_spec(&self) -> PredictorSpec {
        self.predictor.clone().unwrap_or(PredictorSpec::LinearAr { order: self.a, ridge: DEFAULT_RIDGE })
    }

    pub fn dscp_config(&self) -> DscpConfig {
        DscpConfig {
            theta: self.theta,
            n_max: self.n_max,
            gamma_dtw: self.gamma_dtw,
            alpha: self.alpha.first().copied().unwrap_or(0.1),
            quantile_rule: self.quantile_rule,
            recluster_every: self.recluster_every,
        }
    }

    /// Checks every parameter except the data source.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.split.iter().any(|f| !(*f > 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions must be positive and sum to 1, got {:?}", self.split));
        }
        if self.a == 0 || self.b == 0 {
            return bad("a and b must be at least 1".into());
        }
        if self.alpha.is_empty() || self.alpha.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return bad(format!("alpha values must lie in (0, 1), got {:?}", self.alpha));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("theta must lie in (0, 1], got {}", self.theta));
        }
        if !(self.gamma_aci > 0.0) || !(self.gamma_dtw > 0.0) {
            return bad("gamma_aci and gamma_dtw must be positive".into());
        }
        if self.n_max == 0 || self.enbpi_capacity == 0 {
            return bad("N_max and enbpi_capacity must be at least 1".into());
        }
        Ok(())
    }

    /// Loads or generates the series named by the config.
    pub fn frame(&self) -> Result<SeriesFrame> {
        match (&self.data, &self.scenario) {
            (Some(path), None) => load_frame(path),
            (None, Some(spec)) => Ok(generate(spec)?.frame),
            _ => Err(Error::InvalidConfig("exactly one of `data` and `scenario` must be given".into())),
        }
    }
}

/// Row ranges of the chronological split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Range<usize>,
    pub calibration: Range<usize>,
    pub test: Range<usize>,
}

pub fn chronological_split(n: usize, fractions: [f64; 3]) -> SplitIndices {
    let n_train = (fractions[0] * n as f64).floor() as usize;
    let n_cal = (fractions[1] * n as f64).floor() as usize;
    SplitIndices { train: 0..n_train, calibration: n_train..n_train + n_cal, test: n_train + n_cal..n }
}

/// One test-set forecast with the truth it is scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct TestWindow {
    pub window: ForecastWindow,
    pub truth: Vec<f64>,
}

/// Everything shared by the methods of one run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub cfg: RunConfig,
    pub split: SplitIndices,
    pub predictor: Predictor,
    pub calibration: Vec<ErrorRecord>,
    pub test: Vec<TestWindow>,
}

pub fn prepare(cfg: &RunConfig, frame: &SeriesFrame) -> Result<Prepared> {
    cfg.validate()?;
    let frame = frame.clone().validate()?;
    let (a, b) = (cfg.a, cfg.b);
    let split = chronological_split(frame.len(), cfg.split);
    // inputs and truths of every pair stay inside their own segment
    if !(split.train.end <= split.calibration.start && split.calibration.end <= split.test.start) {
        return Err(Error::InvalidConfig("split segments overlap".into()));
    }
    for (name, range, needed) in
        [("calibration", &split.calibration, a + b + 3), ("test", &split.test, a + b)]
    {
        if range.len() < needed {
            return Err(Error::InvalidConfig(format!(
                "{name} segment has {} rows, need at least {needed} for a = {a}, b = {b}",
                range.len()
            )));
        }
    }
    let predictor = fit(&cfg.predictor_spec(), &frame.slice(split.train.start, split.train.end), a, b)?;
    let calibration = error_records(&predictor, &frame.slice(split.calibration.start, split.calibration.end), a, b)?;
    let test = make_supervised(&frame.slice(split.test.start, split.test.end), a, b)?
        .into_iter()
        .map(|pair| Ok(TestWindow { window: predictor.forecast(&pair)?, truth: pair.truth }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared { cfg: cfg.clone(), split, predictor, calibration, test })
}

/// Intervals of one method for one alpha, aligned with `Prepared::test`.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodIntervals {
    pub method: Method,
    pub alpha: f64,
    pub series: Vec<IntervalSeries>,
}

/// Clustering details of a DSCP calibration, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DscpSummary {
    pub k: usize,
    pub silhouette: Option<f64>,
    pub cluster_sizes: Vec<usize>,
    /// First step (1-based) of every merged range after the first, per cluster.
    pub boundaries: Vec<Vec<usize>>,
}

impl DscpSummary {
    pub fn of(store: &CalibrationStore) -> Self {
        Self {
            k: store.k(),
            silhouette: store.silhouette,
            cluster_sizes: store.clusters.iter().map(|c| c.records.len()).collect(),
            boundaries: store.clusters.iter().map(|c| c.merged.boundaries().iter().map(|s| s + 1).collect()).collect(),
        }
    }
}

/// Feeds each window's truth to an updating method once all of its `b`
/// steps have been observed, i.e. `b` anchors later.
struct DelayedFeedback {
    pending: VecDeque<usize>,
    delay: usize,
}

impl DelayedFeedback {
    fn new(delay: usize) -> Self {
        Self { pending: VecDeque::new(), delay }
    }

    fn matured(&mut self, now: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::from_fn(move || match self.pending.front() {
            Some(&i) if i + self.delay <= now => self.pending.pop_front(),
            _ => None,
        })
    }

    fn push(&mut self, i: usize) {
        self.pending.push_back(i);
    }
}

/// Intervals for every configured alpha, in `cfg.alpha` order.
pub fn evaluate_method(prep: &Prepared, method: Method) -> Result<(Vec<MethodIntervals>, Option<DscpSummary>)> {
    let cfg = &prep.cfg;
    let alphas = &cfg.alpha;
    let mut out: Vec<Vec<IntervalSeries>> = vec![Vec::with_capacity(prep.test.len()); alphas.len()];
    let mut summary = None;
    match method {
        Method::Cp => {
            let pool = AbsPool::from_records(&prep.calibration, cfg.quantile_rule)?;
            for tw in &prep.test {
                for (k, &alpha) in alphas.iter().enumerate() {
                    out[k].push(pool.interval(&tw.window, alpha)?);
                }
            }
        }
        Method::PerStepCp => {
            let pool = PerStepPool::from_records(&prep.calibration, cfg.quantile_rule)?;
            for tw in &prep.test {
                for (k, &alpha) in alphas.iter().enumerate() {
                    out[k].push(pool.interval(&tw.window, alpha)?);
                }
            }
        }
        Method::Dscp => {
            let mut store = calibrate_records(prep.calibration.clone(), &cfg.dscp_config(), cfg.seed)?;
            summary = Some(DscpSummary::of(&store));
            let mut feedback = DelayedFeedback::new(cfg.b);
            let mut updates = 0usize;
            for (i, tw) in prep.test.iter().enumerate() {
                if cfg.dscp_update {
                    for j in feedback.matured(i).collect::<Vec<_>>() {
                        let done = &prep.test[j];
                        store.apply_update(&done.window, &done.truth)?;
                        updates += 1;
                        if cfg.recluster_every > 0 && updates % cfg.recluster_every == 0 {
                            store = store.recluster(cfg.seed)?;
                        }
                    }
                    feedback.push(i);
                }
                let id = store.assign_cluster(&tw.window)?;
                for (k, &alpha) in alphas.iter().enumerate() {
                    out[k].push(dscp_interval_for(&store, id, &tw.window, alpha)?);
                }
            }
        }
        Method::EnbpiStyle => {
            let mut state = EnbpiState::from_records(&prep.calibration, cfg.enbpi_capacity, cfg.quantile_rule)?;
            let mut feedback = DelayedFeedback::new(cfg.b);
            for (i, tw) in prep.test.iter().enumerate() {
                for j in feedback.matured(i).collect::<Vec<_>>() {
                    let done = &prep.test[j];
                    for (y, p) in done.truth.iter().zip(&done.window.values) {
                        state.push((y - p).abs());
                    }
                }
                feedback.push(i);
                for (k, &alpha) in alphas.iter().enumerate() {
                    out[k].push(state.interval(&tw.window, alpha)?);
                }
            }
        }
        Method::Aci => {
            let pool = AbsPool::from_records(&prep.calibration, cfg.quantile_rule)?;
            for (k, &alpha) in alphas.iter().enumerate() {
                let mut state = AciState::new(pool.clone(), alpha, cfg.gamma_aci)?;
                let mut feedback = DelayedFeedback::new(cfg.b);
                for (i, tw) in prep.test.iter().enumerate() {
                    for j in feedback.matured(i).collect::<Vec<_>>() {
                        state.observe(&out[k][j], &prep.test[j].truth);
                    }
                    feedback.push(i);
                    out[k].push(state.interval(&tw.window)?);
                }
            }
        }
    }
    let intervals = alphas.iter().zip(out).map(|(&alpha, series)| MethodIntervals { method, alpha, series }).collect();
    Ok((intervals, summary))
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub reports: Vec<EvalReport>,
    pub intervals: Vec<MethodIntervals>,
    pub truths: Vec<Vec<f64>>,
    pub split: SplitIndices,
    pub dscp: Option<DscpSummary>,
}

impl BenchOutput {
    pub fn report(&self, method: Method, alpha: f64) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.method == method.name() && r.alpha == alpha)
    }
}

/// Runs every configured method on `frame`; `on_method` sees the output
/// accumulated so far after each method finishes.
pub fn run_benchmark_with(
    cfg: &RunConfig,
    frame: &SeriesFrame,
    mut on_method: impl FnMut(&BenchOutput) -> Result<()>,
) -> Result<BenchOutput> {
    let prep = prepare(cfg, frame)?;
    let truths: Vec<Vec<f64>> = prep.test.iter().map(|t| t.truth.clone()).collect();
    let mut output =
        BenchOutput { reports: Vec::new(), intervals: Vec::new(), truths, split: prep.split.clone(), dscp: None };
    for &method in &cfg.methods {
        let (intervals, summary) = evaluate_method(&prep, method)?;
        for mi in &intervals {
            output.reports.push(EvalReport::evaluate(method.name(), mi.alpha, &mi.series, &output.truths)?);
        }
        output.intervals.extend(intervals);
        if summary.is_some() {
            output.dscp = summary;
        }
        on_method(&output)?;
    }
    Ok(output)
}

pub fn run_benchmark(cfg: &RunConfig, frame: &SeriesFrame) -> Result<BenchOutput> {
    run_benchmark_with(cfg, frame, |_| Ok(()))
}

/// Long-format dump of every interval next to its truth.
pub fn write_intervals_csv<W: Write>(output: &BenchOutput, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "alpha", "anchor", "step", "lower", "pred", "upper", "truth"])?;
    for mi in &output.intervals {
        for (iv, truth) in mi.series.iter().zip(&output.truths) {
            for j in 0..iv.horizon() {
                w.write_record([
                    mi.method.name().to_string(),
                    mi.alpha.to_string(),
                    iv.anchor.to_string(),
                    (j + 1).to_string(),
                    iv.lower[j].to_string(),
                    iv.point[j].to_string(),
                    iv.upper[j].to_string(),
                    truth[j].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    split: &'a SplitIndices,
    n_test_windows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    dscp: Option<&'a DscpSummary>,
}

/// Writes `report.csv`, `report.json`, `summary.json` and `intervals.csv`.
pub fn write_outputs(output: &BenchOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_reports_csv(&output.reports, fs::File::create(dir.join("report.csv"))?)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&output.reports)?)?;
    let summary = RunSummary { split: &output.split, n_test_windows: output.truths.len(), dscp: output.dscp.as_ref() };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    write_intervals_csv(output, std::io::BufWriter::new(fs::File::create(dir.join("intervals.csv"))?))?;
    Ok(())
}

/// Runs the benchmark, rewriting the output files after every method so a
/// failure part-way still leaves the finished methods on disk.
pub fn run_to_dir(cfg: &RunConfig, frame: &SeriesFrame, dir: &Path) -> Result<BenchOutput> {
    run_benchmark_with(cfg, frame, |partial| write_outputs(partial, dir))
}

/// One row of a horizon sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub b: usize,
    pub alpha: f64,
    pub delta_cov: f64,
    pub pi_width: f64,
    pub winkler: f64,
    pub n_windows: usize,
}

/// Re-runs the benchmark for every horizon with everything else fixed.
pub fn sensitivity_sweep(cfg: &RunConfig, frame: &SeriesFrame, horizons: &[usize]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &b in horizons {
        let run = RunConfig { b, ..cfg.clone() };
        for r in run_benchmark(&run, frame)?.reports {
            rows.push(SweepRow {
                method: r.method,
                b,
                alpha: r.alpha,
                delta_cov: r.delta_cov,
                pi_width: r.pi_width,
                winkler: r.winkler,
                n_windows: r.n_windows,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `(max - min) / mean` of a set of positive scores.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean
}
