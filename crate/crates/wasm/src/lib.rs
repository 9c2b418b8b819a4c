//! Browser bindings for the interactive demo page in `www/`.
//!
//! Each export takes a JSON object of parameters and returns a JSON string,
//! so the page needs no generated TypeScript types. The Rust functions behind
//! the exports are public and usable natively.

use dscp::bench::{run_benchmark, Method, RunConfig};
use dscp::carbon::{simulate, EnergyScenario, ForecasterKind, SimConfig, SolarParams};
use dscp::merge::{adaptive_merge, build_step_sets, signed_errors};
use dscp::metrics::EvalReport;
use dscp::model::{make_supervised, ErrorRecord};
use dscp::predictors::{fit, PredictorSpec};
use dscp::synth::{generate, ScenarioKind, ScenarioSpec};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct BandParams {
    pub alpha: f64,
    /// Forecast step (1-based) whose bands are traced over time.
    pub step: usize,
    pub seed: u64,
    /// Test windows returned for plotting (the most recent ones).
    pub points: usize,
}

impl Default for BandParams {
    fn default() -> Self {
        Self { alpha: 0.1, step: 1, seed: 11, points: 240 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Bands {
    pub anchor: Vec<i64>,
    pub truth: Vec<f64>,
    pub point: Vec<f64>,
    pub cp: [Vec<f64>; 2],
    pub dscp: [Vec<f64>; 2],
    pub reports: Vec<EvalReport>,
    pub k: usize,
}

const HORIZON: usize = 12;

/// CP and DSCP bands at one forecast step over the test segment of a
/// two-regime day/night series.
pub fn interval_bands(p: &BandParams) -> dscp::Result<Bands> {
    if p.step == 0 || p.step > HORIZON {
        return Err(dscp::Error::InvalidConfig(format!("step must lie in 1..={HORIZON}")));
    }
    let mut cfg = RunConfig::new(24, HORIZON);
    cfg.scenario = Some(ScenarioSpec {
        kind: ScenarioKind::TwoRegime {
            period: 24,
            day_len: 12,
            block_periods: 3,
            level: 0.0,
            amplitudes: [2.0, 10.0],
            sigmas: [0.3, 2.0],
            sigma_night: Some(0.05),
        },
        length: 24 * 120,
        seed: p.seed,
    });
    cfg.predictor = Some(PredictorSpec::SeasonalNaive { period: 24 });
    cfg.methods = vec![Method::Cp, Method::Dscp];
    cfg.alpha = vec![p.alpha];
    cfg.seed = p.seed;
    let out = run_benchmark(&cfg, &cfg.frame()?)?;
    let j = p.step - 1;
    let keep = out.truths.len().saturating_sub(p.points);
    let series = |m: Method| &out.intervals.iter().find(|mi| mi.method == m).expect("method ran").series[keep..];
    let (cp, ds) = (series(Method::Cp), series(Method::Dscp));
    Ok(Bands {
        anchor: ds.iter().map(|iv| iv.anchor).collect(),
        truth: out.truths[keep..].iter().map(|t| t[j]).collect(),
        point: ds.iter().map(|iv| iv.point[j]).collect(),
        cp: [cp.iter().map(|iv| iv.lower[j]).collect(), cp.iter().map(|iv| iv.upper[j]).collect()],
        dscp: [ds.iter().map(|iv| iv.lower[j]).collect(), ds.iter().map(|iv| iv.upper[j]).collect()],
        reports: out.reports,
        k: out.dscp.map_or(1, |d| d.k),
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct MergeParams {
    pub sigma_quiet: f64,
    pub sigma_busy: f64,
    pub theta: f64,
    pub seed: u64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self { sigma_quiet: 0.5, sigma_busy: 2.0, theta: 0.05, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Partition {
    /// Inclusive 1-based `[first, last]` step of every merged range.
    pub ranges: Vec<[usize; 2]>,
    /// Sample standard deviation of the errors at each step.
    pub step_sd: Vec<f64>,
    pub windows: usize,
}

/// Merged step ranges for 12-step windows whose first six steps fall in a
/// quiet phase and last six in a noisy one.
pub fn merge_partition(p: &MergeParams) -> dscp::Result<Partition> {
    let spec = ScenarioSpec {
        kind: ScenarioKind::PeriodicHeteroscedastic {
            period: 12,
            day_len: 6,
            level: 0.0,
            amplitude: 5.0,
            sigma_day: p.sigma_busy,
            sigma_night: p.sigma_quiet,
        },
        length: 12 * 220,
        seed: p.seed,
    };
    let frame = generate(&spec)?.frame;
    let pred = fit(&PredictorSpec::SeasonalNaive { period: 12 }, &frame.slice(0, 240), 12, 12)?;
    let records: Vec<ErrorRecord> = make_supervised(&frame.slice(240, frame.len()), 12, 12)?
        .into_iter()
        .filter(|pair| pair.position % 12 == 11)
        .map(|pair| signed_errors(&pair.truth, &pred.forecast(&pair)?))
        .collect::<dscp::Result<_>>()?;
    let sets = build_step_sets(&records)?;
    let merged = adaptive_merge(p.theta, &sets)?;
    let sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0).max(1.0)).sqrt()
    };
    Ok(Partition {
        ranges: merged.ranges.iter().map(|r| [r.start + 1, r.end + 1]).collect(),
        step_sd: (0..sets.horizon()).map(|j| sd(&records.iter().map(|r| r.errors[j]).collect::<Vec<_>>())).collect(),
        windows: records.len(),
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct ScheduleParams {
    pub lambda_risk: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { lambda_risk: 0.25, alpha: 0.1, seed: 2025 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleRun {
    pub forecaster: ForecasterKind,
    pub emissions: f64,
    pub committed: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Schedules {
    pub renewable: Vec<f64>,
    pub load: Vec<f64>,
    pub runs: Vec<ScheduleRun>,
}

/// A shortened solar site scheduled with point forecasts, DSCP intervals
/// and perfect foresight.
pub fn schedules(p: &ScheduleParams) -> dscp::Result<Schedules> {
    let site = EnergyScenario::synthetic(&SolarParams { days: 28, ..SolarParams::default() }, p.seed)?;
    let mut runs = Vec::new();
    let mut start = 0;
    for kind in [ForecasterKind::NoneCp, ForecasterKind::Dscp, ForecasterKind::Perfect] {
        let cfg = SimConfig {
            lambda_risk: p.lambda_risk,
            alpha: p.alpha,
            train_steps: 24 * 7,
            calib_steps: 24 * 7,
            seed: p.seed,
            ..SimConfig::hourly(kind)
        };
        start = cfg.start();
        let r = simulate(&site, &cfg)?;
        runs.push(ScheduleRun { forecaster: kind, emissions: r.emissions, committed: r.steps.iter().map(|s| s.committed).collect() });
    }
    Ok(Schedules { renewable: site.renewable[start..].to_vec(), load: site.load[start..].to_vec(), runs })
}

fn call<P, R>(params: &str, f: impl Fn(&P) -> dscp::Result<R>) -> Result<String, JsValue>
where
    P: for<'de> Deserialize<'de> + Default,
    R: Serialize,
{
    let p: P = if params.trim().is_empty() {
        P::default()
    } else {
        serde_json::from_str(params).map_err(|e| JsValue::from_str(&e.to_string()))?
    };
    let out = f(&p).map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&out).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = intervalBands)]
pub fn interval_bands_js(params: &str) -> Result<String, JsValue> {
    call(params, interval_bands)
}

#[wasm_bindgen(js_name = mergePartition)]
pub fn merge_partition_js(params: &str) -> Result<String, JsValue> {
    call(params, merge_partition)
}

#[wasm_bindgen(js_name = schedules)]
pub fn schedules_js(params: &str) -> Result<String, JsValue> {
    call(params, schedules)
}
