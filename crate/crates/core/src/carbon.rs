//! Carbon-aware workload scheduling over a rolling horizon.
//!
//! At every step `tau` a plan is made for the window `tau..=tau + n`:
//! forecast arriving load plus the carried backlog is allocated to window
//! steps (or deferred past the window) so that discounted brown-energy cost
//! is minimal. Only the allocation for `tau` is committed; the truth is then
//! revealed, brown energy is accounted against it, and whatever was not
//! committed is carried forward as backlog.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::conformal::{calibrate_records, dscp_predict, error_records, DscpConfig, DEFAULT_N_MAX};
use crate::error::{Error, Result};
use crate::merge::DEFAULT_THETA;
use crate::model::{ForecastWindow, IntervalSeries, SeriesFrame};
use crate::predictors::{fit, Predictor, PredictorSpec};
use crate::store::CalibrationStore;
use crate::synth::day_profile;

/// Balance tolerance for plans.
pub const BALANCE_TOL: f64 = 1e-9;

/// True traces and economics of one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyScenario {
    /// Renewable supply per step, kW.
    pub renewable: Vec<f64>,
    /// Arriving deferrable workload per step, kW.
    pub load: Vec<f64>,
    /// Brown-energy price per step, per kWh.
    pub price: Vec<f64>,
    /// Per-step discount applied to future cost, in `(0, 1]`.
    pub gamma: f64,
    /// kg CO2 per brown kWh.
    pub carbon_intensity: f64,
    /// Hours per step, used to turn kW into kWh.
    #[serde(default = "one")]
    pub step_hours: f64,
}

fn one() -> f64 {
    1.0
}

impl EnergyScenario {
    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    /// Highest price anywhere in the scenario; prices deferral.
    pub fn p_max(&self) -> f64 {
        self.price.iter().cloned().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.load.len();
        if self.renewable.len() != n || self.price.len() != n {
            return Err(Error::Misaligned);
        }
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if let Some(i) = self.renewable.iter().chain(&self.load).position(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad(format!("renewable and load must be finite and nonnegative (entry {i})"));
        }
        if self.price.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return bad("prices must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.carbon_intensity >= 0.0) || !(self.step_hours > 0.0) {
            return bad("carbon intensity must be >= 0 and step length > 0".into());
        }
        Ok(())
    }

    /// Reads `t, renewable_kw, load_kw, price` columns.
    pub fn read_csv<R: Read>(input: R, gamma: f64, carbon_intensity: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            #[allow(dead_code)]
            t: i64,
            renewable_kw: f64,
            load_kw: f64,
            price: f64,
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let (mut renewable, mut load, mut price) = (Vec::new(), Vec::new(), Vec::new());
        for row in reader.deserialize() {
            let row: Row = row?;
            renewable.push(row.renewable_kw);
            load.push(row.load_kw);
            price.push(row.price);
        }
        let s = Self { renewable, load, price, gamma, carbon_intensity, step_hours: 1.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn load_csv(path: impl AsRef<Path>, gamma: f64, carbon_intensity: f64) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, gamma, carbon_intensity)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "renewable_kw", "load_kw", "price"])?;
        for t in 0..self.len() {
            w.write_record([t.to_string(), self.renewable[t].to_string(), self.load[t].to_string(), self.price[t].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Hourly solar-like site: days are sunny or cloudy following a sticky
    /// two-state chain, load follows a daily cycle with noise, and prices
    /// follow a night / day / evening-peak tariff.
    pub fn synthetic(params: &SolarParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).expect("unit normal");
        let p = params.period;
        let n = params.days * p;
        let (mut renewable, mut load, mut price) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let mut sunny = true;
        let mut factor = 1.0;
        for t in 0..n {
            let phase = t % p;
            if phase == 0 {
                if t > 0 && rng.random::<f64>() > params.persistence {
                    sunny = !sunny;
                }
                let (lo, hi) = if sunny { params.sunny_factor } else { params.cloudy_factor };
                factor = rng.random_range(lo..=hi);
            }
            let (shape, day) = day_profile(t, p, params.day_len);
            let r = if day {
                params.solar_capacity * factor * shape + params.solar_sigma * shape * noise.sample(&mut rng)
            } else {
                0.0
            };
            renewable.push(r.max(0.0));
            let cycle = (2.0 * std::f64::consts::PI * phase as f64 / p as f64).sin();
            load.push((params.load_base + params.load_swing * cycle + params.load_sigma * noise.sample(&mut rng)).max(0.0));
            let frac = phase as f64 / p as f64;
            price.push(if !day {
                params.prices[0]
            } else if frac < 0.85 {
                params.prices[1]
            } else {
                params.prices[2]
            });
        }
        let s = Self {
            renewable,
            load,
            price,
            gamma: params.gamma,
            carbon_intensity: params.carbon_intensity,
            step_hours: 1.0,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Shape of the bundled synthetic site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolarParams {
    pub days: usize,
    pub period: usize,
    pub day_len: usize,
    pub solar_capacity: f64,
    pub solar_sigma: f64,
    /// Range of the daily clear-sky fraction on sunny and cloudy days.
    pub sunny_factor: (f64, f64),
    pub cloudy_factor: (f64, f64),
    /// Probability that tomorrow has the same weather as today.
    pub persistence: f64,
    pub load_base: f64,
    pub load_swing: f64,
    pub load_sigma: f64,
    /// Night, day and evening-peak prices.
    pub prices: [f64; 3],
    pub gamma: f64,
    pub carbon_intensity: f64,
}

impl Default for SolarParams {
    fn default() -> Self {
        Self {
            days: 90,
            period: 24,
            day_len: 12,
            solar_capacity: 14.0,
            solar_sigma: 1.0,
            sunny_factor: (0.85, 1.0),
            cloudy_factor: (0.15, 0.45),
            persistence: 0.6,
            load_base: 4.0,
            load_swing: 1.5,
            load_sigma: 0.5,
            prices: [0.10, 0.20, 0.30],
            gamma: 1.0,
            carbon_intensity: 0.4,
        }
    }
}

impl SolarParams {
    fn validate(&self) -> Result<()> {
        if self.days == 0 || self.period < 2 || self.day_len == 0 || self.day_len >= self.period {
            return Err(Error::InvalidSpec("need days >= 1 and 1 <= day_len < period".into()));
        }
        if !(0.0..=1.0).contains(&self.persistence) || self.sunny_factor.0 > self.sunny_factor.1 || self.cloudy_factor.0 > self.cloudy_factor.1 {
            return Err(Error::InvalidSpec("persistence must be a probability and factor ranges ordered".into()));
        }
        Ok(())
    }
}

/// `max(W_D + W_L - W_Re, 0)`: power that renewables cannot cover.
pub fn brown_energy(w_d: f64, w_l: f64, w_re: f64) -> f64 {
    (w_d + w_l - w_re).max(0.0)
}

/// One window's planning problem, all vectors indexed `0..=n` from `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowProblem {
    /// Renewable estimates.
    pub renewable: Vec<f64>,
    /// Forecast arriving load.
    pub load: Vec<f64>,
    /// Load already running from earlier commitments.
    pub running: Vec<f64>,
    pub price: Vec<f64>,
    pub gamma: f64,
    pub p_max: f64,
    /// Load carried in from earlier windows.
    pub backlog: f64,
}

impl WindowProblem {
    pub fn n(&self) -> usize {
        self.price.len() - 1
    }

    fn check(&self) -> Result<()> {
        let len = self.price.len();
        if len == 0 || self.renewable.len() != len || self.load.len() != len || self.running.len() != len {
            return Err(Error::Misaligned);
        }
        Ok(())
    }

    /// Load that has to be placed: forecast arrivals plus backlog.
    pub fn total(&self) -> f64 {
        self.load.iter().sum::<f64>() + self.backlog
    }

    /// Discounted brown price of step `k`.
    pub fn unit_cost(&self, k: usize) -> f64 {
        self.price[k] * self.gamma.powi(k as i32)
    }

    /// Discounted price of pushing one unit past the window.
    pub fn deferral_cost(&self) -> f64 {
        self.p_max * self.gamma.powi(self.n() as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub allocations: Vec<f64>,
    pub deferred: f64,
    pub backlog_in: f64,
}

/// Discounted brown cost of a plan, after checking its load balance.
pub fn plan_cost(plan: &SchedulePlan, problem: &WindowProblem) -> Result<f64> {
    problem.check()?;
    if plan.allocations.len() != problem.price.len() {
        return Err(Error::Misaligned);
    }
    let placed = plan.allocations.iter().sum::<f64>() + plan.deferred;
    let gap = placed - (problem.load.iter().sum::<f64>() + plan.backlog_in);
    if gap.abs() > BALANCE_TOL || plan.allocations.iter().any(|x| *x < 0.0) || plan.deferred < 0.0 {
        return Err(Error::InfeasiblePlan(gap));
    }
    let in_window: f64 = plan
        .allocations
        .iter()
        .enumerate()
        .map(|(k, &w_d)| brown_energy(w_d, problem.running[k], problem.renewable[k]) * problem.unit_cost(k))
        .sum();
    Ok(in_window + plan.deferred * problem.deferral_cost())
}

/// Cost-minimal plan. Each step offers free capacity up to its renewable
/// headroom and unlimited capacity at its discounted brown price; deferral
/// is unlimited at `P_max * gamma^n`. Cheapest capacity is used first, with
/// ties going to the earliest step and deferral taken only when strictly
/// cheaper than every remaining in-window option.
pub fn solve_window(problem: &WindowProblem) -> Result<SchedulePlan> {
    problem.check()?;
    let len = problem.price.len();
    let mut allocations = vec![0.0; len];
    let mut remaining = problem.total();
    for k in 0..len {
        let headroom = (problem.renewable[k] - problem.running[k]).max(0.0);
        let take = headroom.min(remaining);
        allocations[k] += take;
        remaining -= take;
    }
    let mut deferred = 0.0;
    if remaining > 0.0 {
        let cheapest = (0..len)
            .min_by(|&i, &j| problem.unit_cost(i).total_cmp(&problem.unit_cost(j)).then(i.cmp(&j)))
            .expect("non-empty window");
        if problem.deferral_cost() < problem.unit_cost(cheapest) {
            deferred = remaining;
        } else {
            allocations[cheapest] += remaining;
        }
    }
    Ok(SchedulePlan { allocations, deferred, backlog_in: problem.backlog })
}

/// How far inside each interval the planner reads its estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPolicy {
    /// 0 assumes the least renewable and most load; 1 the opposite.
    pub lambda_risk: f64,
}

impl RiskPolicy {
    pub fn new(lambda_risk: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda_risk) {
            return Err(Error::InvalidConfig(format!("lambda_risk must lie in [0, 1], got {lambda_risk}")));
        }
        Ok(Self { lambda_risk })
    }
}

/// Point estimates for planning: renewable at `lower + lambda * width`,
/// load at `upper - lambda * width`, both clamped at zero.
pub fn effective_forecast(renewable: &IntervalSeries, load: &IntervalSeries, policy: RiskPolicy) -> Result<(Vec<f64>, Vec<f64>)> {
    if renewable.horizon() != load.horizon() {
        return Err(Error::Misaligned);
    }
    let l = policy.lambda_risk;
    let re = renewable.lower.iter().zip(&renewable.upper).map(|(lo, hi)| (lo + l * (hi - lo)).max(0.0)).collect();
    let ld = load.lower.iter().zip(&load.upper).map(|(lo, hi)| (hi - l * (hi - lo)).max(0.0)).collect();
    Ok((re, ld))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecasterKind {
    /// Point forecasts only.
    NoneCp,
    /// DSCP intervals read through the risk policy.
    Dscp,
    /// The true future.
    Perfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    FirstFit,
    RoundRobin,
}

/// Places `amount` of load onto machines in tasks of at most `task_size`.
/// First-fit fills machines in index order; round-robin deals tasks
/// cyclically starting at `cursor`, which it advances.
pub fn pack(strategy: Strategy, amount: f64, room: &[f64], task_size: f64, cursor: &mut usize) -> Vec<f64> {
    let m = room.len();
    let mut loads = vec![0.0; m];
    let mut left = amount;
    match strategy {
        Strategy::FirstFit => {
            for (load, cap) in loads.iter_mut().zip(room) {
                let take = left.min(*cap);
                *load = take;
                left -= take;
            }
        }
        Strategy::RoundRobin => {
            let mut stalled = 0;
            while left > 1e-12 && stalled < m {
                let i = *cursor % m;
                *cursor = (*cursor + 1) % m;
                let take = left.min(task_size).min(room[i] - loads[i]);
                if take > 0.0 {
                    loads[i] += take;
                    left -= take;
                    stalled = 0;
                } else {
                    stalled += 1;
                }
            }
        }
    }
    loads
}

fn default_task_size() -> f64 {
    1.0
}
fn default_duration() -> usize {
    1
}

/// Simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub lambda_risk: f64,
    pub alpha: f64,
    /// Window spans `window_n + 1` steps.
    pub window_n: usize,
    pub strategy: Strategy,
    pub forecaster: ForecasterKind,
    /// Input length of the point predictors.
    pub a: usize,
    pub predictor: PredictorSpec,
    /// Leading steps used to fit predictors, then to calibrate; the
    /// simulation runs on what follows.
    pub train_steps: usize,
    pub calib_steps: usize,
    pub machines: usize,
    pub machine_capacity: f64,
    #[serde(default = "default_task_size")]
    pub task_size: f64,
    /// Steps a committed unit of load keeps running.
    #[serde(default = "default_duration")]
    pub task_duration: usize,
    #[serde(default)]
    pub dscp: DscpConfig,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    /// Settings for the bundled hourly scenario.
    pub fn hourly(forecaster: ForecasterKind) -> Self {
        Self {
            lambda_risk: 0.25,
            alpha: 0.1,
            window_n: 23,
            strategy: Strategy::FirstFit,
            forecaster,
            a: 24,
            predictor: PredictorSpec::SeasonalNaive { period: 24 },
            train_steps: 24 * 30,
            calib_steps: 24 * 30,
            machines: 8,
            machine_capacity: 4.0,
            task_size: 1.0,
            task_duration: 1,
            dscp: DscpConfig { theta: DEFAULT_THETA, n_max: DEFAULT_N_MAX, ..DscpConfig::default() },
            seed: 0,
        }
    }

    fn validate(&self, scenario: &EnergyScenario) -> Result<()> {
        RiskPolicy::new(self.lambda_risk)?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.machines == 0 || !(self.machine_capacity > 0.0) || !(self.task_size > 0.0) || self.task_duration == 0 {
            return bad("machines, capacity, task size and duration must be positive".into());
        }
        if self.forecaster != ForecasterKind::Perfect && self.a == 0 {
            return bad("a must be at least 1".into());
        }
        let start = self.start();
        if start >= scenario.len() {
            return Err(Error::TooShort { needed: start + 1, got: scenario.len() });
        }
        Ok(())
    }

    /// First simulated step.
    pub fn start(&self) -> usize {
        match self.forecaster {
            ForecasterKind::Perfect => self.train_steps + self.calib_steps,
            _ => (self.train_steps + self.calib_steps).max(self.a),
        }
    }
}

/// A point predictor with an optional DSCP store for one trace.
#[derive(Debug, Clone)]
struct TraceForecaster {
    predictor: Predictor,
    store: Option<CalibrationStore>,
}

impl TraceForecaster {
    fn build(trace: &[f64], cfg: &SimConfig, with_store: bool) -> Result<Self> {
        let b = cfg.window_n + 1;
        let frame = SeriesFrame::from_target(trace.to_vec());
        let train = frame.slice(0, cfg.train_steps);
        let predictor = fit(&cfg.predictor, &train, cfg.a, b)?;
        let store = if with_store {
            let calib = frame.slice(cfg.train_steps, cfg.train_steps + cfg.calib_steps);
            let records = error_records(&predictor, &calib, cfg.a, b)?;
            Some(calibrate_records(records, &cfg.dscp, cfg.seed)?)
        } else {
            None
        };
        Ok(Self { predictor, store })
    }

    /// Forecast for steps `tau..tau + b` from the `a` steps before `tau`.
    fn window(&self, trace: &[f64], tau: usize) -> Result<ForecastWindow> {
        let a = self.predictor.input_size;
        ForecastWindow::new(tau as i64 - 1, self.predictor.predict(&trace[tau - a..tau])?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub tau: usize,
    pub committed: f64,
    /// Backlog after the commitment.
    pub backlog: f64,
    pub phi_true: f64,
    pub emissions_cum: f64,
    pub machine_loads: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub forecaster: ForecasterKind,
    pub strategy: Strategy,
    pub lambda_risk: f64,
    pub alpha: f64,
    /// kg CO2.
    pub emissions: f64,
    /// kWh of brown energy.
    pub brown_energy: f64,
    pub total_arrived: f64,
    pub total_committed: f64,
    pub final_backlog: f64,
    pub steps: Vec<StepLog>,
}

impl SimResult {
    /// Mean brown power per simulated step.
    pub fn brown_per_step(&self) -> f64 {
        self.brown_energy / self.steps.len().max(1) as f64
    }

    pub fn write_log_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau", "committed", "backlog", "phi_true", "emissions_cum", "machine_loads"])?;
        for s in &self.steps {
            let loads: Vec<String> = s.machine_loads.iter().map(f64::to_string).collect();
            w.write_record([
                s.tau.to_string(),
                s.committed.to_string(),
                s.backlog.to_string(),
                s.phi_true.to_string(),
                s.emissions_cum.to_string(),
                loads.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Totals without the per-step log.
    pub fn summary_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("steps");
            obj.insert("n_steps".into(), self.steps.len().into());
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Runs the rolling-horizon simulation from `cfg.start()` to the end of the scenario.
pub fn simulate(scenario: &EnergyScenario, cfg: &SimConfig) -> Result<SimResult> {
    scenario.validate()?;
    cfg.validate(scenario)?;
    let policy = RiskPolicy::new(cfg.lambda_risk)?;
    let forecasters = match cfg.forecaster {
        ForecasterKind::Perfect => None,
        kind => {
            let with_store = kind == ForecasterKind::Dscp;
            Some((
                TraceForecaster::build(&scenario.renewable, cfg, with_store)?,
                TraceForecaster::build(&scenario.load, cfg, with_store)?,
            ))
        }
    };
    let t_end = scenario.len();
    let start = cfg.start();
    let p_max = scenario.p_max();
    let fleet = cfg.machines as f64 * cfg.machine_capacity;
    let d = cfg.task_duration;
    let mut committed_hist = vec![0.0; t_end];
    let mut backlog = 0.0;
    let mut emissions = 0.0;
    let mut brown_total = 0.0;
    let mut arrived = 0.0;
    let mut cursor = 0usize;
    let mut steps = Vec::with_capacity(t_end - start);

    for tau in start..t_end {
        let len = (cfg.window_n + 1).min(t_end - tau);
        let (r_hat, l_hat) = match &forecasters {
            None => (scenario.renewable[tau..tau + len].to_vec(), scenario.load[tau..tau + len].to_vec()),
            Some((fr, fl)) => {
                let wr = fr.window(&scenario.renewable, tau)?;
                let wl = fl.window(&scenario.load, tau)?;
                let (mut re, mut ld) = match (&fr.store, &fl.store) {
                    (Some(sr), Some(sl)) => {
                        let ir = dscp_predict(sr, &wr, cfg.alpha)?;
                        let il = dscp_predict(sl, &wl, cfg.alpha)?;
                        effective_forecast(&ir, &il, policy)?
                    }
                    _ => (
                        wr.values.iter().map(|v| v.max(0.0)).collect(),
                        wl.values.iter().map(|v| v.max(0.0)).collect(),
                    ),
                };
                re.truncate(len);
                ld.truncate(len);
                (re, ld)
            }
        };
        // load still running at each window step from commitments before tau
        let running: Vec<f64> = (0..len)
            .map(|j| {
                let k = tau + j;
                (k.saturating_sub(d - 1)..tau).map(|s| committed_hist[s]).sum()
            })
            .collect();
        let problem = WindowProblem {
            renewable: r_hat,
            load: l_hat,
            running: running.clone(),
            price: scenario.price[tau..tau + len].to_vec(),
            gamma: scenario.gamma,
            p_max,
            backlog,
        };
        let plan = solve_window(&problem)?;

        let arrival = scenario.load[tau];
        arrived += arrival;
        let available = backlog + arrival;
        let room = (fleet - running[0]).max(0.0);
        // nothing follows the last step, so it drains whatever is available
        let planned = if tau + 1 == t_end { available } else { plan.allocations[0] };
        let commit = planned.min(available).min(room).max(0.0);
        backlog = (available - commit).max(0.0);
        committed_hist[tau] = commit;

        let phi = brown_energy(commit, running[0], scenario.renewable[tau]);
        brown_total += phi * scenario.step_hours;
        emissions += phi * scenario.step_hours * scenario.carbon_intensity;

        let per_machine = vec![cfg.machine_capacity; cfg.machines];
        let machine_loads = pack(cfg.strategy, commit, &per_machine, cfg.task_size, &mut cursor);
        steps.push(StepLog { tau, committed: commit, backlog, phi_true: phi, emissions_cum: emissions, machine_loads });
    }

    Ok(SimResult {
        forecaster: cfg.forecaster,
        strategy: cfg.strategy,
        lambda_risk: cfg.lambda_risk,
        alpha: cfg.alpha,
        emissions,
        brown_energy: brown_total,
        total_arrived: arrived,
        total_committed: committed_hist.iter().sum(),
        final_backlog: backlog,
        steps,
    })
}
