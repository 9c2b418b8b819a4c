use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dscp::bench::{chronological_split, run_to_dir, sensitivity_sweep, write_sweep_csv, RunConfig};
use dscp::carbon::{simulate, EnergyScenario, ForecasterKind, SimConfig, SolarParams, Strategy};
use dscp::conformal::{dscp_calibrate, dscp_predict};
use dscp::io::{load_frame, save_frame};
use dscp::model::ForecastWindow;
use dscp::predictors::{fit, PredictorSpec};
use dscp::store::CalibrationStore;
use dscp::synth::{generate, ScenarioSpec, Sidecar};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "dscp", version, about = "Conformal prediction intervals for multi-step forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic series (plus a ground-truth sidecar) or an energy site trace.
    Synth(SynthArgs),
    /// Fit the point predictor and build a calibration store.
    Calibrate {
        /// Run config (TOML) naming the data and model settings.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "store.json")]
        out: PathBuf,
    },
    /// Forecast the steps after the end of a series and print DSCP intervals.
    Predict {
        #[arg(long)]
        store: PathBuf,
        /// CSV whose last rows feed the predictor.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Write the interval CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configured method and write report.csv, report.json, intervals.csv.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Repeat the evaluation for several horizons.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated horizons, e.g. 6,12,24.
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
        /// Defaults to `<out_dir>/sweep.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rolling-horizon carbon-aware scheduling on a site trace.
    Simulate {
        /// CSV with columns t, renewable_kw, load_kw, price.
        #[arg(long)]
        scenario: PathBuf,
        /// Simulation settings (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SynthSource {
    /// Scenario spec (TOML) for a forecasting series.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Write the bundled solar-like energy site instead.
    #[arg(long)]
    solar_site: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    source: SynthSource,
    #[arg(long)]
    out: PathBuf,
    /// Seed for `--solar-site`.
    #[arg(long, default_value_t = 2025)]
    seed: u64,
}

/// Keys accepted by `simulate --config`; anything left out keeps the hourly default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFile {
    lambda_risk: Option<f64>,
    alpha: Option<f64>,
    window_n: Option<usize>,
    gamma: Option<f64>,
    carbon_intensity: Option<f64>,
    strategy: Option<Strategy>,
    forecaster: Option<ForecasterKind>,
    a: Option<usize>,
    predictor: Option<PredictorSpec>,
    train_steps: Option<usize>,
    calib_steps: Option<usize>,
    machines: Option<usize>,
    machine_capacity: Option<f64>,
    task_size: Option<f64>,
    task_duration: Option<usize>,
    seed: Option<u64>,
}

impl SimFile {
    fn sim_config(&self) -> SimConfig {
        let mut c = SimConfig::hourly(self.forecaster.unwrap_or(ForecasterKind::Dscp));
        macro_rules! overlay {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { c.$f = v; })* };
        }
        overlay!(lambda_risk, alpha, window_n, strategy, a, predictor, train_steps, calib_steps, machines, machine_capacity, task_size, task_duration, seed);
        c
    }
}

/// Reads a run config, resolving a relative `data` path against the config's directory.
fn load_run_config(path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path).with_context(|| format!("reading config {}", path.display()))?;
    if let (Some(data), Some(dir)) = (&cfg.data, path.parent()) {
        if data.is_relative() {
            cfg.data = Some(dir.join(data));
        }
    }
    Ok(cfg)
}

fn synth(args: SynthArgs) -> Result<()> {
    if args.source.solar_site {
        let site = EnergyScenario::synthetic(&SolarParams::default(), args.seed)?;
        site.write_csv(fs::File::create(&args.out)?)?;
        println!("wrote {} ({} steps)", args.out.display(), site.len());
        return Ok(());
    }
    let spec_path = args.source.spec.expect("clap enforces one source");
    let spec: ScenarioSpec = toml::from_str(&fs::read_to_string(&spec_path)?).context("parsing scenario spec")?;
    let g = generate(&spec)?;
    save_frame(&g.frame, &args.out)?;
    let sidecar = args.out.with_extension("truth.json");
    fs::write(&sidecar, serde_json::to_string_pretty(&Sidecar { spec, truth: g.truth })?)?;
    println!("wrote {} and {}", args.out.display(), sidecar.display());
    Ok(())
}

fn calibrate(config: &Path, out: &Path) -> Result<()> {
    let cfg = load_run_config(config)?;
    let frame = cfg.frame()?;
    let split = chronological_split(frame.len(), cfg.split);
    let train = frame.slice(split.train.start, split.train.end);
    let calib = frame.slice(split.calibration.start, split.calibration.end);
    let pred = fit(&cfg.predictor_spec(), &train, cfg.a, cfg.b)?;
    let store = dscp_calibrate(&pred, &calib, &cfg.dscp_config(), cfg.a, cfg.b, cfg.seed)?;
    store.save(out)?;
    let sizes: Vec<usize> = store.clusters.iter().map(|c| c.records.len()).collect();
    let silhouette = store.silhouette.map_or("n/a".to_string(), |s| format!("{s:.3}"));
    println!("k = {} (silhouette {silhouette}), cluster sizes {sizes:?}", store.k());
    for c in &store.clusters {
        let starts: Vec<usize> = c.merged.boundaries().iter().map(|s| s + 1).collect();
        println!("  cluster {}: merged ranges start at steps 1{}", c.id, starts.iter().map(|s| format!(", {s}")).collect::<String>());
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn predict(store: &Path, data: &Path, alpha: f64, out: Option<&Path>) -> Result<()> {
    let store = CalibrationStore::load(store)?;
    let pred = store.predictor.as_ref().context("store has no embedded predictor")?;
    let frame = load_frame(data)?;
    let a = pred.input_size;
    if frame.len() < a {
        bail!("need at least {a} rows of input, got {}", frame.len());
    }
    let n = frame.len();
    let window = ForecastWindow::new(n as i64 - 1, pred.predict(&frame.target[n - a..])?)?;
    let cluster = store.assign_cluster(&window)?;
    let iv = dscp_predict(&store, &window, alpha)?;
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["step", "lower", "pred", "upper"])?;
    for j in 0..iv.horizon() {
        w.write_record([(j + 1).to_string(), iv.lower[j].to_string(), iv.point[j].to_string(), iv.upper[j].to_string()])?;
    }
    w.flush()?;
    eprintln!("cluster {cluster}{}", if iv.fallback { " (empty, pooled fallback)" } else { "" });
    Ok(())
}

fn evaluate(config: &Path, out_dir: Option<PathBuf>) -> Result<()> {
    let cfg = load_run_config(config)?;
    let dir = out_dir.unwrap_or_else(|| cfg.out_dir.clone());
    let out = run_to_dir(&cfg, &cfg.frame()?, &dir)?;
    println!("{:<12} {:>6} {:>9} {:>9} {:>9} {:>8}", "method", "alpha", "dcov_pp", "width", "winkler", "windows");
    for r in &out.reports {
        println!(
            "{:<12} {:>6} {:>9.3} {:>9.3} {:>9.3} {:>8}",
            r.method, r.alpha, r.delta_cov, r.pi_width, r.winkler, r.n_windows
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn sweep(config: &Path, horizons: &[usize], out: Option<PathBuf>) -> Result<()> {
    let cfg = load_run_config(config)?;
    let rows = sensitivity_sweep(&cfg, &cfg.frame()?, horizons)?;
    let path = out.unwrap_or_else(|| cfg.out_dir.join("sweep.csv"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_sweep_csv(&rows, fs::File::create(&path)?)?;
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}

fn run_simulation(scenario: &Path, config: &Path, out_dir: &Path) -> Result<()> {
    let file: SimFile = toml::from_str(&fs::read_to_string(config)?).context("parsing simulation config")?;
    let site = EnergyScenario::load_csv(scenario, file.gamma.unwrap_or(1.0), file.carbon_intensity.unwrap_or(0.4))?;
    let result = simulate(&site, &file.sim_config())?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("emissions.json"), result.summary_json()?)?;
    result.write_log_csv(fs::File::create(out_dir.join("schedule_log.csv"))?)?;
    println!(
        "{:?}/{:?}: {:.3} kg CO2 over {} steps ({:.3} kWh brown)",
        result.forecaster,
        result.strategy,
        result.emissions,
        result.steps.len(),
        result.brown_energy
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => synth(args),
        Command::Calibrate { config, out } => calibrate(&config, &out),
        Command::Predict { store, data, alpha, out } => predict(&store, &data, alpha, out.as_deref()),
        Command::Evaluate { config, out_dir } => evaluate(&config, out_dir),
        Command::Sweep { config, horizons, out } => sweep(&config, &horizons, out),
        Command::Simulate { scenario, config, out_dir } => run_simulation(&scenario, &config, &out_dir),
    }
}
