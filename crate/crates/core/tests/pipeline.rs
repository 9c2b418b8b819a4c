use dscp::bench::{prepare, run_to_dir, Method, RunConfig};
use dscp::conformal::{dscp_calibrate, dscp_predict, dscp_update, DscpConfig};
use dscp::io::{load_frame, save_frame};
use dscp::model::{make_supervised, SeriesFrame};
use dscp::predictors::{fit, PredictorSpec};
use dscp::store::CalibrationStore;
use dscp::synth::{generate, ScenarioKind, ScenarioSpec};

fn periodic(length: usize, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        kind: ScenarioKind::PeriodicHeteroscedastic {
            period: 24,
            day_len: 12,
            level: 1.0,
            amplitude: 10.0,
            sigma_day: 2.0,
            sigma_night: 0.1,
        },
        length,
        seed,
    }
}

#[test]
fn stored_calibration_reproduces_intervals() {
    let frame = generate(&periodic(24 * 60, 3)).unwrap().frame;
    let pred = fit(&PredictorSpec::SeasonalNaive { period: 24 }, &frame.slice(0, 24 * 20), 24, 8).unwrap();
    let calib = frame.slice(24 * 20, 24 * 40);
    let store = dscp_calibrate(&pred, &calib, &DscpConfig::default(), 24, 8, 9).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    store.save(&path).unwrap();
    let loaded = CalibrationStore::load(&path).unwrap();
    assert_eq!(loaded, store);

    let test = frame.slice(24 * 40, frame.len());
    for pair in make_supervised(&test, 24, 8).unwrap().iter().step_by(7) {
        let w = loaded.predictor.as_ref().unwrap().forecast(pair).unwrap();
        assert_eq!(dscp_predict(&loaded, &w, 0.1).unwrap(), dscp_predict(&store, &w, 0.1).unwrap());
    }
}

#[test]
fn updates_grow_the_store_without_touching_the_original() {
    let frame = generate(&periodic(24 * 40, 4)).unwrap().frame;
    let pred = fit(&PredictorSpec::SeasonalNaive { period: 24 }, &frame.slice(0, 24 * 10), 24, 6).unwrap();
    let store = dscp_calibrate(&pred, &frame.slice(24 * 10, 24 * 25), &DscpConfig::default(), 24, 6, 1).unwrap();
    let before = store.n_records();
    let mut current = store.clone();
    for pair in make_supervised(&frame.slice(24 * 25, frame.len()), 24, 6).unwrap().iter().take(30) {
        current = dscp_update(&current, &pred.forecast(pair).unwrap(), &pair.truth).unwrap();
    }
    assert_eq!(current.n_records(), before + 30);
    assert_eq!(store.n_records(), before);
}

#[test]
fn csv_round_trip_preserves_a_generated_series() {
    let frame = generate(&periodic(200, 5)).unwrap().frame;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    save_frame(&frame, &path).unwrap();
    assert_eq!(load_frame(&path).unwrap(), frame);
}

#[test]
fn no_leakage_between_segments() {
    let frame = SeriesFrame::from_target((0..600).map(|t| (t as f64 * 0.3).sin()).collect());
    let mut cfg = RunConfig::new(12, 4);
    cfg.predictor = Some(PredictorSpec::SeasonalNaive { period: 12 });
    let prep = prepare(&cfg, &frame).unwrap();
    let s = &prep.split;
    assert!(s.train.end <= s.calibration.start && s.calibration.end <= s.test.start);
    // every calibration and test window reads and predicts inside its own segment
    for r in &prep.calibration {
        let first_input = r.window.anchor + 1 - 12;
        assert!(first_input >= s.calibration.start as i64 && (r.window.anchor as usize + 4) < s.calibration.end);
    }
    for t in &prep.test {
        assert!(t.window.anchor + 1 - 12 >= s.test.start as i64);
        assert!((t.window.anchor as usize + 4) < s.test.end);
    }
}

#[test]
fn run_directory_contains_every_output() {
    let frame = generate(&periodic(24 * 40, 6)).unwrap().frame;
    let mut cfg = RunConfig::new(24, 6);
    cfg.methods = vec![Method::Cp, Method::Dscp, Method::EnbpiStyle, Method::Aci, Method::PerStepCp];
    cfg.alpha = vec![0.1, 0.2];
    cfg.predictor = Some(PredictorSpec::SeasonalNaive { period: 24 });
    let dir = tempfile::tempdir().unwrap();
    let out = run_to_dir(&cfg, &frame, dir.path()).unwrap();
    assert_eq!(out.reports.len(), 10);
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 11);
    let intervals = std::fs::read_to_string(dir.path().join("intervals.csv")).unwrap();
    assert_eq!(intervals.lines().count(), 1 + 10 * out.truths.len() * 6);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["dscp"]["k"].as_u64().unwrap() >= 1);
}
