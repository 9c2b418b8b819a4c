//! Horizontal classification: signed errors, per-step error sets and the
//! left-to-right adaptive merging of adjacent steps whose error
//! distributions a two-sample Kolmogorov-Smirnov test cannot tell apart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ErrorRecord, ForecastWindow};

pub const DEFAULT_THETA: f64 = 0.05;

/// `truth - forecast` for every step of the window.
pub fn signed_errors(truth: &[f64], window: &ForecastWindow) -> Result<ErrorRecord> {
    if truth.len() != window.horizon() {
        return Err(Error::ShapeMismatch { expected: window.horizon(), got: truth.len() });
    }
    let errors = truth.iter().zip(&window.values).map(|(y, p)| y - p).collect();
    Ok(ErrorRecord { window: window.clone(), errors, cluster: None })
}

/// Two-sample KS statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest ECDF gap between two ascending samples, with both ECDFs evaluated
/// after every tied block.
fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Kolmogorov survival function `Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`.
///
/// The alternating series is summed until a term drops below 1e-12. Below
/// `lambda = 0.2` it needs hundreds of terms, so the equivalent theta-function
/// form `1 - sqrt(2 pi)/lambda * sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))` is used
/// there instead.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 0.2 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1.. {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * c).exp();
            sum += term;
            if term < 1e-16 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1.. {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-12 {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(ks_sorted(&sorted(a), &sorted(b)))
}

fn ks_sorted(a: &[f64], b: &[f64]) -> KsResult {
    let d = ks_statistic_sorted(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let lambda = d * (n * m / (n + m)).sqrt();
    KsResult { statistic: d, p_value: kolmogorov_survival(lambda) }
}

/// Per-step signed errors of one cluster: `per_step[j]` collects step `j`
/// across all member records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepErrorSets {
    pub per_step: Vec<Vec<f64>>,
}

impl StepErrorSets {
    pub fn horizon(&self) -> usize {
        self.per_step.len()
    }
}

pub fn build_step_sets<'a, I>(records: I) -> Result<StepErrorSets>
where
    I: IntoIterator<Item = &'a ErrorRecord>,
{
    let mut per_step: Vec<Vec<f64>> = Vec::new();
    for (n, rec) in records.into_iter().enumerate() {
        if n == 0 {
            per_step = vec![Vec::new(); rec.horizon()];
        } else if rec.horizon() != per_step.len() {
            return Err(Error::ShapeMismatch { expected: per_step.len(), got: rec.horizon() });
        }
        for (set, e) in per_step.iter_mut().zip(&rec.errors) {
            set.push(*e);
        }
    }
    if per_step.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(StepErrorSets { per_step })
}

/// Inclusive, zero-based range of forecast steps sharing one error set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRange {
    pub start: usize,
    pub end: usize,
}

impl StepRange {
    pub fn contains(&self, step: usize) -> bool {
        self.start <= step && step <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Partition of the horizon into contiguous ranges, each holding the
/// ascending union of its steps' errors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergedErrorSets {
    pub ranges: Vec<StepRange>,
    pub sets: Vec<Vec<f64>>,
}

impl MergedErrorSets {
    pub fn horizon(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end + 1)
    }

    pub fn range_of(&self, step: usize) -> usize {
        self.ranges.iter().position(|r| r.contains(step)).expect("step outside horizon")
    }

    /// The merged error multiset serving `step`, ascending.
    pub fn set_for_step(&self, step: usize) -> &[f64] {
        &self.sets[self.range_of(step)]
    }

    /// First step of every range after the first.
    pub fn boundaries(&self) -> Vec<usize> {
        self.ranges.iter().skip(1).map(|r| r.start).collect()
    }
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Sweeps steps left to right, testing the running merged set against the
/// next step's errors. A p-value above `theta` absorbs the next step;
/// otherwise the current range closes and a new one opens. Every step,
/// including the last, ends up in exactly one range.
pub fn adaptive_merge(theta: f64, sets: &StepErrorSets) -> Result<MergedErrorSets> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidConfig(format!("merge threshold must lie in (0, 1], got {theta}")));
    }
    let b = sets.horizon();
    if b == 0 || sets.per_step.iter().any(Vec::is_empty) {
        return Err(Error::EmptySample);
    }
    let mut ranges = Vec::new();
    let mut merged = Vec::new();
    let mut start = 0;
    let mut current = sorted(&sets.per_step[0]);
    for j in 0..b - 1 {
        let next = sorted(&sets.per_step[j + 1]);
        if ks_sorted(&current, &next).p_value > theta {
            current = merge_sorted(&current, &next);
        } else {
            ranges.push(StepRange { start, end: j });
            merged.push(std::mem::replace(&mut current, next));
            start = j + 1;
        }
    }
    ranges.push(StepRange { start, end: b - 1 });
    merged.push(current);
    Ok(MergedErrorSets { ranges, sets: merged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn window(values: Vec<f64>) -> ForecastWindow {
        ForecastWindow::new(0, values).unwrap()
    }

    /// Series form of Q(lambda) summed to a fixed, generous number of terms.
    fn series_oracle(lambda: f64) -> f64 {
        let mut s = 0.0;
        for k in 1..=2000 {
            let k = k as f64;
            s += if k as u64 % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * k * k * lambda * lambda).exp();
        }
        (2.0 * s).clamp(0.0, 1.0)
    }

    #[test]
    fn signed_error_arithmetic() {
        let rec = signed_errors(&[5.0, 3.0], &window(vec![4.0, 5.0])).unwrap();
        assert_eq!(rec.errors, vec![1.0, -2.0]);
        let rec = signed_errors(&[2.0, 2.0], &window(vec![2.0, 2.0])).unwrap();
        assert_eq!(rec.errors, vec![0.0, 0.0]);
        assert!(matches!(signed_errors(&[1.0], &window(vec![1.0, 2.0])), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn ks_identical_samples() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ks_disjoint_samples() {
        let r = ks_two_sample(&[0.0; 4], &[1.0; 4]).unwrap();
        assert_eq!(r.statistic, 1.0);
        // 2 (e^-4 - e^-16 + e^-36 - ...)
        let expected = 2.0 * ((-4.0f64).exp() - (-16.0f64).exp() + (-36.0f64).exp());
        assert!((r.p_value - expected).abs() < 1e-12);
        assert!((r.p_value - 0.0366).abs() < 1e-4);
    }

    #[test]
    fn ks_ties_across_samples() {
        // ECDFs at 1: A = 2/3, B = 1/3; at 2: both 1
        let r = ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((r.statistic - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_empty() {
        assert!(matches!(ks_two_sample(&[], &[1.0]), Err(Error::EmptySample)));
    }

    #[test]
    fn survival_matches_series_in_both_regimes() {
        for i in 1..400 {
            let lambda = i as f64 * 0.01;
            let got = kolmogorov_survival(lambda);
            let want = series_oracle(lambda);
            assert!((got - want).abs() < 1e-9, "lambda={lambda}: {got} vs {want}");
        }
    }

    #[test]
    fn ks_calibrated_under_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut ok = 0;
        for _ in 0..100 {
            let a: Vec<f64> = (0..500).map(|_| normal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..500).map(|_| normal.sample(&mut rng)).collect();
            if ks_two_sample(&a, &b).unwrap().p_value > 0.01 {
                ok += 1;
            }
        }
        assert!(ok >= 98, "{ok}");
    }

    #[test]
    fn step_sets_collect_columns() {
        let recs: Vec<ErrorRecord> = [[1.0, 2.0], [3.0, 4.0]]
            .iter()
            .map(|e| ErrorRecord { window: window(vec![0.0, 0.0]), errors: e.to_vec(), cluster: None })
            .collect();
        let sets = build_step_sets(&recs).unwrap();
        assert_eq!(sets.per_step, vec![vec![1.0, 3.0], vec![2.0, 4.0]]);
        let sets = build_step_sets(&recs[..1]).unwrap();
        assert_eq!(sets.per_step, vec![vec![1.0], vec![2.0]]);
        assert!(matches!(build_step_sets(&recs[..0]), Err(Error::EmptySet)));
    }

    #[test]
    fn merge_single_step() {
        let sets = StepErrorSets { per_step: vec![vec![3.0, 1.0]] };
        let m = adaptive_merge(0.05, &sets).unwrap();
        assert_eq!(m.ranges, vec![StepRange { start: 0, end: 0 }]);
        assert_eq!(m.sets, vec![vec![1.0, 3.0]]);
    }

    #[test]
    fn merge_identical_steps_into_one() {
        let base = vec![0.3, -1.0, 2.0, 0.0];
        let sets = StepErrorSets { per_step: vec![base.clone(); 4] };
        let m = adaptive_merge(0.05, &sets).unwrap();
        assert_eq!(m.ranges, vec![StepRange { start: 0, end: 3 }]);
        assert_eq!(m.sets[0].len(), 16);
        for j in 0..4 {
            assert_eq!(m.set_for_step(j), m.sets[0].as_slice());
        }
    }

    #[test]
    fn merge_splits_shifted_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n0 = Normal::new(0.0, 1.0).unwrap();
        let n10 = Normal::new(10.0, 1.0).unwrap();
        let s1: Vec<f64> = (0..200).map(|_| n0.sample(&mut rng)).collect();
        let s2: Vec<f64> = (0..200).map(|_| n0.sample(&mut rng)).collect();
        let s3: Vec<f64> = (0..200).map(|_| n10.sample(&mut rng)).collect();
        // oracle on these concrete draws
        assert!(ks_two_sample(&s1, &s2).unwrap().p_value > 0.05);
        let mut s12 = s1.clone();
        s12.extend(&s2);
        assert!(ks_two_sample(&s12, &s3).unwrap().p_value <= 0.05);

        let m = adaptive_merge(0.05, &StepErrorSets { per_step: vec![s1, s2, s3] }).unwrap();
        assert_eq!(m.ranges, vec![StepRange { start: 0, end: 1 }, StepRange { start: 2, end: 2 }]);
        assert_eq!(m.boundaries(), vec![2]);
    }

    #[test]
    fn final_step_always_saved() {
        // every adjacent pair differs, so each step is its own range
        let sets = StepErrorSets { per_step: (0..5).map(|j| vec![j as f64 * 100.0; 50]).collect() };
        let m = adaptive_merge(0.05, &sets).unwrap();
        assert_eq!(m.ranges.len(), 5);
        assert_eq!(m.horizon(), 5);
        assert_eq!(m.set_for_step(4)[0], 400.0);
    }

    fn random_sets(seed: u64, b: usize, n: usize) -> StepErrorSets {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut per_step = Vec::new();
        let mut shift = 0.0;
        for _ in 0..b {
            if rand::Rng::random::<f64>(&mut rng) < 0.3 {
                shift += rand::Rng::random_range(&mut rng, -1.0..1.0);
            }
            let d = Normal::new(shift, 1.0).unwrap();
            per_step.push((0..n).map(|_| d.sample(&mut rng)).collect());
        }
        StepErrorSets { per_step }
    }

    proptest! {
        #[test]
        fn ks_symmetric_and_bounded(
            a in prop::collection::vec(-5.0f64..5.0, 1..40),
            b in prop::collection::vec(-5.0f64..5.0, 1..40),
        ) {
            let x = ks_two_sample(&a, &b).unwrap();
            let y = ks_two_sample(&b, &a).unwrap();
            prop_assert_eq!(x, y);
            prop_assert!((0.0..=1.0).contains(&x.statistic));
            prop_assert!((0.0..=1.0).contains(&x.p_value));
        }

        #[test]
        fn p_value_non_increasing_in_statistic(d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, n in 1usize..300, m in 1usize..300) {
            let scale = ((n * m) as f64 / (n + m) as f64).sqrt();
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(kolmogorov_survival(hi * scale) <= kolmogorov_survival(lo * scale) + 1e-15);
        }

        #[test]
        fn merge_preserves_mass(seed in 0u64..1000, b in 1usize..12, theta in 0.01f64..0.9) {
            let sets = random_sets(seed, b, 30);
            let m = adaptive_merge(theta, &sets).unwrap();
            let total: usize = m.sets.iter().map(Vec::len).sum();
            prop_assert_eq!(total, b * 30);
            // ranges contiguous, disjoint and covering
            prop_assert_eq!(m.ranges[0].start, 0);
            prop_assert_eq!(m.ranges.last().unwrap().end, b - 1);
            for w in m.ranges.windows(2) {
                prop_assert_eq!(w[1].start, w[0].end + 1);
            }
            for (r, s) in m.ranges.iter().zip(&m.sets) {
                prop_assert_eq!(s.len(), r.len() * 30);
            }
        }
    }
}
