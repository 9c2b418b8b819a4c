//! Point predictors that turn an input block into a b-step forecast.
//!
//! Two deterministic models are provided: a seasonal-naive replay and a
//! ridge-regularised linear autoregression rolled out recursively. Both read
//! only the target column; frame features are ignored.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForecastWindow, SeriesFrame, SupervisedPair};

pub const DEFAULT_RIDGE: f64 = 1e-6;

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorSpec {
    SeasonalNaive { period: usize },
    LinearAr {
        order: usize,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
}

impl PredictorSpec {
    fn check(&self) -> Result<()> {
        match *self {
            PredictorSpec::SeasonalNaive { period } if period == 0 => {
                Err(Error::InvalidConfig("seasonal period must be at least 1".into()))
            }
            PredictorSpec::LinearAr { order, .. } if order == 0 => {
                Err(Error::InvalidConfig("AR order must be at least 1".into()))
            }
            PredictorSpec::LinearAr { ridge, .. } if !(ridge.is_finite() && ridge >= 0.0) => {
                Err(Error::InvalidConfig(format!("ridge penalty must be finite and >= 0, got {ridge}")))
            }
            _ => Ok(()),
        }
    }

    /// Smallest input block the model can read.
    pub fn min_input(&self) -> usize {
        match *self {
            PredictorSpec::SeasonalNaive { period } => period,
            PredictorSpec::LinearAr { order, .. } => order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    SeasonalNaive { period: usize },
    /// `y_t = intercept + sum_i coefficients[i] * y_{t-1-i}`
    LinearAr { intercept: f64, coefficients: Vec<f64> },
}

/// A fitted, immutable point predictor for a fixed input size and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub input_size: usize,
    pub horizon: usize,
    pub model: FittedModel,
}

/// Fits `spec` on the training frame for input size `a` and horizon `b`.
pub fn fit(spec: &PredictorSpec, train: &SeriesFrame, a: usize, b: usize) -> Result<Predictor> {
    spec.check()?;
    if b == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    if a < spec.min_input() {
        return Err(Error::InvalidConfig(format!(
            "input window {a} is shorter than the {} steps the predictor reads",
            spec.min_input()
        )));
    }
    let y = &train.target;
    let model = match *spec {
        PredictorSpec::SeasonalNaive { period } => {
            if y.len() < period + b {
                return Err(Error::TooShort { needed: period + b, got: y.len() });
            }
            FittedModel::SeasonalNaive { period }
        }
        PredictorSpec::LinearAr { order, ridge } => {
            if y.len() < order + b + 1 {
                return Err(Error::TooShort { needed: order + b + 1, got: y.len() });
            }
            let (intercept, coefficients) = fit_ar(y, order, ridge)?;
            FittedModel::LinearAr { intercept, coefficients }
        }
    };
    Ok(Predictor { input_size: a, horizon: b, model })
}

/// Ridge least squares on lagged targets; the intercept is not penalised.
fn fit_ar(y: &[f64], order: usize, ridge: f64) -> Result<(f64, Vec<f64>)> {
    let rows = y.len() - order;
    let cols = order + 1;
    let design = DMatrix::from_fn(rows, cols, |r, c| if c == 0 { 1.0 } else { y[order + r - c] });
    let response = DVector::from_iterator(rows, y[order..].iter().copied());

    let mut gram = design.transpose() * &design;
    for c in 1..cols {
        gram[(c, c)] += ridge;
    }
    let rhs = design.transpose() * response;

    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if max == 0.0 || min <= 1e-12 * max {
        return Err(Error::SingularFit);
    }
    let beta = gram.cholesky().ok_or(Error::SingularFit)?.solve(&rhs);
    Ok((beta[0], beta.iter().skip(1).copied().collect()))
}

impl Predictor {
    /// Forecasts the next `horizon` values from exactly `input_size` inputs.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size {
            return Err(Error::ShapeMismatch { expected: self.input_size, got: input.len() });
        }
        let b = self.horizon;
        Ok(match &self.model {
            FittedModel::SeasonalNaive { period } => {
                let p = *period;
                let n = input.len();
                (1..=b).map(|h| input[n + h - p * h.div_ceil(p) - 1]).collect()
            }
            FittedModel::LinearAr { intercept, coefficients } => {
                let mut history = input.to_vec();
                let mut out = Vec::with_capacity(b);
                for _ in 0..b {
                    let n = history.len();
                    let next = intercept
                        + coefficients.iter().enumerate().map(|(i, c)| c * history[n - 1 - i]).sum::<f64>();
                    history.push(next);
                    out.push(next);
                }
                out
            }
        })
    }

    /// Forecast window for a supervised pair, anchored at its last input step.
    pub fn forecast(&self, pair: &SupervisedPair) -> Result<ForecastWindow> {
        ForecastWindow::new(pair.anchor, self.predict(&pair.input)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(y: Vec<f64>) -> SeriesFrame {
        SeriesFrame::from_target(y)
    }

    #[test]
    fn seasonal_naive_replays_period() {
        let y = vec![1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0];
        let p = fit(&PredictorSpec::SeasonalNaive { period: 4 }, &frame(y), 4, 4).unwrap();
        assert_eq!(p.predict(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn seasonal_naive_wraps_past_one_period() {
        let p = Predictor { input_size: 2, horizon: 3, model: FittedModel::SeasonalNaive { period: 2 } };
        assert_eq!(p.predict(&[7.0, 9.0]).unwrap(), vec![7.0, 9.0, 7.0]);
        // longer input: only the last period matters
        let p = Predictor { input_size: 4, horizon: 5, model: FittedModel::SeasonalNaive { period: 2 } };
        assert_eq!(p.predict(&[0.0, 0.0, 7.0, 9.0]).unwrap(), vec![7.0, 9.0, 7.0, 9.0, 7.0]);
    }

    #[test]
    fn ar_recursion_from_known_coefficient() {
        let p = Predictor {
            input_size: 1,
            horizon: 2,
            model: FittedModel::LinearAr { intercept: 0.0, coefficients: vec![0.5] },
        };
        assert_eq!(p.predict(&[8.0]).unwrap(), vec![4.0, 2.0]);
    }

    #[test]
    fn ar_recovers_noiseless_coefficient() {
        // closed form: the noiseless AR(1) path lies exactly on y_t = 0.5 y_{t-1},
        // so least squares has zero residual at intercept 0, slope 0.5
        let y: Vec<f64> = (0..40).map(|i| 64.0 * 0.5_f64.powi(i) + 0.0).collect();
        let spec = PredictorSpec::LinearAr { order: 1, ridge: 0.0 };
        let p = fit(&spec, &frame(y), 3, 4).unwrap();
        let FittedModel::LinearAr { intercept, coefficients } = &p.model else { unreachable!() };
        assert!((coefficients[0] - 0.5).abs() < 1e-9, "{coefficients:?}");
        assert!(intercept.abs() < 1e-9);

        // rollout matches the analytic recursion 0.5^h * last
        let out = p.predict(&[10.0, 6.0, 3.0]).unwrap();
        for (h, v) in out.iter().enumerate() {
            assert!((v - 3.0 * 0.5_f64.powi(h as i32 + 1)).abs() < 1e-6);
        }
    }

    #[test]
    fn ar_on_constant_series_is_singular() {
        let spec = PredictorSpec::LinearAr { order: 2, ridge: 0.0 };
        assert!(matches!(fit(&spec, &frame(vec![5.0; 30]), 2, 2), Err(Error::SingularFit)));
        // the default ridge makes the same fit solvable
        let spec = PredictorSpec::LinearAr { order: 2, ridge: DEFAULT_RIDGE };
        assert!(fit(&spec, &frame(vec![5.0; 30]), 2, 2).is_ok());
    }

    #[test]
    fn short_training_data() {
        let spec = PredictorSpec::SeasonalNaive { period: 4 };
        assert!(matches!(fit(&spec, &frame(vec![1.0; 5]), 4, 2), Err(Error::TooShort { .. })));
    }

    #[test]
    fn wrong_input_length() {
        let p = fit(&PredictorSpec::SeasonalNaive { period: 2 }, &frame(vec![1.0; 10]), 3, 2).unwrap();
        assert!(matches!(p.predict(&[1.0, 2.0]), Err(Error::ShapeMismatch { expected: 3, got: 2 })));
    }

    proptest! {
        #[test]
        fn seasonal_naive_translation_equivariant(
            input in prop::collection::vec(-100.0f64..100.0, 6),
            c in -50.0f64..50.0,
            period in 1usize..=6,
            b in 1usize..10,
        ) {
            let p = Predictor { input_size: 6, horizon: b, model: FittedModel::SeasonalNaive { period } };
            let base = p.predict(&input).unwrap();
            let shifted: Vec<f64> = input.iter().map(|v| v + c).collect();
            let moved = p.predict(&shifted).unwrap();
            for (x, y) in base.iter().zip(&moved) {
                prop_assert!((x + c - y).abs() < 1e-9);
            }
        }

        #[test]
        fn ar_fit_is_deterministic(seed_vals in prop::collection::vec(-10.0f64..10.0, 30..60)) {
            let spec = PredictorSpec::LinearAr { order: 3, ridge: 0.1 };
            let a = fit(&spec, &frame(seed_vals.clone()), 4, 3).unwrap();
            let b = fit(&spec, &frame(seed_vals.clone()), 4, 3).unwrap();
            let input = &seed_vals[..4];
            let fa = a.predict(input).unwrap();
            let fb = b.predict(input).unwrap();
            prop_assert!(fa.iter().zip(&fb).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
