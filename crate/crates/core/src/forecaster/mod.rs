//! Stacked-LSTM load forecaster written directly on `ndarray`.
//!
//! The network reads a window of past loads, each paired with the context
//! of the following step, and predicts the change of load over the next
//! step. Longer horizons are produced by feeding predictions back in.

mod archive;
mod dataset;
mod features;
mod infer;
mod lstm;
mod train;

pub use archive::{decode as decode_archive, encode as encode_archive, ArchiveManifest, TensorEntry};
pub use dataset::{build_dataset, Dataset};
pub use features::{input_row, StepContext, INPUT_DIM};
pub use infer::InferenceNet;
pub use lstm::{Arch, ForwardCache, LstmModel};
pub use train::{evaluate_mse, predict_samples, split_samples, train, write_history, EpochRecord, TrainConfig, TrainOutcome};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Timestamp;

pub const MAX_PREDICTED_LOAD: f64 = 5.0;
/// Denominator floor of the accuracy ratio.
pub const ACCURACY_LOAD_FLOOR: f64 = 0.05;
const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    /// Timestamp of the first predicted step.
    pub start: Timestamp,
    pub step_minutes: u32,
    pub horizon_steps: usize,
    pub predicted_load: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub model_version: String,
}

impl ForecastResult {
    /// Builds the interval `pred ± 1.96·σ·√k` around clamped predictions.
    pub fn from_predictions(start: Timestamp, step_minutes: u32, predicted: Vec<f64>, sigma: f64, version: &str) -> Self {
        let predicted: Vec<f64> = predicted.into_iter().map(|p| p.clamp(0.0, MAX_PREDICTED_LOAD)).collect();
        let half = |k: usize| Z95 * sigma * ((k + 1) as f64).sqrt();
        Self {
            start,
            step_minutes,
            horizon_steps: predicted.len(),
            ci_low: predicted.iter().enumerate().map(|(k, p)| p - half(k)).collect(),
            ci_high: predicted.iter().enumerate().map(|(k, p)| p + half(k)).collect(),
            predicted_load: predicted,
            model_version: version.to_string(),
        }
    }

    pub fn timestamp_of(&self, k: usize) -> Timestamp {
        self.start.plus_minutes(k as i64 * i64::from(self.step_minutes))
    }

    /// Prediction for timestamp `t`, if it lies on the forecast grid.
    pub fn value_at(&self, t: Timestamp) -> Option<f64> {
        let step = i64::from(self.step_minutes);
        let off = t.minutes() - self.start.minutes();
        if off < 0 || off % step != 0 {
            return None;
        }
        self.predicted_load.get((off / step) as usize).copied()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "predicted_load", "ci_low", "ci_high"])?;
        for k in 0..self.horizon_steps {
            w.write_record([
                self.timestamp_of(k).to_string(),
                self.predicted_load[k].to_string(),
                self.ci_low[k].to_string(),
                self.ci_high[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Anything that can extend a load history.
///
/// `loads` ends at the latest observed step; `contexts[j]` describes the
/// step after `loads[j]`, so it holds `loads.len() - 1 + horizon` entries.
pub trait LoadForecaster {
    fn window(&self) -> usize;

    fn model_version(&self) -> String;

    fn forecast(&self, loads: &[f64], contexts: &[StepContext], horizon: usize) -> Result<ForecastResult>;
}

fn check_inputs(window: usize, loads: &[f64], contexts: &[StepContext], horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::BadHorizon(0));
    }
    if loads.len() < window {
        return Err(Error::TooShort {
            needed: window,
            got: loads.len(),
        });
    }
    if contexts.len() != loads.len() - 1 + horizon {
        return Err(Error::LengthMismatch(loads.len() - 1 + horizon, contexts.len()));
    }
    Ok(())
}

/// Repeats the last observed load; zero-width interval.
#[derive(Debug, Clone, Copy)]
pub struct PersistenceForecaster {
    window: usize,
}

impl PersistenceForecaster {
    pub fn new(window: usize) -> Self {
        Self { window: window.max(1) }
    }
}

impl LoadForecaster for PersistenceForecaster {
    fn window(&self) -> usize {
        self.window
    }

    fn model_version(&self) -> String {
        "persistence".into()
    }

    fn forecast(&self, loads: &[f64], contexts: &[StepContext], horizon: usize) -> Result<ForecastResult> {
        check_inputs(self.window, loads, contexts, horizon)?;
        let last = *loads.last().expect("window >= 1");
        let start = contexts[loads.len() - 1].timestamp;
        let step = step_of(contexts);
        Ok(ForecastResult::from_predictions(start, step, vec![last; horizon], 0.0, "persistence"))
    }
}

fn step_of(contexts: &[StepContext]) -> u32 {
    match contexts {
        [a, b, ..] => (b.timestamp.minutes() - a.timestamp.minutes()).max(1) as u32,
        _ => 1,
    }
}

/// Trained network plus the validation residual spread.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmForecaster {
    pub model: LstmModel,
    pub residual_sigma: f64,
    pub model_version: String,
    net: InferenceNet,
}

impl LstmForecaster {
    pub fn new(model: LstmModel, residual_sigma: f64) -> Result<Self> {
        let bytes = encode_archive(&model, residual_sigma)?;
        let (_, manifest) = decode_archive(&bytes)?;
        Ok(Self {
            net: InferenceNet::new(&model),
            model,
            residual_sigma,
            model_version: manifest.model_version,
        })
    }

    pub fn to_archive(&self) -> Result<Vec<u8>> {
        encode_archive(&self.model, self.residual_sigma)
    }

    pub fn from_archive(bytes: &[u8]) -> Result<Self> {
        let (model, manifest) = decode_archive(bytes)?;
        Ok(Self {
            net: InferenceNet::new(&model),
            model,
            residual_sigma: manifest.residual_sigma,
            model_version: manifest.model_version,
        })
    }

    /// Next-step load for one window (`contexts[j]` follows `loads[j]`).
    fn step(&self, loads: &[f64], contexts: &[StepContext]) -> Result<f64> {
        let rows: Vec<[f64; INPUT_DIM]> = loads.iter().zip(contexts).map(|(&l, c)| input_row(l, c)).collect();
        let out = self.net.run(rows.iter().map(|r| r.as_slice()));
        if !out.is_finite() {
            return Err(Error::NonFiniteActivation {
                layer: "head",
                step: loads.len() - 1,
            });
        }
        Ok((loads[loads.len() - 1] + out).clamp(0.0, MAX_PREDICTED_LOAD))
    }
}

impl LoadForecaster for LstmForecaster {
    fn window(&self) -> usize {
        self.model.arch.window
    }

    fn model_version(&self) -> String {
        self.model_version.clone()
    }

    fn forecast(&self, loads: &[f64], contexts: &[StepContext], horizon: usize) -> Result<ForecastResult> {
        let w = self.window();
        check_inputs(w, loads, contexts, horizon)?;
        let skip = loads.len() - w;
        let mut buf: Vec<f64> = loads[skip..].to_vec();
        let ctx = &contexts[skip..];
        let mut predicted = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let p = self.step(&buf[k..k + w], &ctx[k..k + w])?;
            predicted.push(p);
            buf.push(p);
        }
        Ok(ForecastResult::from_predictions(
            ctx[w - 1].timestamp,
            step_of(contexts),
            predicted,
            self.residual_sigma,
            &self.model_version,
        ))
    }
}

/// `forecast` as a free function over any forecaster.
pub fn forecast(
    model: &dyn LoadForecaster,
    loads: &[f64],
    contexts: &[StepContext],
    horizon: i64,
) -> Result<ForecastResult> {
    if horizon <= 0 {
        return Err(Error::BadHorizon(horizon));
    }
    model.forecast(loads, contexts, horizon as usize)
}

/// `100·(1 − mean(|p − a| / max(a, 0.05)))`.
pub fn accuracy(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(predicted.len(), actual.len()));
    }
    if actual.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let ratio: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs() / a.max(ACCURACY_LOAD_FLOOR))
        .sum::<f64>()
        / actual.len() as f64;
    Ok(100.0 * (1.0 - ratio))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(n: usize) -> Vec<StepContext> {
        let t0 = Timestamp::from_ymd_hm(2025, 6, 1, 0, 0);
        (0..n).map(|i| StepContext::quiet(t0.plus_minutes(i as i64 + 1))).collect()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 100.0);
        assert!((accuracy(&[0.98; 4], &[1.0; 4]).unwrap() - 98.0).abs() < 1e-9);
        let a = accuracy(&[0.5, 0.5], &[0.4, 0.6]).unwrap();
        assert!((a - 100.0 * (1.0 - (0.25 + 0.1 / 0.6) / 2.0)).abs() < 1e-12);
        assert!(matches!(accuracy(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn interval_shapes() {
        let f = ForecastResult::from_predictions(Timestamp(0), 1, vec![0.5; 4], 0.1, "v");
        assert!((f.ci_high[0] - f.ci_low[0] - 2.0 * 1.96 * 0.1).abs() < 1e-12);
        assert!((f.ci_high[3] - f.predicted_load[3] - 1.96 * 0.1 * 2.0).abs() < 1e-12);
        let z = ForecastResult::from_predictions(Timestamp(0), 1, vec![7.0, -1.0], 0.0, "v");
        assert_eq!(z.predicted_load, vec![5.0, 0.0]);
        assert_eq!(z.ci_low, z.ci_high);
    }

    #[test]
    fn horizon_must_be_positive() {
        let p = PersistenceForecaster::new(3);
        assert!(matches!(forecast(&p, &[0.1; 3], &ctx(2), 0), Err(Error::BadHorizon(0))));
        assert!(matches!(forecast(&p, &[0.1; 3], &ctx(2), -5), Err(Error::BadHorizon(-5))));
    }

    #[test]
    fn lstm_forecast_length_and_bounds() {
        let mut m = LstmModel::init(Arch::tiny(), 0.0, 1);
        m.quantize_f32();
        let f = LstmForecaster::new(m, 0.02).unwrap();
        let r = forecast(&f, &[0.4; 5], &ctx(4 + 200), 200).unwrap();
        assert_eq!(r.predicted_load.len(), 200);
        assert_eq!(r.start, ctx(5)[4].timestamp);
        for k in 0..200 {
            assert!((0.0..=5.0).contains(&r.predicted_load[k]));
            assert!(r.ci_low[k] <= r.predicted_load[k] && r.predicted_load[k] <= r.ci_high[k]);
        }
        let back = LstmForecaster::from_archive(&f.to_archive().unwrap()).unwrap();
        assert_eq!(back, f);
    }
}
