use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::lstm::{Arch, LstmModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub early_stopping_patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_split: f64,
    pub seed: u64,
    /// Keep every n-th training sample (1 keeps all).
    pub sample_stride: usize,
    /// Keep every n-th validation sample (1 keeps all).
    pub validation_stride: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_max: 500,
            batch_size: 32,
            learning_rate: 1e-3,
            dropout: 0.2,
            early_stopping_patience: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            validation_split: 0.2,
            seed: 0,
            sample_stride: 1,
            validation_stride: 1,
            grad_clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs_max > 0
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.dropout)
            && self.early_stopping_patience > 0
            && self.early_stopping_patience < self.epochs_max.max(2)
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.validation_split > 0.0
            && self.validation_split < 1.0
            && self.sample_stride > 0
            && self.validation_stride > 0
            && self.grad_clip_norm.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("train config out of range".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LstmModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// RMS one-step residual on the validation split.
    pub residual_sigma: f64,
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

impl Adam {
    fn new(params: &[Array2<f64>]) -> Self {
        let zeros = || params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Self { m: zeros(), v: zeros(), t: 0 }
    }

    fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>], cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
            });
        }
    }
}

/// Residual targets: the network predicts the change from the last load.
fn residual_targets(ds: &Dataset, samples: &[usize]) -> Array1<f64> {
    samples.iter().map(|&s| ds.target(s) - ds.last_load(s)).collect()
}

/// Mean-squared one-step error of `model` on `samples`, inference mode.
pub fn evaluate_mse(model: &LstmModel, ds: &Dataset, samples: &[usize]) -> Result<f64> {
    let mut sum = 0.0;
    for chunk in samples.chunks(256) {
        let (out, _) = model.forward(&ds.batch(chunk), None)?;
        let t = residual_targets(ds, chunk);
        sum += (&out - &t).mapv(|d| d * d).sum();
    }
    Ok(sum / samples.len().max(1) as f64)
}

/// One-step predictions (clamped loads) for `samples`.
pub fn predict_samples(model: &LstmModel, ds: &Dataset, samples: &[usize]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(256) {
        let (raw, _) = model.forward(&ds.batch(chunk), None)?;
        out.extend(
            chunk
                .iter()
                .zip(raw.iter())
                .map(|(&s, r)| (ds.last_load(s) + r).clamp(0.0, super::MAX_PREDICTED_LOAD)),
        );
    }
    Ok(out)
}

/// Chronological split thinned by the configured strides.
pub fn split_samples(ds: &Dataset, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let (train_idx, val_idx) = ds.split(cfg.validation_split);
    (
        train_idx.into_iter().step_by(cfg.sample_stride.max(1)).collect(),
        val_idx.into_iter().step_by(cfg.validation_stride.max(1)).collect(),
    )
}

fn clip(grads: &mut [Array2<f64>], max_norm: f64) {
    let norm = grads.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads {
            g.mapv_inplace(|v| v * k);
        }
    }
}

/// Adam on mean-squared error with full BPTT over each window, chronological
/// validation and early stopping that restores the best epoch. Parameters
/// are rounded to `f32` after every update, so an archived model is
/// exactly the model that was validated.
pub fn train(arch: Arch, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds.window != arch.window {
        return Err(Error::InvalidConfig(format!(
            "dataset window {} differs from model window {}",
            ds.window, arch.window
        )));
    }
    let (mut train_idx, val_idx) = split_samples(ds, cfg);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::TooShort {
            needed: arch.window + ds.horizon + 1,
            got: ds.loads.len(),
        });
    }

    let mut model = LstmModel::init(arch, cfg.dropout, cfg.seed);
    model.quantize_f32();
    let mut adam = Adam::new(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_d20f);
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.params.clone());

    for epoch in 1..=cfg.epochs_max {
        train_idx.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            let xs = ds.batch(chunk);
            let t = residual_targets(ds, chunk);
            let (loss, mut grads) = model
                .mse_and_grad(&xs, &t, Some(&mut rng))
                .map_err(|_| Error::Diverged(epoch))?;
            if !loss.is_finite() {
                return Err(Error::Diverged(epoch));
            }
            if let Some(c) = cfg.grad_clip_norm {
                clip(&mut grads, c);
            }
            adam.step(&mut model.params, &grads, cfg);
            model.quantize_f32();
            weighted += loss * chunk.len() as f64;
        }
        if !model.all_finite() {
            return Err(Error::Diverged(epoch));
        }
        let train_mse = weighted / train_idx.len() as f64;
        let val_mse = evaluate_mse(&model, ds, &val_idx).map_err(|_| Error::Diverged(epoch))?;
        if !val_mse.is_finite() || !train_mse.is_finite() {
            return Err(Error::Diverged(epoch));
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });
        if val_mse < best.0 {
            best = (val_mse, epoch, model.params.clone());
        } else if epoch - best.1 >= cfg.early_stopping_patience {
            break;
        }
    }

    model.params = best.2;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch: best.1,
        residual_sigma: best.0.sqrt(),
    })
}

pub fn write_history<W: std::io::Write>(out: W, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "train_mse", "val_mse"])?;
    for h in history {
        w.write_record([h.epoch.to_string(), h.train_mse.to_string(), h.val_mse.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
