use ndarray::Array2;

use super::features::{input_row, StepContext, INPUT_DIM};
use crate::error::{Error, Result};
use crate::simcore::LogRow;
use crate::time::Timestamp;

/// Sliding-window supervised pairs over one contiguous load series.
///
/// Row `j` of `inputs` holds `load_j` with the context of step `j + 1`.
/// Sample `s` reads rows `s .. s + window` and targets the load at
/// `s + window + horizon - 1`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub loads: Vec<f64>,
    pub timestamps: Vec<Timestamp>,
    pub window: usize,
    pub horizon: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.loads.len() + 1 - self.window - self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn target(&self, s: usize) -> f64 {
        self.loads[s + self.window + self.horizon - 1]
    }

    /// Load at the last window step of sample `s`.
    pub fn last_load(&self, s: usize) -> f64 {
        self.loads[s + self.window - 1]
    }

    pub fn target_timestamp(&self, s: usize) -> Timestamp {
        self.timestamps[s + self.window + self.horizon - 1]
    }

    /// Chronological split: the first `1 - validation_split` of the samples
    /// train, the rest validate.
    pub fn split(&self, validation_split: f64) -> (Vec<usize>, Vec<usize>) {
        let n = self.len();
        let n_val = ((n as f64) * validation_split).round() as usize;
        let n_train = n - n_val.min(n);
        ((0..n_train).collect(), (n_train..n).collect())
    }

    /// Time-major batch: element `t` is `(batch, INPUT_DIM)`.
    pub fn batch(&self, samples: &[usize]) -> Vec<Array2<f64>> {
        (0..self.window)
            .map(|t| {
                let mut x = Array2::zeros((samples.len(), INPUT_DIM));
                for (b, &s) in samples.iter().enumerate() {
                    x.row_mut(b).assign(&self.inputs.row(s + t));
                }
                x
            })
            .collect()
    }
}

/// Builds the dataset from a run log and per-row contexts
/// (`contexts[i]` describes `rows[i].timestamp`).
pub fn build_dataset(
    rows: &[LogRow],
    contexts: &[StepContext],
    window: usize,
    horizon: usize,
    step_minutes: u32,
) -> Result<Dataset> {
    if rows.len() != contexts.len() {
        return Err(Error::LengthMismatch(rows.len(), contexts.len()));
    }
    if horizon == 0 {
        return Err(Error::BadHorizon(0));
    }
    if window == 0 || rows.len() < window + horizon {
        return Err(Error::TooShort {
            needed: window + horizon,
            got: rows.len(),
        });
    }
    let step = i64::from(step_minutes);
    for pair in rows.windows(2) {
        let expected = pair[0].timestamp.plus_minutes(step);
        if pair[1].timestamp != expected {
            return Err(Error::Gap(expected));
        }
    }
    let n = rows.len();
    let mut inputs = Array2::zeros((n, INPUT_DIM));
    for i in 0..n {
        let next = &contexts[(i + 1).min(n - 1)];
        let row = input_row(rows[i].load, next);
        inputs.row_mut(i).assign(&ndarray::ArrayView1::from(&row[..]));
    }
    Ok(Dataset {
        inputs,
        loads: rows.iter().map(|r| r.load).collect(),
        timestamps: rows.iter().map(|r| r.timestamp).collect(),
        window,
        horizon,
    })
}
