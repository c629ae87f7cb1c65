use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::feeds::SignalSet;
use crate::simcore::{active_multiplier, crowd_density_at, EventRecord, WeatherRecord};
use crate::time::{Timestamp, MINUTES_PER_DAY};

/// Width of one LSTM input row: load plus the context of the next step.
pub const INPUT_DIM: usize = 14;

/// Context known about one step ahead of time (calendar, scheduled
/// events, weather).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepContext {
    pub timestamp: Timestamp,
    pub event_flag: bool,
    /// (multiplier − 1) / 4, in [0, 1].
    pub event_magnitude: f64,
    pub rain_norm: f64,
    pub humidity_norm: f64,
}

fn norm_multiplier(m: f64) -> f64 {
    ((m - 1.0) / 4.0).clamp(0.0, 1.0)
}

impl StepContext {
    pub fn quiet(timestamp: Timestamp) -> Self {
        Self {
            timestamp,
            event_flag: false,
            event_magnitude: 0.0,
            rain_norm: 0.0,
            humidity_norm: 0.0,
        }
    }

    pub fn from_signals(timestamp: Timestamp, s: &SignalSet) -> Self {
        Self {
            timestamp,
            event_flag: s.event_flag(),
            event_magnitude: norm_multiplier(s.demand_multiplier()),
            rain_norm: (s.rain_mm_per_h() / 50.0).clamp(0.0, 1.0),
            humidity_norm: (s.humidity_pct / 100.0).clamp(0.0, 1.0),
        }
    }

    pub fn from_truth(timestamp: Timestamp, events: &[EventRecord], weather: &WeatherRecord) -> Self {
        Self {
            timestamp,
            event_flag: crowd_density_at(timestamp, events).is_some(),
            event_magnitude: norm_multiplier(active_multiplier(timestamp, events)),
            rain_norm: (weather.rain_mm_per_h / 50.0).clamp(0.0, 1.0),
            humidity_norm: (weather.humidity_pct / 100.0).clamp(0.0, 1.0),
        }
    }
}

/// `[load, sin tod, cos tod, weekday one-hot x7, event flag, magnitude,
/// rain, humidity]`, where the context describes the step being predicted.
pub fn input_row(load: f64, next: &StepContext) -> [f64; INPUT_DIM] {
    let phase = TAU * next.timestamp.minute_of_day() as f64 / MINUTES_PER_DAY as f64;
    let mut row = [0.0; INPUT_DIM];
    row[0] = load;
    row[1] = phase.sin();
    row[2] = phase.cos();
    row[3 + next.timestamp.day_of_week()] = 1.0;
    row[10] = if next.event_flag { 1.0 } else { 0.0 };
    row[11] = next.event_magnitude;
    row[12] = next.rain_norm;
    row[13] = next.humidity_norm;
    row
}
