use serde::{Deserialize, Serialize};

use super::EventRecord;
use crate::time::Timestamp;

pub const MAX_LOAD: f64 = 5.0;

/// Diurnal demand profile: base load plus morning and evening Gaussian
/// peaks (times of day in minutes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficModel {
    pub base_load: f64,
    pub base_load_noise_sigma: f64,
    /// Lag-1 correlation of the load noise (minute to minute).
    pub base_load_noise_alpha: f64,
    pub morning_peak_center_min: f64,
    pub morning_peak_sigma_min: f64,
    pub morning_peak_amp: f64,
    pub evening_peak_center_min: f64,
    pub evening_peak_sigma_min: f64,
    pub evening_peak_amp: f64,
}

impl Default for TrafficModel {
    fn default() -> Self {
        Self {
            base_load: 0.30,
            base_load_noise_sigma: 0.03,
            base_load_noise_alpha: 0.95,
            morning_peak_center_min: 8.0 * 60.0,
            morning_peak_sigma_min: 45.0,
            morning_peak_amp: 0.35,
            evening_peak_center_min: 18.5 * 60.0,
            evening_peak_sigma_min: 70.0,
            evening_peak_amp: 0.40,
        }
    }
}

impl TrafficModel {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.base_load >= 0.0
            && self.morning_peak_amp >= 0.0
            && self.evening_peak_amp >= 0.0
            && self.morning_peak_sigma_min > 0.0
            && self.evening_peak_sigma_min > 0.0
            && self.base_load_noise_sigma >= 0.0
            && (0.0..1.0).contains(&self.base_load_noise_alpha);
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidConfig("traffic model out of range".into()))
        }
    }

    /// Noise-free diurnal load at time `t`.
    pub fn diurnal(&self, t: Timestamp) -> f64 {
        let tod = t.minute_of_day() as f64;
        let bump = |center: f64, sigma: f64, amp: f64| {
            let d = tod - center;
            amp * (-(d * d) / (2.0 * sigma * sigma)).exp()
        };
        self.base_load
            + bump(
                self.morning_peak_center_min,
                self.morning_peak_sigma_min,
                self.morning_peak_amp,
            )
            + bump(
                self.evening_peak_center_min,
                self.evening_peak_sigma_min,
                self.evening_peak_amp,
            )
    }

    /// One step of the AR(1) load-noise process with stationary std
    /// `base_load_noise_sigma`.
    pub fn noise_step(&self, prev: f64, innovation: f64) -> f64 {
        let a = self.base_load_noise_alpha;
        a * prev + (1.0 - a * a).sqrt() * self.base_load_noise_sigma * innovation
    }
}

/// Largest demand multiplier among events active at `t` (1 when none).
/// Overlapping events combine by maximum.
pub fn active_multiplier(t: Timestamp, events: &[EventRecord]) -> f64 {
    events
        .iter()
        .filter(|e| e.is_active(t))
        .map(|e| e.demand_multiplier)
        .fold(1.0, f64::max)
}

/// Crowd density of the densest active event, `None` when no event is active.
pub fn crowd_density_at(t: Timestamp, events: &[EventRecord]) -> Option<f64> {
    events
        .iter()
        .filter(|e| e.is_active(t))
        .map(|e| e.crowd_density_factor)
        .reduce(f64::max)
}

/// Offered load as a fraction of capacity, clamped to `[0, 5]`.
pub fn traffic_load(t: Timestamp, model: &TrafficModel, events: &[EventRecord], noise: f64) -> f64 {
    let load = (model.diurnal(t) + noise) * active_multiplier(t, events);
    load.clamp(0.0, MAX_LOAD)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(h: u32, m: u32) -> Timestamp {
        Timestamp::from_ymd_hm(2025, 6, 14, h, m)
    }

    fn event(mult: f64, density: f64, from: Timestamp, to: Timestamp) -> EventRecord {
        EventRecord {
            event_id: "e".into(),
            start: from,
            end: to,
            demand_multiplier: mult,
            crowd_density_factor: density,
            location_tag: String::new(),
        }
    }

    #[test]
    fn morning_peak_value() {
        let m = TrafficModel::default();
        // Evening tail at 08:00: 0.40 * exp(-(630^2) / (2 * 70^2)).
        let tail = 0.40 * (-(630.0f64 * 630.0) / (2.0 * 70.0 * 70.0)).exp();
        let got = traffic_load(at(8, 0), &m, &[], 0.0);
        assert!((got - (0.65 + tail)).abs() < 1e-12);
        assert!((got - 0.65).abs() < 1e-6);
    }

    #[test]
    fn night_is_base_load() {
        let m = TrafficModel::default();
        let got = traffic_load(at(3, 0), &m, &[], 0.0);
        assert!((got - 0.30).abs() < 1e-6);
    }

    #[test]
    fn event_multiplies_evening_peak() {
        let m = TrafficModel::default();
        let ev = event(5.0, 1.0, at(18, 0), at(21, 0));
        let got = traffic_load(at(18, 30), &m, &[ev], 0.0);
        assert!((got - 3.5).abs() < 1e-6, "{got}");
    }

    #[test]
    fn overlapping_events_take_max() {
        let a = event(2.0, 0.2, at(10, 0), at(12, 0));
        let b = event(3.0, 0.9, at(11, 0), at(13, 0));
        assert_eq!(active_multiplier(at(11, 30), &[a.clone(), b.clone()]), 3.0);
        assert_eq!(crowd_density_at(at(11, 30), &[a.clone(), b]), Some(0.9));
        assert_eq!(crowd_density_at(at(14, 0), &[a]), None);
    }

    #[test]
    fn load_is_clamped() {
        let m = TrafficModel {
            base_load: 2.0,
            ..TrafficModel::default()
        };
        let ev = event(5.0, 0.0, at(0, 0), at(23, 0));
        assert_eq!(traffic_load(at(3, 0), &m, &[ev], 0.0), MAX_LOAD);
        assert_eq!(traffic_load(at(3, 0), &TrafficModel::default(), &[], -10.0), 0.0);
    }
}
