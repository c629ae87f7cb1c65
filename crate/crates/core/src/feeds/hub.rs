use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{validate, FeedSource, NoiseProfile, SignalKind, SourceReport, ValidatedSignal};
use crate::error::Result;
use crate::noise::NoiseStreams;
use crate::simcore::{active_multiplier, crowd_density_at, EventRecord, WeatherRecord, WorldInputs};
use crate::time::Timestamp;

/// Scenario ground truth the mock sources observe.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub events: Vec<EventRecord>,
    pub weather: Vec<WeatherRecord>,
    pub start: Timestamp,
    pub step_minutes: u32,
}

impl GroundTruth {
    pub fn from_inputs(inputs: &WorldInputs) -> Self {
        Self {
            events: inputs.events.clone(),
            weather: inputs.weather.clone(),
            start: inputs.start,
            step_minutes: inputs.sim.step_minutes,
        }
    }

    pub fn weather_at(&self, t: Timestamp) -> WeatherRecord {
        if self.weather.is_empty() {
            return WeatherRecord::clear(t);
        }
        let idx = ((t.minutes() - self.start.minutes()) / i64::from(self.step_minutes))
            .clamp(0, self.weather.len() as i64 - 1);
        self.weather[idx as usize].clone()
    }

    pub fn value(&self, kind: SignalKind, t: Timestamp) -> f64 {
        match kind {
            SignalKind::EventDemand => active_multiplier(t, &self.events),
            SignalKind::CrowdFlow => crowd_density_at(t, &self.events).unwrap_or(0.0),
            SignalKind::RainRate => self.weather_at(t).rain_mm_per_h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedConfig {
    pub sources: usize,
    pub corrupt_sources: usize,
    pub honest_sigma_rel: f64,
    pub honest_sigma_abs: f64,
    pub corrupt_outlier_rate: f64,
    pub outlier_scale: f64,
}

impl Default for FeedConfig {
    fn default() -> Self {
        Self {
            sources: 5,
            corrupt_sources: 1,
            honest_sigma_rel: 0.01,
            honest_sigma_abs: 0.005,
            corrupt_outlier_rate: 0.2,
            outlier_scale: 10.0,
        }
    }
}

impl FeedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sources == 0 || self.corrupt_sources > self.sources {
            return Err(crate::Error::InvalidConfig(
                "feeds: need at least one source and corrupt_sources <= sources".into(),
            ));
        }
        Ok(())
    }

    pub fn build_sources(&self) -> Vec<FeedSource> {
        (0..self.sources)
            .map(|i| {
                let profile = if i >= self.sources - self.corrupt_sources {
                    NoiseProfile::corrupt(self.corrupt_outlier_rate, self.outlier_scale)
                } else {
                    NoiseProfile::honest(self.honest_sigma_rel, self.honest_sigma_abs)
                };
                FeedSource {
                    source_id: format!("source-{}", i + 1),
                    profile,
                }
            })
            .collect()
    }
}

/// Validated view of all feeds at one timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSet {
    pub event_demand: ValidatedSignal,
    pub rain_rate: ValidatedSignal,
    pub crowd_flow: ValidatedSignal,
    /// Humidity from the primary weather source, passed through unvalidated.
    pub humidity_pct: f64,
}

impl SignalSet {
    pub fn demand_multiplier(&self) -> f64 {
        self.event_demand.consensus_value.clamp(1.0, 5.0)
    }

    pub fn crowd_density(&self) -> f64 {
        self.crowd_flow.consensus_value.clamp(0.0, 1.0)
    }

    pub fn rain_mm_per_h(&self) -> f64 {
        self.rain_rate.consensus_value.max(0.0)
    }

    /// Whether the validated feeds indicate a crowd event.
    pub fn event_flag(&self) -> bool {
        self.demand_multiplier() > 1.05 || self.crowd_density() > 0.05
    }
}

/// Produces and caches validated signals per timestamp.
#[derive(Debug, Clone)]
pub struct FeedHub {
    sources: Vec<FeedSource>,
    truth: GroundTruth,
    streams: NoiseStreams,
    cache: BTreeMap<Timestamp, SignalSet>,
}

impl FeedHub {
    pub fn new(truth: GroundTruth, sources: Vec<FeedSource>, seed: u64) -> Self {
        Self {
            sources,
            truth,
            streams: NoiseStreams::new(seed),
            cache: BTreeMap::new(),
        }
    }

    pub fn from_inputs(inputs: &WorldInputs, cfg: &FeedConfig) -> Self {
        Self::new(GroundTruth::from_inputs(inputs), cfg.build_sources(), inputs.sim.rng_seed)
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn sources(&self) -> &[FeedSource] {
        &self.sources
    }

    /// Raw reports of every source for one kind and timestamp.
    pub fn reports_at(&self, kind: SignalKind, t: Timestamp) -> Vec<SourceReport> {
        let truth = self.truth.value(kind, t);
        self.sources.iter().map(|s| s.report(kind, t, truth, &self.streams)).collect()
    }

    fn compute(&self, t: Timestamp) -> Result<SignalSet> {
        Ok(SignalSet {
            event_demand: validate(&self.reports_at(SignalKind::EventDemand, t))?,
            rain_rate: validate(&self.reports_at(SignalKind::RainRate, t))?,
            crowd_flow: validate(&self.reports_at(SignalKind::CrowdFlow, t))?,
            humidity_pct: self.truth.weather_at(t).humidity_pct,
        })
    }

    pub fn signals_at(&mut self, t: Timestamp) -> Result<SignalSet> {
        if let Some(s) = self.cache.get(&t) {
            return Ok(s.clone());
        }
        let s = self.compute(t)?;
        self.cache.insert(t, s.clone());
        Ok(s)
    }

    /// Drops cached entries older than `t`.
    pub fn forget_before(&mut self, t: Timestamp) {
        self.cache = self.cache.split_off(&t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hub_recovers_event_despite_corrupt_source() {
        let start = Timestamp::from_ymd_hm(2025, 6, 14, 0, 0);
        let truth = GroundTruth {
            events: vec![EventRecord {
                event_id: "fest".into(),
                start: start.plus_minutes(100),
                end: start.plus_minutes(200),
                demand_multiplier: 4.0,
                crowd_density_factor: 0.7,
                location_tag: String::new(),
            }],
            weather: vec![],
            start,
            step_minutes: 1,
        };
        let cfg = FeedConfig {
            corrupt_outlier_rate: 1.0,
            ..FeedConfig::default()
        };
        let mut hub = FeedHub::new(truth, cfg.build_sources(), 3);
        for m in 0..300 {
            let t = start.plus_minutes(m);
            let s = hub.signals_at(t).unwrap();
            let inside = (100..200).contains(&m);
            assert_eq!(s.event_flag(), inside, "minute {m}");
            assert!(s.event_demand.rejected_sources.contains(&"source-5".to_string()));
            if inside {
                assert!((s.demand_multiplier() - 4.0).abs() < 0.2);
            }
        }
        hub.forget_before(start.plus_minutes(250));
        assert_eq!(hub.cache.len(), 50);
    }
}
