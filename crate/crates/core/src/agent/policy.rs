use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{classify_tier, PolicyThresholds, Tier};
use crate::feeds::SignalSet;
use crate::forecaster::ForecastResult;
use crate::simcore::{interference_mean_dbm, power_sum_dbm, weather_loss_db, NetworkState, SimConfig, WeatherRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TraceMode {
    #[default]
    #[serde(rename = "fixed")]
    Fixed,
    #[serde(rename = "reactive")]
    Reactive,
    #[serde(rename = "proactive")]
    Proactive,
    #[serde(rename = "reactive-fallback")]
    ReactiveFallback,
}

impl TraceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceMode::Fixed => "fixed",
            TraceMode::Reactive => "reactive",
            TraceMode::Proactive => "proactive",
            TraceMode::ReactiveFallback => "reactive-fallback",
        }
    }
}

/// Templated Thought/Action record attached to every decision.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReactTrace {
    pub thought: String,
    pub action_rationale: String,
    /// sha256 (hex) of the canonical JSON of everything the decision read.
    pub inputs_digest: String,
    pub mode: TraceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub power_delta_db: f64,
    pub emergency_prb_grant: bool,
    pub tier: Tier,
    pub trace: ReactTrace,
}

impl Action {
    pub fn hold() -> Self {
        Self::with_delta(Tier::Hold, 0.0)
    }

    pub fn with_delta(tier: Tier, power_delta_db: f64) -> Self {
        Self {
            power_delta_db,
            emergency_prb_grant: false,
            tier,
            trace: ReactTrace::default(),
        }
    }
}

/// Validated feeds seen by one decision: the current step and the steps
/// ahead (`ahead[k - 1]` is `k` steps after the state).
#[derive(Debug, Clone, Default, Serialize)]
pub struct FeedView {
    pub now: Option<SignalSet>,
    pub ahead: Vec<SignalSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressEstimate {
    pub current_db: f64,
    /// Current SINR re-evaluated under the worst projected conditions.
    pub projected_db: f64,
    pub effective_db: f64,
    /// Forecast peak (load, steps ahead) when a forecast was used.
    pub peak: Option<(f64, usize)>,
    pub mode: TraceMode,
    pub inputs_digest: String,
}

impl StressEstimate {
    /// Stress from the measurement alone.
    pub fn current_only(state: &NetworkState, mode: TraceMode) -> Self {
        Self {
            current_db: state.sinr_db,
            projected_db: state.sinr_db,
            effective_db: state.sinr_db,
            peak: None,
            mode,
            inputs_digest: digest(&(state, mode)),
        }
    }
}

pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    // Serializing plain data into a Vec cannot fail.
    let bytes = serde_json::to_vec(value).expect("serializable inputs");
    hex::encode(Sha256::digest(&bytes))
}

fn rain_loss_db(rain_mm_per_h: f64, cfg: &SimConfig) -> f64 {
    let mut w = WeatherRecord::clear(crate::time::Timestamp(0));
    w.rain_mm_per_h = rain_mm_per_h;
    weather_loss_db(&w, cfg)
}

/// Blends the current SINR with the SINR projected at the worst point of
/// the forecast horizon.
///
/// The projection re-evaluates the mean interference model at each
/// forecast step, using the larger of the forecast load and the current
/// load rescaled by the validated event demand, and adds any extra rain
/// loss announced by the feeds. Without a usable forecast the current
/// SINR is returned and the mode is `ReactiveFallback`.
pub fn effective_stress_sinr(
    state: &NetworkState,
    forecast: Option<&ForecastResult>,
    feeds: &FeedView,
    forecast_weight: f64,
    horizon: usize,
    cfg: &SimConfig,
) -> StressEstimate {
    let step = i64::from(cfg.step_minutes);
    let ahead: Vec<(usize, f64)> = match forecast {
        Some(f) => (1..=horizon)
            .filter_map(|k| {
                let t = state.timestamp.plus_minutes(k as i64 * step);
                f.value_at(t).map(|v| (k, v))
            })
            .collect(),
        None => Vec::new(),
    };
    if ahead.is_empty() {
        let mut s = StressEstimate::current_only(state, TraceMode::ReactiveFallback);
        s.inputs_digest = digest(&(state, feeds, "no-forecast"));
        return s;
    }

    let crowd = |s: &SignalSet| s.event_flag().then(|| s.crowd_density());
    let m_now = feeds.now.as_ref().map_or(1.0, SignalSet::demand_multiplier);
    let crowd_now = feeds.now.as_ref().and_then(crowd);
    let rain_now = feeds.now.as_ref().map_or(0.0, SignalSet::rain_mm_per_h);
    let base = power_sum_dbm(
        interference_mean_dbm(state.timestamp, state.load, crowd_now, cfg),
        cfg.noise_floor_dbm,
    );
    let rain_base = rain_loss_db(rain_now, cfg);
    let unit_load = state.load / m_now.max(1.0);

    let mut worst = 0.0f64;
    let mut peak = (state.load, 0usize);
    for &(k, predicted) in &ahead {
        let (m_k, crowd_k, rain_k) = match feeds.ahead.get(k - 1) {
            Some(s) => (s.demand_multiplier(), crowd(s), s.rain_mm_per_h()),
            None => (m_now, crowd_now, rain_now),
        };
        let load_k = predicted.max(unit_load * m_k);
        let t_k = state.timestamp.plus_minutes(k as i64 * step);
        let rise = power_sum_dbm(interference_mean_dbm(t_k, load_k, crowd_k, cfg), cfg.noise_floor_dbm) - base
            + (rain_loss_db(rain_k, cfg) - rain_base);
        if rise > worst {
            worst = rise;
        }
        if load_k > peak.0 {
            peak = (load_k, k);
        }
    }
    let projected = state.sinr_db - worst;
    let w = forecast_weight.clamp(0.0, 1.0);
    let used: Vec<f64> = ahead.iter().map(|&(_, v)| v).collect();
    StressEstimate {
        current_db: state.sinr_db,
        projected_db: projected,
        effective_db: (1.0 - w) * state.sinr_db + w * projected,
        peak: Some(peak),
        mode: TraceMode::Proactive,
        inputs_digest: digest(&(state, &used, feeds, w)),
    }
}

/// Smallest whole-dB step in `1..=max` with `from + d >= target`, else `max`.
fn smallest_lift(from: f64, target: f64, max: i32) -> i32 {
    (1..=max).find(|&d| from + f64::from(d) >= target).unwrap_or(max)
}

/// Tier policy on the stress estimate; thresholds are shifted by the
/// persona margin first. Always returns a tier-legal action.
pub fn decide(state: &NetworkState, stress: &StressEstimate, thresholds: &PolicyThresholds, margin_db: f64) -> Action {
    let g = thresholds.shifted(margin_db);
    let eff = stress.effective_db;
    let band = classify_tier(eff, &g);
    let (tier, delta, rationale) = match band {
        Tier::Critical => (
            Tier::Critical,
            3,
            format!("below {:.1} dB: emergency boost +3 dB and PRB grant", g.gamma1_db),
        ),
        Tier::Risk => {
            let d = smallest_lift(eff, g.gamma2_db, 3);
            (Tier::Risk, d, format!("risk band: +{d} dB toward {:.1} dB", g.gamma2_db))
        }
        Tier::Optimization if stress.projected_db < g.gamma2_db => {
            let d = smallest_lift(stress.projected_db, g.gamma2_db, 2);
            (
                Tier::Optimization,
                d,
                format!("projected {:.2} dB under {:.1} dB: +{d} dB", stress.projected_db, g.gamma2_db),
            )
        }
        Tier::Optimization => (Tier::Hold, 0, "optimization band, no change needed".to_string()),
        _ => {
            let d = if eff - 3.0 >= g.gamma4_db { -3 } else { -1 };
            (Tier::Efficiency, d, format!("efficiency band: {d} dB"))
        }
    };

    let forecast_note = match stress.peak {
        Some((load, k)) => format!(
            "forecast peak load {load:.2} in {k} steps, projected {:.2} dB",
            stress.projected_db
        ),
        None => "no forecast".to_string(),
    };
    let thought = format!(
        "{} sinr {:.2} dB, load {:.2}, tx {:.1} dBm; {forecast_note}; effective {eff:.2} dB -> {}",
        state.timestamp, state.sinr_db, state.load, state.tx_power_dbm, band
    );
    Action {
        power_delta_db: f64::from(delta),
        emergency_prb_grant: tier == Tier::Critical,
        tier,
        trace: ReactTrace {
            thought,
            action_rationale: rationale,
            inputs_digest: stress.inputs_digest.clone(),
            mode: stress.mode,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeds::ValidatedSignal;
    use crate::feeds::SignalKind;
    use crate::time::Timestamp;
    use proptest::prelude::*;

    fn lin(dbm: f64) -> f64 {
        10f64.powf(dbm / 10.0)
    }

    fn state_at(t: Timestamp, sinr: f64, load: f64) -> NetworkState {
        NetworkState {
            timestamp: t,
            tx_power_dbm: 43.0,
            load,
            interference_dbm: -107.0,
            shadow_db: 0.0,
            fast_fade_db: 0.0,
            weather_loss_db: 0.0,
            blockage_db: 0.0,
            sinr_db: sinr,
            prb_used: 0,
            prb_total: 273,
            event_active: false,
            outage_flag: sinr < 15.0,
        }
    }

    fn state(sinr: f64) -> NetworkState {
        state_at(Timestamp::from_ymd_hm(2025, 6, 14, 3, 0), sinr, 0.3)
    }

    fn flat_forecast(start: Timestamp, loads: Vec<f64>) -> ForecastResult {
        ForecastResult {
            start,
            step_minutes: 1,
            horizon_steps: loads.len(),
            ci_low: loads.clone(),
            ci_high: loads.clone(),
            predicted_load: loads,
            model_version: "test".into(),
        }
    }

    fn signal(kind: SignalKind, t: Timestamp, v: f64) -> ValidatedSignal {
        ValidatedSignal {
            kind,
            timestamp: t,
            consensus_value: v,
            confidence: 1.0,
            rejected_sources: vec![],
            low_evidence: false,
        }
    }

    fn signals(t: Timestamp, mult: f64, crowd: f64) -> SignalSet {
        SignalSet {
            event_demand: signal(SignalKind::EventDemand, t, mult),
            rain_rate: signal(SignalKind::RainRate, t, 0.0),
            crowd_flow: signal(SignalKind::CrowdFlow, t, crowd),
            humidity_pct: 0.0,
        }
    }

    #[test]
    fn zero_weight_is_reactive() {
        let s = state(21.3);
        let t1 = s.timestamp.plus_minutes(1);
        let f = flat_forecast(t1, vec![1.0; 30]);
        let e = effective_stress_sinr(&s, Some(&f), &FeedView::default(), 0.0, 30, &SimConfig::default());
        assert_eq!(e.effective_db, 21.3);
        assert!(e.projected_db < 21.3);
    }

    #[test]
    fn full_weight_tracks_interference_rise() {
        // 03:00, load 0.3 -> forecast load 1.0: the mean interference
        // climbs 7 dB; oracle in the linear domain.
        let s = state(25.0);
        let f = flat_forecast(s.timestamp.plus_minutes(1), vec![1.0; 30]);
        let e = effective_stress_sinr(&s, Some(&f), &FeedView::default(), 1.0, 30, &SimConfig::default());
        let before = 10.0 * (lin(-107.0) + lin(-104.0)).log10();
        let after = 10.0 * (lin(-100.0) + lin(-104.0)).log10();
        assert!((e.effective_db - (25.0 - (after - before))).abs() < 1e-9);
    }

    #[test]
    fn validated_event_scales_load() {
        let s = state_at(Timestamp::from_ymd_hm(2025, 6, 14, 3, 0), 25.0, 0.15);
        let f = flat_forecast(s.timestamp.plus_minutes(1), vec![0.15; 10]);
        let mut feeds = FeedView {
            now: Some(signals(s.timestamp, 1.0, 0.0)),
            ahead: vec![],
        };
        for k in 1..=10 {
            let t = s.timestamp.plus_minutes(k);
            feeds.ahead.push(if k >= 5 { signals(t, 5.0, 0.0) } else { signals(t, 1.0, 0.0) });
        }
        let e = effective_stress_sinr(&s, Some(&f), &feeds, 1.0, 10, &SimConfig::default());
        // load 0.15·5 = 0.75 plus the +2 dB floor of an active crowd event.
        let before = 10.0 * (lin(-110.0 + 1.5) + lin(-104.0)).log10();
        let after = 10.0 * (lin(-110.0 + 7.5 + 2.0) + lin(-104.0)).log10();
        assert!((e.projected_db - (25.0 - (after - before))).abs() < 1e-9);
        assert_eq!(e.peak, Some((0.75, 5)));
    }

    #[test]
    fn missing_forecast_falls_back() {
        let s = state(13.0);
        let e = effective_stress_sinr(&s, None, &FeedView::default(), 0.8, 30, &SimConfig::default());
        assert_eq!(e.mode, TraceMode::ReactiveFallback);
        assert_eq!(e.effective_db, 13.0);
    }

    #[test]
    fn stale_forecast_outside_window_falls_back() {
        let s = state(22.0);
        let f = flat_forecast(s.timestamp.plus_minutes(-100), vec![0.3; 30]);
        let e = effective_stress_sinr(&s, Some(&f), &FeedView::default(), 0.8, 30, &SimConfig::default());
        assert_eq!(e.mode, TraceMode::ReactiveFallback);
    }

    fn act(eff: f64) -> Action {
        let s = state(eff);
        decide(&s, &StressEstimate::current_only(&s, TraceMode::Reactive), &PolicyThresholds::default(), 0.0)
    }

    #[test]
    fn decide_examples() {
        let a = act(13.0);
        assert_eq!((a.tier, a.power_delta_db, a.emergency_prb_grant), (Tier::Critical, 3.0, true));
        let a = act(19.5);
        assert_eq!((a.tier, a.power_delta_db), (Tier::Hold, 0.0));
        let a = act(27.0);
        assert_eq!((a.tier, a.power_delta_db), (Tier::Efficiency, -1.0));
        let a = act(28.0);
        assert_eq!(a.power_delta_db, -3.0);
        let a = act(16.5);
        assert_eq!((a.tier, a.power_delta_db), (Tier::Risk, 2.0));
        let a = act(15.0);
        assert_eq!(a.power_delta_db, 3.0);
        assert!(!a.trace.thought.is_empty());
    }

    #[test]
    fn optimization_lifts_a_low_projection() {
        let s = state(19.0);
        let mut stress = StressEstimate::current_only(&s, TraceMode::Proactive);
        stress.projected_db = 16.5;
        let a = decide(&s, &stress, &PolicyThresholds::default(), 0.0);
        assert_eq!((a.tier, a.power_delta_db), (Tier::Optimization, 2.0));
    }

    #[test]
    fn margin_shifts_bands() {
        let s = state(16.0);
        let a = decide(
            &s,
            &StressEstimate::current_only(&s, TraceMode::Proactive),
            &PolicyThresholds::default(),
            2.0,
        );
        assert_eq!(a.tier, Tier::Critical);
    }

    proptest! {
        #[test]
        fn every_decision_is_legal(
            current in -20.0f64..45.0,
            drop in 0.0f64..15.0,
            w in 0.0f64..=1.0,
            margin in -3.0f64..3.0,
        ) {
            let s = state(current);
            let mut stress = StressEstimate::current_only(&s, TraceMode::Proactive);
            stress.projected_db = current - drop;
            stress.effective_db = (1.0 - w) * current + w * stress.projected_db;
            let a = decide(&s, &stress, &PolicyThresholds::default(), margin);
            prop_assert!(a.tier.is_legal(a.power_delta_db, a.emergency_prb_grant));
        }

        #[test]
        fn projection_never_exceeds_current(
            load in 0.0f64..5.0,
            preds in proptest::collection::vec(0.0f64..5.0, 1..40),
            minute in 0i64..1440,
        ) {
            let t = Timestamp::from_ymd_hm(2025, 6, 14, 0, 0).plus_minutes(minute);
            let s = state_at(t, 20.0, load);
            let f = flat_forecast(t.plus_minutes(1), preds);
            let e = effective_stress_sinr(&s, Some(&f), &FeedView::default(), 0.8, 30, &SimConfig::default());
            prop_assert!(e.projected_db <= e.current_db);
            prop_assert!(e.effective_db <= e.current_db && e.effective_db >= e.projected_db);
        }
    }
}
