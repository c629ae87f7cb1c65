//! Browser bindings for the cell simulator. Every export takes plain
//! numbers and returns a JSON string for the page to draw.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ricsim::agent::{
    control_loop, decide, reward, AgentConfig, Persona, PersonaName, PolicyThresholds, PowerController, ProactiveAgent,
    RewardBreakdown, StressEstimate, Tier, TraceMode,
};
use ricsim::baselines::{FixedPower, ReactiveAgent};
use ricsim::feeds::FeedHub;
use ricsim::forecaster::PersistenceForecaster;
use ricsim::kpi::{kpi_report, KpiReport};
use ricsim::noise::NoiseStreams;
use ricsim::scenario::Scenario;
use ricsim::simcore::{shadow_step, EventRecord, NetworkState, SimConfig, World};

#[derive(Serialize)]
struct Point {
    minute: usize,
    sinr_db: f64,
    tx_power_dbm: f64,
    load: f64,
    tier: Tier,
}

#[derive(Serialize)]
struct DayOut {
    controller: String,
    points: Vec<Point>,
    kpi: KpiReport,
    event_start_minute: i64,
    event_end_minute: i64,
}

fn err(e: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": e.to_string() }).to_string()
}

/// One simulated day with a single crowd event. `controller` is `fixed`,
/// `reactive` or `proactive` (persistence forecast, since no trained model
/// ships with the page).
pub fn simulate_day_json(controller: &str, seed: u64, multiplier: f64, start_hour: u32, rain_mm_per_h: f64) -> String {
    let mut s = Scenario::default();
    s.sim.rng_seed = seed;
    let day = s.scenario.start;
    let from = i64::from(start_hour.min(21)) * 60;
    s.events = vec![EventRecord {
        event_id: "demo".into(),
        start: day.plus_minutes(from),
        end: day.plus_minutes(from + 180),
        demand_multiplier: multiplier.clamp(1.0, 5.0),
        crowd_density_factor: 0.8,
        location_tag: "arena".into(),
    }];
    if rain_mm_per_h > 0.0 {
        s.weather.rain_mm_per_h = rain_mm_per_h.min(100.0);
        s.weather.rain_start_minute = from - 60;
        s.weather.rain_duration_minutes = 240;
    }
    let run = || -> ricsim::Result<DayOut> {
        let inputs = s.world_inputs()?;
        let mut ctrl: Box<dyn PowerController> = match controller {
            "fixed" => Box::new(FixedPower),
            "reactive" => Box::new(ReactiveAgent::new(s.thresholds)?),
            _ => Box::new(ProactiveAgent::new(
                Persona::named(PersonaName::StrategicCoordinator),
                s.thresholds,
                s.sim.clone(),
                AgentConfig::default(),
                Some(Box::new(PersistenceForecaster::new(10))),
                FeedHub::from_inputs(&inputs, &s.feeds),
            )?),
        };
        let mut world = World::new(inputs)?;
        let log = control_loop(&mut world, ctrl.as_mut(), &s.thresholds, s.ticks())?;
        let kpi = kpi_report(&log.controller, &log.rows, s.thresholds.gamma1_db, s.sim.step_minutes)?;
        Ok(DayOut {
            controller: log.controller,
            points: log
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| Point {
                    minute: i,
                    sinr_db: r.sinr_db,
                    tx_power_dbm: r.tx_power_dbm,
                    load: r.load,
                    tier: r.tier,
                })
                .collect(),
            kpi,
            event_start_minute: from,
            event_end_minute: from + 180,
        })
    };
    match run() {
        Ok(d) => serde_json::to_string(&d).unwrap_or_else(err),
        Err(e) => err(e),
    }
}

#[derive(Serialize)]
struct Explained {
    tier: Tier,
    power_delta_db: f64,
    emergency_prb_grant: bool,
    rationale: String,
    reward: RewardBreakdown,
}

/// Tier decision for a measured SINR and the reward if the next tick
/// lands at `sinr_after_db`.
pub fn explain_tier_json(sinr_db: f64, sinr_after_db: f64, tx_power_dbm: f64, margin_db: f64) -> String {
    let th = PolicyThresholds::default();
    let cfg = SimConfig::default();
    let before = state(sinr_db, tx_power_dbm);
    let action = decide(&before, &StressEstimate::current_only(&before, TraceMode::Reactive), &th, margin_db);
    let tx_after = (tx_power_dbm + action.power_delta_db).clamp(cfg.power_min_dbm, cfg.power_max_dbm);
    let after = state(sinr_after_db, tx_after);
    let r = reward(&before, &after, &action, &th, &Default::default());
    serde_json::to_string(&Explained {
        tier: action.tier,
        power_delta_db: action.power_delta_db,
        emergency_prb_grant: action.emergency_prb_grant,
        rationale: action.trace.action_rationale,
        reward: r,
    })
    .unwrap_or_else(err)
}

fn state(sinr_db: f64, tx: f64) -> NetworkState {
    NetworkState {
        timestamp: ricsim::Timestamp(0),
        tx_power_dbm: tx,
        load: 0.5,
        interference_dbm: -105.0,
        shadow_db: 0.0,
        fast_fade_db: 0.0,
        weather_loss_db: 0.0,
        blockage_db: 0.0,
        sinr_db,
        prb_used: 0,
        prb_total: 273,
        event_active: false,
        outage_flag: sinr_db < PolicyThresholds::default().gamma1_db,
    }
}

/// `steps` samples of the AR(1) shadowing process with the given
/// correlation and stationary spread.
pub fn shadow_trace_json(seed: u64, steps: usize, alpha: f64, sigma_db: f64) -> String {
    let cfg = SimConfig {
        shadow_alpha: alpha.clamp(0.0, 0.999),
        shadow_sigma_db: sigma_db.clamp(0.0, 20.0),
        ..SimConfig::default()
    };
    let streams = NoiseStreams::new(seed);
    let mut x = 0.0;
    let trace: Vec<f64> = (0..steps.min(20_000) as i64)
        .map(|t| {
            let z = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut streams.rng(t, "shadow"));
            x = shadow_step(x, &cfg, z);
            x
        })
        .collect();
    serde_json::to_string(&trace).unwrap_or_else(err)
}

#[wasm_bindgen]
pub fn simulate_day(controller: &str, seed: u32, multiplier: f64, start_hour: u32, rain_mm_per_h: f64) -> String {
    simulate_day_json(controller, u64::from(seed), multiplier, start_hour, rain_mm_per_h)
}

#[wasm_bindgen]
pub fn explain_tier(sinr_db: f64, sinr_after_db: f64, tx_power_dbm: f64, margin_db: f64) -> String {
    explain_tier_json(sinr_db, sinr_after_db, tx_power_dbm, margin_db)
}

#[wasm_bindgen]
pub fn shadow_trace(seed: u32, steps: u32, alpha: f64, sigma_db: f64) -> String {
    shadow_trace_json(u64::from(seed), steps as usize, alpha, sigma_db)
}
