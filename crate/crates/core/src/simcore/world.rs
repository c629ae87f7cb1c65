use rand_distr::{Distribution, StandardNormal};

use super::channel::{blockage_db, compute_sinr, interference_dbm, shadow_step, weather_loss_db};
use super::traffic::{crowd_density_at, traffic_load, TrafficModel};
use super::{EventRecord, NetworkState, SimConfig, WeatherRecord};
use crate::agent::Action;
use crate::error::{Error, Result};
use crate::noise::NoiseStreams;
use crate::time::Timestamp;

/// Everything the environment needs besides the controller's actions.
#[derive(Debug, Clone)]
pub struct WorldInputs {
    pub sim: SimConfig,
    pub traffic: TrafficModel,
    pub events: Vec<EventRecord>,
    /// One record per step starting at `start`; shorter series repeat their
    /// last record, an empty series means clear sky.
    pub weather: Vec<WeatherRecord>,
    pub start: Timestamp,
    /// Outage threshold γ₁ in dB.
    pub outage_threshold_db: f64,
}

impl WorldInputs {
    pub fn weather_at(&self, t: Timestamp) -> WeatherRecord {
        if self.weather.is_empty() {
            return WeatherRecord::clear(t);
        }
        let step = i64::from(self.sim.step_minutes);
        let idx = ((t.minutes() - self.start.minutes()) / step).clamp(0, self.weather.len() as i64 - 1);
        self.weather[idx as usize].clone()
    }

    pub fn timestamp_of(&self, tick: i64) -> Timestamp {
        self.start.plus_minutes(tick * i64::from(self.sim.step_minutes))
    }
}

/// One cell advancing a tick at a time. All randomness is drawn from keyed
/// streams, so two worlds with the same inputs see identical environment
/// noise whatever actions they receive.
#[derive(Debug, Clone)]
pub struct World {
    inputs: WorldInputs,
    streams: NoiseStreams,
    tick: i64,
    tx_power_dbm: f64,
    shadow_db: f64,
    load_noise: f64,
    last: NetworkState,
}

fn normal(streams: &NoiseStreams, tick: i64, channel: &str) -> f64 {
    StandardNormal.sample(&mut streams.rng(tick, channel))
}

impl World {
    /// Builds the world and computes the pre-roll state one step before
    /// `start` at base power. That state is observable but not logged.
    pub fn new(inputs: WorldInputs) -> Result<Self> {
        inputs.sim.validate()?;
        inputs.traffic.validate()?;
        for e in &inputs.events {
            e.validate()?;
        }
        let streams = NoiseStreams::new(inputs.sim.rng_seed);
        let tick = -1;
        // Start both AR processes from their stationary distributions.
        let shadow_db = inputs.sim.shadow_sigma_db * normal(&streams, tick, "shadow");
        let load_noise = inputs.traffic.base_load_noise_sigma * normal(&streams, tick, "load");
        let tx_power_dbm = inputs.sim.base_power_dbm;
        let placeholder = NetworkState {
            timestamp: inputs.timestamp_of(tick),
            tx_power_dbm,
            load: 0.0,
            interference_dbm: 0.0,
            shadow_db,
            fast_fade_db: 0.0,
            weather_loss_db: 0.0,
            blockage_db: 0.0,
            sinr_db: 0.0,
            prb_used: 0,
            prb_total: inputs.sim.prb_total,
            event_active: false,
            outage_flag: false,
        };
        let mut world = World {
            inputs,
            streams,
            tick,
            tx_power_dbm,
            shadow_db,
            load_noise,
            last: placeholder,
        };
        world.last = world.observe(false);
        Ok(world)
    }

    pub fn inputs(&self) -> &WorldInputs {
        &self.inputs
    }

    pub fn config(&self) -> &SimConfig {
        &self.inputs.sim
    }

    pub fn last_state(&self) -> &NetworkState {
        &self.last
    }

    /// Ticks simulated so far (the pre-roll state does not count).
    pub fn ticks_done(&self) -> i64 {
        self.tick + 1
    }

    /// Applies `action` to the transmit power and advances one tick.
    pub fn step(&mut self, action: &Action) -> Result<NetworkState> {
        if !action.power_delta_db.is_finite() {
            return Err(Error::NonFiniteAction(action.power_delta_db));
        }
        let cfg = &self.inputs.sim;
        self.tx_power_dbm =
            (self.tx_power_dbm + action.power_delta_db).clamp(cfg.power_min_dbm, cfg.power_max_dbm);
        self.tick += 1;
        let z_shadow = normal(&self.streams, self.tick, "shadow");
        let z_load = normal(&self.streams, self.tick, "load");
        self.shadow_db = shadow_step(self.shadow_db, cfg, z_shadow);
        self.load_noise = self.inputs.traffic.noise_step(self.load_noise, z_load);
        self.last = self.observe(action.emergency_prb_grant);
        Ok(self.last.clone())
    }

    fn observe(&self, emergency_grant: bool) -> NetworkState {
        let inputs = &self.inputs;
        let cfg = &inputs.sim;
        let t = inputs.timestamp_of(self.tick);
        let events = &inputs.events;

        let load = traffic_load(t, &inputs.traffic, events, self.load_noise);
        let interference = interference_dbm(t, load, events, cfg, normal(&self.streams, self.tick, "interference"));
        let fast_fade = cfg.fast_fading_sigma_db * normal(&self.streams, self.tick, "fast_fade");
        let weather = weather_loss_db(&inputs.weather_at(t), cfg);
        let density = crowd_density_at(t, events);
        let event_active = density.is_some();
        let blockage = blockage_db(
            event_active,
            density.unwrap_or(0.0),
            cfg.carrier_profile,
            &mut self.streams.rng(self.tick, "blockage"),
        );

        let demand = (load.min(1.0) * f64::from(cfg.prb_total)).ceil() as u32;
        let grant = if emergency_grant { cfg.emergency_prb_block } else { 0 };
        let prb_used = (grant + demand).min(cfg.prb_total);

        let mut state = NetworkState {
            timestamp: t,
            tx_power_dbm: self.tx_power_dbm,
            load,
            interference_dbm: interference,
            shadow_db: self.shadow_db,
            fast_fade_db: fast_fade,
            weather_loss_db: weather,
            blockage_db: blockage,
            sinr_db: 0.0,
            prb_used,
            prb_total: cfg.prb_total,
            event_active,
            outage_flag: false,
        };
        state.sinr_db = compute_sinr(&state, cfg);
        state.outage_flag = state.sinr_db < inputs.outage_threshold_db;
        state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{Action, Tier};

    fn inputs(seed: u64) -> WorldInputs {
        WorldInputs {
            sim: SimConfig {
                rng_seed: seed,
                ..SimConfig::default()
            },
            traffic: TrafficModel::default(),
            events: vec![],
            weather: vec![],
            start: Timestamp::from_ymd_hm(2025, 6, 14, 0, 0),
            outage_threshold_db: 15.0,
        }
    }

    fn quiet_inputs() -> WorldInputs {
        let mut i = inputs(1);
        i.sim.shadow_sigma_db = 1e-9;
        i.sim.fast_fading_sigma_db = 0.0;
        i.sim.interference_sigma_db = 0.0;
        i.traffic.base_load_noise_sigma = 0.0;
        i.start = Timestamp::from_ymd_hm(2025, 6, 14, 3, 0);
        i
    }

    #[test]
    fn quiet_night_has_no_outage() {
        let mut w = World::new(quiet_inputs()).unwrap();
        let s = w.step(&Action::hold()).unwrap();
        assert!(!s.outage_flag);
        assert!((s.sinr_db - 25.24).abs() < 0.05, "{}", s.sinr_db);
    }

    #[test]
    fn boost_lifts_sinr_by_delta() {
        let mut a = World::new(inputs(9)).unwrap();
        let mut b = World::new(inputs(9)).unwrap();
        let sa = a.step(&Action::hold()).unwrap();
        let sb = b.step(&Action::with_delta(Tier::Risk, 3.0)).unwrap();
        assert!((sb.sinr_db - sa.sinr_db - 3.0).abs() < 1e-9);
        assert_eq!(sa.interference_dbm, sb.interference_dbm);
    }

    #[test]
    fn boost_rescues_a_marginal_step() {
        let mut i = quiet_inputs();
        // Pull the quiet-night SINR down to exactly 13 dB.
        i.sim.path_loss_db = 43.0 - 13.0 - super::super::power_sum_dbm(-107.0, -104.0);
        let mut hold = World::new(i.clone()).unwrap();
        let s = hold.step(&Action::hold()).unwrap();
        assert!((s.sinr_db - 13.0).abs() < 1e-6, "{}", s.sinr_db);
        assert!(s.outage_flag);
        let mut boost = World::new(i).unwrap();
        let s = boost.step(&Action::with_delta(Tier::Critical, 3.0)).unwrap();
        assert!((s.sinr_db - 16.0).abs() < 1e-6);
        assert!(!s.outage_flag);
    }

    #[test]
    fn identical_inputs_identical_states() {
        let mut a = World::new(inputs(42)).unwrap();
        let mut b = World::new(inputs(42)).unwrap();
        for k in 0..200 {
            let act = Action::with_delta(Tier::Optimization, ((k % 5) as f64) - 2.0);
            assert_eq!(a.step(&act).unwrap(), b.step(&act).unwrap());
        }
    }

    #[test]
    fn power_stays_clamped() {
        let mut w = World::new(inputs(3)).unwrap();
        for _ in 0..20 {
            let s = w.step(&Action::with_delta(Tier::Critical, 3.0)).unwrap();
            assert!(s.tx_power_dbm <= 49.0);
        }
        for _ in 0..40 {
            let s = w.step(&Action::with_delta(Tier::Efficiency, -3.0)).unwrap();
            assert!(s.tx_power_dbm >= 30.0);
        }
    }

    #[test]
    fn rejects_non_finite_delta() {
        let mut w = World::new(inputs(3)).unwrap();
        let mut act = Action::hold();
        act.power_delta_db = f64::NAN;
        assert!(matches!(w.step(&act), Err(Error::NonFiniteAction(_))));
    }

    #[test]
    fn emergency_grant_reserves_prbs() {
        let mut a = World::new(inputs(4)).unwrap();
        let mut b = World::new(inputs(4)).unwrap();
        let plain = a.step(&Action::hold()).unwrap();
        let mut act = Action::with_delta(Tier::Critical, 3.0);
        act.emergency_prb_grant = true;
        let granted = b.step(&act).unwrap();
        assert_eq!(granted.prb_used, (plain.prb_used + 27).min(273));
        assert!(granted.prb_used <= granted.prb_total);
    }

    #[test]
    fn removing_events_leaves_other_ticks_untouched() {
        let mut with = inputs(8);
        with.events.push(EventRecord {
            event_id: "gig".into(),
            start: with.start.plus_minutes(30),
            end: with.start.plus_minutes(60),
            demand_multiplier: 4.0,
            crowd_density_factor: 0.5,
            location_tag: String::new(),
        });
        let mut a = World::new(with).unwrap();
        let mut b = World::new(inputs(8)).unwrap();
        for k in 0..90 {
            let sa = a.step(&Action::hold()).unwrap();
            let sb = b.step(&Action::hold()).unwrap();
            if !(30..60).contains(&k) {
                assert_eq!(sa.load, sb.load);
                assert_eq!(sa.shadow_db, sb.shadow_db);
            } else {
                assert!(sa.event_active);
                assert!((sa.load - (sb.load * 4.0).min(5.0)).abs() < 1e-12);
            }
        }
    }
}
