//! Minute-resolution simulation of one 5G cell.
//!
//! The SINR law is additive in dB:
//! `sinr = tx - path_loss - shadow - fast_fade - weather - blockage - (I ⊕ N)`
//! where `⊕` is a linear-domain power sum.

mod channel;
mod runlog;
mod traffic;
mod world;

pub use channel::{
    blockage_db, compute_sinr, interference_dbm, interference_mean_dbm, power_sum_dbm,
    shadow_step, weather_loss_db, NEG_INF_DBM,
};
pub use runlog::{read_run_log, write_run_log, LogRow, RUN_LOG_HEADER};
pub use traffic::{active_multiplier, crowd_density_at, traffic_load, TrafficModel};
pub use world::{World, WorldInputs};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CarrierProfile {
    #[default]
    Sub6,
    #[serde(alias = "mm_wave")]
    MmWave,
}

impl CarrierProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            CarrierProfile::Sub6 => "sub6",
            CarrierProfile::MmWave => "mmwave",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub base_power_dbm: f64,
    pub path_loss_db: f64,
    pub noise_floor_dbm: f64,
    pub interference_base_dbm: f64,
    pub interference_sigma_db: f64,
    pub shadow_sigma_db: f64,
    pub shadow_alpha: f64,
    pub fast_fading_sigma_db: f64,
    pub carrier_profile: CarrierProfile,
    /// 60 GHz class carrier (oxygen absorption band).
    pub oxygen_band: bool,
    pub cell_path_km: f64,
    pub power_min_dbm: f64,
    pub power_max_dbm: f64,
    pub step_minutes: u32,
    pub prb_total: u32,
    /// PRBs reserved ahead of demand when an emergency grant is requested.
    pub emergency_prb_block: u32,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            base_power_dbm: 43.0,
            path_loss_db: 120.0,
            noise_floor_dbm: -104.0,
            interference_base_dbm: -110.0,
            interference_sigma_db: 2.0,
            shadow_sigma_db: 4.0,
            shadow_alpha: 0.98,
            fast_fading_sigma_db: 1.5,
            carrier_profile: CarrierProfile::Sub6,
            oxygen_band: false,
            cell_path_km: 0.5,
            power_min_dbm: 30.0,
            power_max_dbm: 49.0,
            step_minutes: 1,
            prb_total: 273,
            emergency_prb_block: 27,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.power_min_dbm <= self.base_power_dbm && self.base_power_dbm <= self.power_max_dbm) {
            return bad("power_min_dbm <= base_power_dbm <= power_max_dbm violated");
        }
        if !(0.0..1.0).contains(&self.shadow_alpha) {
            return bad("shadow_alpha must lie in [0, 1)");
        }
        if !(self.shadow_sigma_db > 0.0) {
            return bad("shadow_sigma_db must be positive");
        }
        if self.step_minutes < 1 {
            return bad("step_minutes must be at least 1");
        }
        if self.fast_fading_sigma_db < 0.0 || self.interference_sigma_db < 0.0 {
            return bad("noise sigmas must be non-negative");
        }
        if self.cell_path_km < 0.0 {
            return bad("cell_path_km must be non-negative");
        }
        if self.emergency_prb_block > self.prb_total {
            return bad("emergency_prb_block exceeds prb_total");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub demand_multiplier: f64,
    pub crowd_density_factor: f64,
    #[serde(default)]
    pub location_tag: String,
}

impl EventRecord {
    pub fn is_active(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    pub fn validate(&self) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::InvalidConfig(format!(
                "event {}: start must precede end",
                self.event_id
            )));
        }
        if !(1.0..=5.0).contains(&self.demand_multiplier) {
            return Err(Error::InvalidConfig(format!(
                "event {}: demand_multiplier {} outside [1, 5]",
                self.event_id, self.demand_multiplier
            )));
        }
        if !(0.0..=1.0).contains(&self.crowd_density_factor) {
            return Err(Error::InvalidConfig(format!(
                "event {}: crowd_density_factor {} outside [0, 1]",
                self.event_id, self.crowd_density_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub timestamp: Timestamp,
    pub rain_mm_per_h: f64,
    pub humidity_pct: f64,
    pub temperature_c: f64,
    pub foliage_loss_db: f64,
    pub ducting_flag: bool,
}

impl WeatherRecord {
    pub fn clear(timestamp: Timestamp) -> Self {
        Self {
            timestamp,
            rain_mm_per_h: 0.0,
            humidity_pct: 0.0,
            temperature_c: 15.0,
            foliage_loss_db: 0.0,
            ducting_flag: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rain_mm_per_h >= 0.0
            && (0.0..=100.0).contains(&self.humidity_pct)
            && self.temperature_c.is_finite()
            && (0.0..=8.0).contains(&self.foliage_loss_db);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "weather record at {} out of range",
                self.timestamp
            )))
        }
    }
}

/// Full per-tick snapshot of the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub timestamp: Timestamp,
    pub tx_power_dbm: f64,
    pub load: f64,
    pub interference_dbm: f64,
    pub shadow_db: f64,
    pub fast_fade_db: f64,
    pub weather_loss_db: f64,
    pub blockage_db: f64,
    pub sinr_db: f64,
    pub prb_used: u32,
    pub prb_total: u32,
    pub event_active: bool,
    pub outage_flag: bool,
}
