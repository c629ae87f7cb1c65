//! Interference, fading, weather and blockage terms and the SINR law.

use rand::Rng;

use super::{CarrierProfile, EventRecord, NetworkState, SimConfig, WeatherRecord};
use crate::simcore::traffic::crowd_density_at;
use crate::time::Timestamp;

/// Sentinel for "no power".
pub const NEG_INF_DBM: f64 = f64::NEG_INFINITY;

const TRAFFIC_INTERFERENCE_MAX_DB: f64 = 10.0;
const INDUSTRIAL_INTERFERENCE_DB: f64 = 3.0;
const CROWD_INTERFERENCE_MIN_DB: f64 = 2.0;
const CROWD_INTERFERENCE_SPAN_DB: f64 = 6.0;
const BUSINESS_HOURS: std::ops::Range<i64> = 9 * 60..17 * 60;

const HEAVY_RAIN_MM_PER_H: f64 = 50.0;
const MMWAVE_RAIN_DB_PER_KM: f64 = 15.0;
const SUB6_RAIN_DB_PER_KM: f64 = 1.0;
const HUMIDITY_MAX_DB_PER_KM: f64 = 2.0;
const OXYGEN_BAND_DB: f64 = 1.0;

const BLOCKAGE_RATE_PER_DENSITY: f64 = 0.1;
const BLOCKAGE_MIN_DB: f64 = 10.0;
const BLOCKAGE_MAX_DB: f64 = 20.0;

/// `10·log10(10^(a/10) + 10^(b/10))`, evaluated around the larger term.
pub fn power_sum_dbm(a_dbm: f64, b_dbm: f64) -> f64 {
    let (hi, lo) = if a_dbm >= b_dbm { (a_dbm, b_dbm) } else { (b_dbm, a_dbm) };
    if lo == NEG_INF_DBM {
        return hi;
    }
    hi + 10.0 * (1.0 + 10f64.powf((lo - hi) / 10.0)).log10()
}

/// Deterministic part of the interference model; `crowd_density` is
/// `Some` only while an event is active.
pub fn interference_mean_dbm(t: Timestamp, load: f64, crowd_density: Option<f64>, cfg: &SimConfig) -> f64 {
    let mut dbm = cfg.interference_base_dbm + TRAFFIC_INTERFERENCE_MAX_DB * load.clamp(0.0, 1.0);
    if BUSINESS_HOURS.contains(&t.minute_of_day()) {
        dbm += INDUSTRIAL_INTERFERENCE_DB;
    }
    if let Some(rho) = crowd_density {
        dbm += CROWD_INTERFERENCE_MIN_DB + CROWD_INTERFERENCE_SPAN_DB * rho.clamp(0.0, 1.0);
    }
    dbm
}

/// Interference power at `t`; `z` is the standard-normal draw for the
/// random component.
pub fn interference_dbm(t: Timestamp, load: f64, events: &[EventRecord], cfg: &SimConfig, z: f64) -> f64 {
    interference_mean_dbm(t, load, crowd_density_at(t, events), cfg) + cfg.interference_sigma_db * z
}

/// AR(1) shadow-fading update with stationary std `shadow_sigma_db`.
pub fn shadow_step(prev_shadow_db: f64, cfg: &SimConfig, z: f64) -> f64 {
    let a = cfg.shadow_alpha;
    a * prev_shadow_db + (1.0 - a * a).sqrt() * cfg.shadow_sigma_db * z
}

pub fn weather_loss_db(w: &WeatherRecord, cfg: &SimConfig) -> f64 {
    let rain_frac = (w.rain_mm_per_h / HEAVY_RAIN_MM_PER_H).clamp(0.0, 1.0);
    match cfg.carrier_profile {
        CarrierProfile::Sub6 => SUB6_RAIN_DB_PER_KM * rain_frac * cfg.cell_path_km,
        CarrierProfile::MmWave => {
            let per_km = MMWAVE_RAIN_DB_PER_KM * rain_frac
                + HUMIDITY_MAX_DB_PER_KM * (w.humidity_pct / 100.0).clamp(0.0, 1.0);
            let oxygen = if cfg.oxygen_band { OXYGEN_BAND_DB } else { 0.0 };
            per_km * cfg.cell_path_km + w.foliage_loss_db + oxygen
        }
    }
}

/// Human-body blockage, mmWave only and only during crowd events.
pub fn blockage_db<R: Rng + ?Sized>(
    event_active: bool,
    crowd_density_factor: f64,
    carrier: CarrierProfile,
    rng: &mut R,
) -> f64 {
    if carrier != CarrierProfile::MmWave || !event_active {
        return 0.0;
    }
    let p = (BLOCKAGE_RATE_PER_DENSITY * crowd_density_factor).clamp(0.0, 1.0);
    if rng.random::<f64>() < p {
        rng.random_range(BLOCKAGE_MIN_DB..=BLOCKAGE_MAX_DB)
    } else {
        0.0
    }
}

/// SINR implied by the other fields of `state` (its `sinr_db` is ignored).
pub fn compute_sinr(state: &NetworkState, cfg: &SimConfig) -> f64 {
    state.tx_power_dbm
        - cfg.path_loss_db
        - state.shadow_db
        - state.fast_fade_db
        - state.weather_loss_db
        - state.blockage_db
        - power_sum_dbm(state.interference_dbm, cfg.noise_floor_dbm)
}
