//! Scenario files (TOML), weather series and the seeded event-day suite.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, Persona, PersonaName, PolicyThresholds, RewardWeights};
use crate::error::{Error, Result};
use crate::feeds::FeedConfig;
use crate::simcore::{CarrierProfile, EventRecord, SimConfig, TrafficModel, WeatherRecord, WorldInputs};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioHeader {
    pub name: String,
    pub start: Timestamp,
    pub duration_minutes: u32,
}

impl Default for ScenarioHeader {
    fn default() -> Self {
        Self {
            name: "default".into(),
            start: Timestamp::from_ymd_hm(2025, 6, 14, 0, 0),
            duration_minutes: 1440,
        }
    }
}

/// Either a CSV series or a synthetic profile: constant humidity,
/// temperature and foliage with one optional rain spell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherSpec {
    /// Relative paths resolve against the scenario file's directory.
    pub csv: Option<PathBuf>,
    pub rain_mm_per_h: f64,
    /// Offset of the rain spell from the scenario start.
    pub rain_start_minute: i64,
    pub rain_duration_minutes: i64,
    pub humidity_pct: f64,
    pub temperature_c: f64,
    pub foliage_loss_db: f64,
}

impl Default for WeatherSpec {
    fn default() -> Self {
        Self {
            csv: None,
            rain_mm_per_h: 0.0,
            rain_start_minute: 0,
            rain_duration_minutes: 0,
            humidity_pct: 0.0,
            temperature_c: 15.0,
            foliage_loss_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonaSpec {
    pub name: PersonaName,
    pub threshold_margin_db: Option<f64>,
    pub forecast_weight: Option<f64>,
    pub reward_weights: Option<RewardWeights>,
}

impl Default for PersonaSpec {
    fn default() -> Self {
        Self {
            name: PersonaName::StrategicCoordinator,
            threshold_margin_db: None,
            forecast_weight: None,
            reward_weights: None,
        }
    }
}

impl PersonaSpec {
    pub fn resolve(&self) -> Persona {
        let mut p = Persona::named(self.name);
        if let Some(m) = self.threshold_margin_db {
            p.threshold_margin_db = m;
        }
        if let Some(w) = self.forecast_weight {
            p.forecast_weight = w;
        }
        if let Some(r) = self.reward_weights {
            p.reward_weights = r;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Scenario {
    pub scenario: ScenarioHeader,
    pub sim: SimConfig,
    pub traffic: TrafficModel,
    pub events: Vec<EventRecord>,
    pub weather: WeatherSpec,
    pub thresholds: PolicyThresholds,
    pub persona: PersonaSpec,
    pub feeds: FeedConfig,
    pub agent: AgentConfig,
}

/// Key layout every scenario table is checked against.
fn key_template() -> serde_json::Value {
    let mut t = serde_json::to_value(Scenario::default()).expect("plain data");
    let ev = EventRecord {
        event_id: String::new(),
        start: Timestamp(0),
        end: Timestamp(1),
        demand_multiplier: 1.0,
        crowd_density_factor: 0.0,
        location_tag: String::new(),
    };
    t["events"] = serde_json::json!([ev]);
    t["persona"]["reward_weights"] = serde_json::to_value(RewardWeights::default()).expect("plain data");
    t
}

fn collect_unknown(table: &toml::Table, template: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
    for (key, value) in table {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let Some(expected) = template.get(key) else {
            out.push(path);
            continue;
        };
        match (value, expected) {
            (toml::Value::Table(inner), serde_json::Value::Object(_)) => {
                collect_unknown(inner, expected, &path, out);
            }
            (toml::Value::Array(items), serde_json::Value::Array(proto)) => {
                if let Some(first) = proto.first() {
                    for (i, item) in items.iter().enumerate() {
                        if let toml::Value::Table(inner) = item {
                            collect_unknown(inner, first, &format!("{path}[{i}]"), out);
                        }
                    }
                }
            }
            _ => {}
        }
    }
}

/// Every key in `text` that no scenario section defines.
pub fn unknown_keys(text: &str) -> Result<Vec<String>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::ScenarioParse(e.to_string()))?;
    let mut out = Vec::new();
    collect_unknown(&table, &key_template(), "", &mut out);
    Ok(out)
}

impl Scenario {
    /// Parses TOML, listing all unknown keys in one error.
    pub fn from_toml(text: &str) -> Result<Self> {
        let unknown = unknown_keys(text)?;
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        let s: Scenario = toml::from_str(text).map_err(|e| Error::ScenarioParse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut s = Self::from_toml(&text)?;
        if let (Some(csv), Some(dir)) = (&s.weather.csv, path.parent()) {
            if csv.is_relative() {
                s.weather.csv = Some(dir.join(csv));
            }
        }
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ScenarioParse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.duration_minutes == 0 {
            return Err(Error::InvalidConfig("scenario duration_minutes must be >= 1".into()));
        }
        self.sim.validate()?;
        self.traffic.validate()?;
        for e in &self.events {
            e.validate()?;
        }
        self.thresholds.validate()?;
        self.persona.resolve().validate()?;
        self.feeds.validate()?;
        self.agent.validate()?;
        Ok(())
    }

    pub fn ticks(&self) -> usize {
        (self.scenario.duration_minutes / self.sim.step_minutes.max(1)) as usize
    }

    pub fn weather_series(&self) -> Result<Vec<WeatherRecord>> {
        let start = self.scenario.start;
        let step = i64::from(self.sim.step_minutes);
        let n = self.ticks();
        let series = match &self.weather.csv {
            Some(path) => {
                let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
                let all = read_weather_csv(file, self.sim.step_minutes)?;
                let first = all.first().map(|w| w.timestamp).ok_or(Error::Gap(start))?;
                let offset = (start.minutes() - first.minutes()) / step;
                if start < first || (offset as usize) >= all.len() {
                    return Err(Error::Gap(start));
                }
                all[offset as usize..].to_vec()
            }
            None => {
                let w = &self.weather;
                (0..n as i64)
                    .map(|k| {
                        let t = start.plus_minutes(k * step);
                        let m = k * step;
                        let raining = m >= w.rain_start_minute && m < w.rain_start_minute + w.rain_duration_minutes;
                        WeatherRecord {
                            timestamp: t,
                            rain_mm_per_h: if raining { w.rain_mm_per_h } else { 0.0 },
                            humidity_pct: if raining { w.humidity_pct.max(90.0) } else { w.humidity_pct },
                            temperature_c: w.temperature_c,
                            foliage_loss_db: w.foliage_loss_db,
                            ducting_flag: false,
                        }
                    })
                    .collect()
            }
        };
        for r in &series {
            r.validate()?;
        }
        Ok(series)
    }

    pub fn world_inputs(&self) -> Result<WorldInputs> {
        Ok(WorldInputs {
            sim: self.sim.clone(),
            traffic: self.traffic.clone(),
            events: self.events.clone(),
            weather: self.weather_series()?,
            start: self.scenario.start,
            outage_threshold_db: self.thresholds.gamma1_db,
        })
    }
}

#[derive(Debug, Deserialize)]
struct WeatherCsvRow {
    timestamp: Timestamp,
    rain_mm_per_h: f64,
    humidity_pct: f64,
    temperature_c: f64,
    foliage_loss_db: f64,
    ducting_flag: String,
}

/// Reads a weather CSV, rejecting gaps at step resolution.
pub fn read_weather_csv<R: std::io::Read>(input: R, step_minutes: u32) -> Result<Vec<WeatherRecord>> {
    let mut out: Vec<WeatherRecord> = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let r: WeatherCsvRow = row?;
        let ducting_flag = match r.ducting_flag.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(Error::ScenarioParse(format!("ducting_flag {other:?}"))),
        };
        if let Some(prev) = out.last() {
            let expected = prev.timestamp.plus_minutes(i64::from(step_minutes));
            if r.timestamp != expected {
                return Err(Error::Gap(expected));
            }
        }
        let rec = WeatherRecord {
            timestamp: r.timestamp,
            rain_mm_per_h: r.rain_mm_per_h,
            humidity_pct: r.humidity_pct,
            temperature_c: r.temperature_c,
            foliage_loss_db: r.foliage_loss_db,
            ducting_flag,
        };
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_weather_csv<W: std::io::Write>(out: W, series: &[WeatherRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "rain_mm_per_h", "humidity_pct", "temperature_c", "foliage_loss_db", "ducting_flag"])?;
    for r in series {
        w.write_record([
            r.timestamp.to_string(),
            r.rain_mm_per_h.to_string(),
            r.humidity_pct.to_string(),
            r.temperature_c.to_string(),
            r.foliage_loss_db.to_string(),
            u8::from(r.ducting_flag).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Knobs of the randomized event-day generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub days: usize,
    pub rain_probability: f64,
    pub mmwave_probability: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            days: 15,
            rain_probability: 0.3,
            mmwave_probability: 0.2,
        }
    }
}

/// A crowd event on `day` overlapping the morning (starting 07:00–08:20)
/// or evening (17:00–18:30) peak, lasting 2–4 h, with demand 1.5–5× and
/// crowd density 0.5–1.
pub fn draw_event(rng: &mut ChaCha8Rng, day: Timestamp, n: usize) -> EventRecord {
    let start_min: i64 = if rng.random::<bool>() {
        rng.random_range(420..500)
    } else {
        rng.random_range(1020..1110)
    };
    let len: i64 = rng.random_range(120..=240);
    let mult: f64 = rng.random_range(1.5..5.0);
    let density: f64 = rng.random_range(0.5..1.0);
    EventRecord {
        event_id: format!("event-{n:02}"),
        start: day.plus_minutes(start_min),
        end: day.plus_minutes(start_min + len),
        demand_multiplier: mult,
        crowd_density_factor: density,
        location_tag: if start_min < 720 { "transit-hub" } else { "arena" }.into(),
    }
}

/// One-day scenarios, each with one [`draw_event`] event.
pub fn event_day_suite(base: &Scenario, seed: u64, cfg: &SuiteConfig) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first_day = Timestamp(base.scenario.start.minutes() - base.scenario.start.minute_of_day());
    (0..cfg.days)
        .map(|i| {
            let mut s = base.clone();
            let day = first_day.plus_minutes(1440 * (4 * i as i64 + rng.random_range(0..4)));
            s.scenario.name = format!("event-day-{:02}", i + 1);
            s.scenario.start = day;
            s.scenario.duration_minutes = 1440;
            s.sim.rng_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            s.events = vec![draw_event(&mut rng, day, i + 1)];
            s.weather = WeatherSpec::default();
            if rng.random::<f64>() < cfg.rain_probability {
                s.weather.rain_mm_per_h = rng.random_range(2.0..30.0);
                s.weather.rain_start_minute = rng.random_range(0..1300);
                s.weather.rain_duration_minutes = rng.random_range(60..=240);
                s.weather.humidity_pct = 70.0;
            }
            if rng.random::<f64>() < cfg.mmwave_probability {
                s.sim.carrier_profile = CarrierProfile::MmWave;
                s.weather.foliage_loss_db = 2.0;
            } else {
                s.sim.carrier_profile = CarrierProfile::Sub6;
            }
            s
        })
        .collect()
}
