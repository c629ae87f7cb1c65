//! Run-log CSV (one row per tick).

use std::io::{Read, Write};

use super::NetworkState;
use crate::agent::Tier;
use crate::error::{Error, Result};
use crate::time::Timestamp;

pub const RUN_LOG_HEADER: [&str; 15] = [
    "timestamp",
    "tx_power_dbm",
    "load",
    "interference_dbm",
    "shadow_db",
    "fast_fade_db",
    "weather_loss_db",
    "blockage_db",
    "sinr_db",
    "prb_used",
    "event_active",
    "tier",
    "action_db",
    "reward_total",
    "outage_flag",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
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
    pub event_active: bool,
    pub tier: Tier,
    pub action_db: f64,
    pub reward_total: f64,
    pub outage_flag: bool,
}

impl LogRow {
    pub fn new(state: &NetworkState, tier: Tier, action_db: f64, reward_total: f64) -> Self {
        Self {
            timestamp: state.timestamp,
            tx_power_dbm: state.tx_power_dbm,
            load: state.load,
            interference_dbm: state.interference_dbm,
            shadow_db: state.shadow_db,
            fast_fade_db: state.fast_fade_db,
            weather_loss_db: state.weather_loss_db,
            blockage_db: state.blockage_db,
            sinr_db: state.sinr_db,
            prb_used: state.prb_used,
            event_active: state.event_active,
            tier,
            action_db,
            reward_total,
            outage_flag: state.outage_flag,
        }
    }

    fn fields(&self) -> [String; 15] {
        let flag = |b: bool| if b { "1" } else { "0" }.to_string();
        [
            self.timestamp.to_string(),
            self.tx_power_dbm.to_string(),
            self.load.to_string(),
            self.interference_dbm.to_string(),
            self.shadow_db.to_string(),
            self.fast_fade_db.to_string(),
            self.weather_loss_db.to_string(),
            self.blockage_db.to_string(),
            self.sinr_db.to_string(),
            self.prb_used.to_string(),
            flag(self.event_active),
            self.tier.as_str().to_string(),
            self.action_db.to_string(),
            self.reward_total.to_string(),
            flag(self.outage_flag),
        ]
    }
}

pub fn write_run_log<W: Write>(out: W, rows: &[LogRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_LOG_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_run_log<R: Read>(input: R) -> Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RUN_LOG_HEADER {
        return Err(Error::ScenarioParse(format!(
            "run log header mismatch: {}",
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |col: &str| Error::ScenarioParse(format!("run log row {}: bad {col}", line + 1));
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(RUN_LOG_HEADER[i]));
        let flag = |i: usize| match &rec[i] {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            _ => Err(bad(RUN_LOG_HEADER[i])),
        };
        rows.push(LogRow {
            timestamp: rec[0].parse()?,
            tx_power_dbm: num(1)?,
            load: num(2)?,
            interference_dbm: num(3)?,
            shadow_db: num(4)?,
            fast_fade_db: num(5)?,
            weather_loss_db: num(6)?,
            blockage_db: num(7)?,
            sinr_db: num(8)?,
            prb_used: rec[9].parse().map_err(|_| bad("prb_used"))?,
            event_active: flag(10)?,
            tier: rec[11].parse()?,
            action_db: num(12)?,
            reward_total: num(13)?,
            outage_flag: flag(14)?,
        });
    }
    Ok(rows)
}
