//! Minute-resolution timestamps.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub const MINUTES_PER_DAY: i64 = 1440;
const FORMAT: &str = "%Y-%m-%dT%H:%M";

/// Minutes since 1970-01-01T00:00 (no time zone).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_ymd_hm(year: i32, month: u32, day: u32, hour: u32, minute: u32) -> Self {
        let date = chrono::NaiveDate::from_ymd_opt(year, month, day).expect("valid date");
        let dt = date.and_hms_opt(hour, minute, 0).expect("valid time");
        Self::from_naive(dt)
    }

    fn from_naive(dt: NaiveDateTime) -> Self {
        Timestamp(dt.and_utc().timestamp().div_euclid(60))
    }

    pub fn minutes(self) -> i64 {
        self.0
    }

    pub fn plus_minutes(self, minutes: i64) -> Self {
        Timestamp(self.0 + minutes)
    }

    /// Minute of the day in `0..1440`.
    pub fn minute_of_day(self) -> i64 {
        self.0.rem_euclid(MINUTES_PER_DAY)
    }

    /// Day of week with Monday = 0.
    pub fn day_of_week(self) -> usize {
        // 1970-01-01 was a Thursday.
        (self.0.div_euclid(MINUTES_PER_DAY) + 3).rem_euclid(7) as usize
    }

    fn to_naive(self) -> NaiveDateTime {
        DateTime::from_timestamp(self.0 * 60, 0)
            .expect("timestamp in range")
            .naive_utc()
    }

    pub fn hour(self) -> u32 {
        self.to_naive().hour()
    }

    pub fn date_string(self) -> String {
        let d = self.to_naive();
        format!("{:04}-{:02}-{:02}", d.year(), d.month(), d.day())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_naive().format(FORMAT))
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        NaiveDateTime::parse_from_str(s, FORMAT)
            .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
            .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M"))
            .map(Self::from_naive)
            .map_err(|e| Error::ScenarioParse(format!("bad timestamp {s:?}: {e}")))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let t = Timestamp::from_ymd_hm(2025, 6, 14, 18, 30);
        assert_eq!(t.to_string(), "2025-06-14T18:30");
        assert_eq!("2025-06-14T18:30".parse::<Timestamp>().unwrap(), t);
        assert_eq!(t.minute_of_day(), 18 * 60 + 30);
    }

    #[test]
    fn weekday_is_monday_based() {
        // 2025-06-16 is a Monday.
        assert_eq!(Timestamp::from_ymd_hm(2025, 6, 16, 0, 0).day_of_week(), 0);
        assert_eq!(Timestamp::from_ymd_hm(2025, 6, 15, 23, 59).day_of_week(), 6);
    }

    #[test]
    fn rejects_garbage() {
        assert!("yesterday".parse::<Timestamp>().is_err());
    }
}
