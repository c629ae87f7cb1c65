//! Mock external-intelligence feeds and the multi-source validator.
//!
//! Sources stand in for event, weather and transit APIs. Each reports the
//! scenario ground truth through its own bias/noise profile; some sources
//! can be configured as corrupt. Reports for one `(kind, timestamp)` are
//! cross-checked by [`validate`] before anything downstream sees them.

mod hub;
mod records;
mod source;
mod validator;

pub use hub::{FeedConfig, FeedHub, GroundTruth, SignalSet};
pub use records::{read_reports, write_reports};
pub use source::{generate_feed, FeedSource, NoiseProfile};
pub use validator::{validate, ValidatedSignal};

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// Demand multiplier of scheduled crowd events (1 when none).
    EventDemand,
    /// Precipitation rate in mm/h.
    RainRate,
    /// Crowd density factor in [0, 1] (0 when no gathering).
    CrowdFlow,
}

impl SignalKind {
    pub const ALL: [SignalKind; 3] = [SignalKind::EventDemand, SignalKind::RainRate, SignalKind::CrowdFlow];

    /// Plausible span of the signal; outliers are scaled against it.
    pub fn range(self) -> f64 {
        match self {
            SignalKind::EventDemand => 4.0,
            SignalKind::RainRate => 50.0,
            SignalKind::CrowdFlow => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::EventDemand => "event_demand",
            SignalKind::RainRate => "rain_rate",
            SignalKind::CrowdFlow => "crowd_flow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub source_id: String,
    pub kind: SignalKind,
    pub timestamp: Timestamp,
    pub value: f64,
    pub reliability_prior: f64,
}
