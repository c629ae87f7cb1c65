//! Deterministic simulator of a stressed urban 5G cell, a proactive tiered
//! power-control agent with an LSTM load forecaster, mock external feeds,
//! baseline controllers and the KPI/reporting tooling around them.

pub mod agent;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod feeds;
pub mod forecaster;
pub mod kpi;
pub mod noise;
pub mod scenario;
pub mod simcore;
pub mod time;

pub use error::{Error, Result};
pub use time::Timestamp;
