//! Tiered, persona-driven power control.
//!
//! Each decision blends the measured SINR with a projection under the
//! forecast peak load, classifies the result into one of four SINR bands
//! and picks the smallest whole-dB step that band allows.

mod control;
mod persona;
mod policy;
mod reward;
mod tier;

pub use control::{
    control_loop, read_traces, write_traces, AgentConfig, PowerController, ProactiveAgent, RunLog, TraceRecord,
};
pub use persona::{Persona, PersonaName, RewardWeights};
pub use policy::{decide, digest, effective_stress_sinr, Action, FeedView, ReactTrace, StressEstimate, TraceMode};
pub use reward::{reward, RewardBreakdown};
pub use tier::{classify_tier, PolicyThresholds, Tier};
