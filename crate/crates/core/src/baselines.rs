//! Comparison controllers: constant power and a tier policy that only
//! sees the current measurement.

use serde::{Deserialize, Serialize};

use crate::agent::{decide, digest, Action, PolicyThresholds, PowerController, StressEstimate, TraceMode};
use crate::error::Result;
use crate::simcore::NetworkState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    FixedPower,
    ReactiveAgent,
}

/// Never touches the transmit power.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedPower;

pub fn fixed_policy(state: &NetworkState) -> Action {
    let mut a = Action::hold();
    a.trace.thought = format!("{} static configuration", state.timestamp);
    a.trace.action_rationale = "fixed power".into();
    a.trace.inputs_digest = digest(state);
    a
}

impl PowerController for FixedPower {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn decide(&mut self, state: &NetworkState) -> Result<Action> {
        Ok(fixed_policy(state))
    }
}

/// Tier policy on the current SINR with no margin. It is built from
/// thresholds alone, so it has no way to reach a forecast or a feed.
#[derive(Debug, Clone, Copy)]
pub struct ReactiveAgent {
    thresholds: PolicyThresholds,
}

impl ReactiveAgent {
    pub fn new(thresholds: PolicyThresholds) -> Result<Self> {
        thresholds.validate()?;
        Ok(Self { thresholds })
    }
}

pub fn reactive_policy(state: &NetworkState, thresholds: &PolicyThresholds) -> Action {
    decide(state, &StressEstimate::current_only(state, TraceMode::Reactive), thresholds, 0.0)
}

impl PowerController for ReactiveAgent {
    fn name(&self) -> String {
        "reactive".into()
    }

    fn decide(&mut self, state: &NetworkState) -> Result<Action> {
        Ok(reactive_policy(state, &self.thresholds))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{control_loop, Tier};
    use crate::simcore::{EventRecord, SimConfig, TrafficModel, World, WorldInputs};
    use crate::time::Timestamp;

    fn inputs() -> WorldInputs {
        let start = Timestamp::from_ymd_hm(2025, 6, 14, 0, 0);
        WorldInputs {
            sim: SimConfig {
                rng_seed: 11,
                ..SimConfig::default()
            },
            traffic: TrafficModel::default(),
            events: vec![EventRecord {
                event_id: "concert".into(),
                start: start.plus_minutes(1080),
                end: start.plus_minutes(1260),
                demand_multiplier: 4.0,
                crowd_density_factor: 0.9,
                location_tag: String::new(),
            }],
            weather: vec![],
            start,
            outage_threshold_db: 15.0,
        }
    }

    #[test]
    fn fixed_power_is_constant() {
        let mut w = World::new(inputs()).unwrap();
        let log = control_loop(&mut w, &mut FixedPower, &PolicyThresholds::default(), 1440).unwrap();
        assert!(log.rows.iter().all(|r| r.tx_power_dbm == 43.0 && r.action_db == 0.0));
        assert!(log.rows.iter().any(|r| r.outage_flag));
    }

    #[test]
    fn reactive_reads_only_current_sinr() {
        let th = PolicyThresholds::default();
        let mut s = World::new(inputs()).unwrap().last_state().clone();
        s.sinr_db = 26.0;
        let a = reactive_policy(&s, &th);
        assert_eq!((a.tier, a.power_delta_db), (Tier::Efficiency, -1.0));
        s.sinr_db = 14.0;
        let a = reactive_policy(&s, &th);
        assert_eq!((a.tier, a.power_delta_db, a.emergency_prb_grant), (Tier::Critical, 3.0, true));
        assert_eq!(a.trace.mode, TraceMode::Reactive);
    }
}
