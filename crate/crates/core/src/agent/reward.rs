use serde::{Deserialize, Serialize};

use super::{Action, PolicyThresholds, RewardWeights, Tier};
use crate::simcore::NetworkState;

pub const SINR_GAIN: f64 = 10.0;
pub const POWER_PENALTY: f64 = 2.0;
pub const THRESHOLD_MET: f64 = 5.0;
pub const THRESHOLD_MISSED: f64 = -10.0;
pub const ACTION_OK: f64 = 2.0;
pub const ACTION_BAD: f64 = -2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub delta_sinr_db: f64,
    pub r_threshold: f64,
    pub r_action: f64,
    /// Power increase only; reductions count as zero.
    pub delta_power_db: f64,
    pub total: f64,
    /// Same terms scaled by the persona's reward weights.
    pub weighted_total: f64,
}

/// Scores the transition `before -> after` produced by `action`.
pub fn reward(
    before: &NetworkState,
    after: &NetworkState,
    action: &Action,
    thresholds: &PolicyThresholds,
    weights: &RewardWeights,
) -> RewardBreakdown {
    let delta_sinr_db = after.sinr_db - before.sinr_db;
    let met = after.sinr_db >= thresholds.gamma1_db;
    let r_threshold = if met { THRESHOLD_MET } else { THRESHOLD_MISSED };
    let legal = action.tier.is_legal(action.power_delta_db, action.emergency_prb_grant);
    let r_action = if legal && (action.tier == Tier::Efficiency || met) {
        ACTION_OK
    } else {
        ACTION_BAD
    };
    let delta_power_db = (after.tx_power_dbm - before.tx_power_dbm).max(0.0);
    let total = SINR_GAIN * delta_sinr_db + r_threshold + r_action - POWER_PENALTY * delta_power_db;
    let weighted_total = weights.sinr * SINR_GAIN * delta_sinr_db
        + weights.threshold * r_threshold
        + weights.action * r_action
        - weights.power * POWER_PENALTY * delta_power_db;
    RewardBreakdown {
        delta_sinr_db,
        r_threshold,
        r_action,
        delta_power_db,
        total,
        weighted_total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::Timestamp;

    fn state(sinr: f64, tx: f64) -> NetworkState {
        NetworkState {
            timestamp: Timestamp(0),
            tx_power_dbm: tx,
            load: 0.3,
            interference_dbm: -107.0,
            shadow_db: 0.0,
            fast_fade_db: 0.0,
            weather_loss_db: 0.0,
            blockage_db: 0.0,
            sinr_db: sinr,
            prb_used: 82,
            prb_total: 273,
            event_active: false,
            outage_flag: sinr < 15.0,
        }
    }

    fn r(before: (f64, f64), after: (f64, f64), action: Action) -> RewardBreakdown {
        reward(
            &state(before.0, before.1),
            &state(after.0, after.1),
            &action,
            &PolicyThresholds::default(),
            &RewardWeights::default(),
        )
    }

    #[test]
    fn boost_that_pays_off() {
        let b = r((16.0, 43.0), (18.0, 44.0), Action::with_delta(Tier::Risk, 1.0));
        assert_eq!(b.total, 25.0);
    }

    #[test]
    fn healthy_hold() {
        let b = r((22.0, 43.0), (22.0, 43.0), Action::hold());
        assert_eq!(b.total, 7.0);
    }

    #[test]
    fn reductions_are_not_penalised() {
        let b = r((24.0, 43.0), (22.0, 41.0), Action::with_delta(Tier::Optimization, -2.0));
        assert_eq!(b.delta_power_db, 0.0);
        assert_eq!(b.total, -13.0);
    }

    #[test]
    fn failed_boost_loses_action_credit() {
        let b = r((12.0, 43.0), (14.0, 46.0), Action::with_delta(Tier::Critical, 3.0));
        assert_eq!(b.r_threshold, -10.0);
        assert_eq!(b.r_action, -2.0);
        assert_eq!(b.total, 20.0 - 10.0 - 2.0 - 6.0);
    }

    #[test]
    fn efficiency_keeps_action_credit_in_outage() {
        let b = r((21.0, 43.0), (14.0, 40.0), Action::with_delta(Tier::Efficiency, -3.0));
        assert_eq!(b.r_action, 2.0);
    }

    #[test]
    fn energy_balancer_doubles_power_term() {
        let w = RewardWeights {
            power: 2.0,
            ..RewardWeights::default()
        };
        let b = reward(
            &state(16.0, 43.0),
            &state(18.0, 44.0),
            &Action::with_delta(Tier::Risk, 1.0),
            &PolicyThresholds::default(),
            &w,
        );
        assert_eq!(b.total, 25.0);
        assert_eq!(b.weighted_total, 23.0);
    }
}
