mod common;

use common::{eq1_oracle, state};
use proptest::prelude::*;
use ricsim::agent::{reward, Action, PolicyThresholds, RewardWeights, Tier};

fn tier_strategy() -> impl Strategy<Value = Tier> {
    prop_oneof![
        Just(Tier::Critical),
        Just(Tier::Risk),
        Just(Tier::Optimization),
        Just(Tier::Efficiency),
        Just(Tier::Hold),
    ]
}

fn delta_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![(-4i32..=4).prop_map(f64::from), -4.0f64..4.0]
}

proptest! {
    #[test]
    fn total_matches_oracle_bitwise(
        s0 in -10.0f64..40.0, s1 in -10.0f64..40.0,
        p0 in 30.0f64..46.0, p1 in 30.0f64..46.0,
        tier in tier_strategy(), delta in delta_strategy(), grant: bool,
    ) {
        let (before, after) = (state(s0, p0), state(s1, p1));
        let mut action = Action::with_delta(tier, delta);
        action.emergency_prb_grant = grant;
        let th = PolicyThresholds::default();
        let r = reward(&before, &after, &action, &th, &RewardWeights::default());
        prop_assert_eq!(r.total.to_bits(), eq1_oracle(&before, &after, &action, th.gamma1_db).to_bits());
        prop_assert_eq!(r.weighted_total.to_bits(), r.total.to_bits());
    }

    #[test]
    fn power_cuts_are_never_penalised(s in 15.0f64..40.0, p0 in 35.0f64..46.0, cut in 0.0f64..5.0) {
        let th = PolicyThresholds::default();
        let r = reward(&state(s, p0), &state(s, p0 - cut), &Action::with_delta(Tier::Efficiency, -1.0), &th, &RewardWeights::default());
        prop_assert_eq!(r.delta_power_db, 0.0);
        prop_assert_eq!(r.total, 5.0 + 2.0);
    }
}

#[test]
fn worked_examples() {
    let th = PolicyThresholds::default();
    let w = RewardWeights::default();
    // +2 dB SINR for +1 dB power, target met, legal Risk step.
    let r = reward(&state(16.0, 40.0), &state(18.0, 41.0), &Action::with_delta(Tier::Risk, 1.0), &th, &w);
    assert_eq!(r.total, 20.0 + 5.0 + 2.0 - 2.0);
    // Still in outage after a +3 dB boost that gained only 1 dB.
    let r = reward(&state(12.0, 40.0), &state(13.0, 43.0), &Action::with_delta(Tier::Critical, 3.0), &th, &w);
    assert_eq!(r.total, 10.0 - 10.0 - 2.0 - 6.0);
    // Illegal delta for the tier.
    let r = reward(&state(22.0, 40.0), &state(22.0, 40.0), &Action::with_delta(Tier::Efficiency, 2.0), &th, &w);
    assert_eq!(r.r_action, -2.0);
}
