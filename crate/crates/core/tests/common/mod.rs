//! Oracles shared by the integration tests. Each one is coded from the
//! model definitions, not from the library's own helpers.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ricsim::agent::{Action, Tier};
use ricsim::forecaster::{Arch, LstmModel};
use ricsim::simcore::NetworkState;
use ricsim::Timestamp;

pub const FD_EPS: f64 = 1e-5;
pub const GRAD_REL_TOL: f64 = 1e-4;
/// Denominator floor for the relative gradient error.
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn state(sinr: f64, tx: f64) -> NetworkState {
    NetworkState {
        timestamp: Timestamp(0),
        tx_power_dbm: tx,
        load: 0.4,
        interference_dbm: -106.0,
        shadow_db: 0.0,
        fast_fade_db: 0.0,
        weather_loss_db: 0.0,
        blockage_db: 0.0,
        sinr_db: sinr,
        prb_used: 100,
        prb_total: 273,
        event_active: false,
        outage_flag: sinr < 15.0,
    }
}

fn legal_range(tier: Tier) -> (f64, f64) {
    match tier {
        Tier::Critical | Tier::Risk => (1.0, 3.0),
        Tier::Optimization => (-2.0, 2.0),
        Tier::Efficiency => (-3.0, -1.0),
        Tier::Hold => (0.0, 0.0),
    }
}

/// Reward of one transition, written out term by term.
pub fn eq1_oracle(before: &NetworkState, after: &NetworkState, action: &Action, gamma1: f64) -> f64 {
    let d_sinr = after.sinr_db - before.sinr_db;
    let r_thr = if after.sinr_db >= gamma1 { 5.0 } else { -10.0 };
    let (lo, hi) = legal_range(action.tier);
    let d = action.power_delta_db;
    let whole = d.is_finite() && d == d.trunc();
    let grant_ok = !action.emergency_prb_grant || action.tier == Tier::Critical;
    let legal = whole && grant_ok && d >= lo && d <= hi;
    let r_act = if legal && (action.tier == Tier::Efficiency || after.sinr_db >= gamma1) {
        2.0
    } else {
        -2.0
    };
    let d_pow = if after.tx_power_dbm > before.tx_power_dbm {
        after.tx_power_dbm - before.tx_power_dbm
    } else {
        0.0
    };
    10.0 * d_sinr + r_thr + r_act - 2.0 * d_pow
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
}

fn loss(m: &LstmModel, xs: &[Array2<f64>], t: &Array1<f64>, mask_seed: Option<u64>) -> f64 {
    let mut rng = mask_seed.map(ChaCha8Rng::seed_from_u64);
    let (out, _) = m.forward(xs, rng.as_mut()).unwrap();
    out.iter().zip(t).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / t.len() as f64
}

/// Worst relative error between backprop and central differences over every
/// parameter of a freshly drawn tiny model, batch and (optional) dropout
/// masks.
pub fn gradient_check_draw(seed: u64, dropout: f64) -> f64 {
    let arch = Arch::tiny();
    let mut m = LstmModel::init(arch, dropout, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    // Zero-initialised biases would sit exactly on ReLU kinks.
    for t in &mut m.params {
        t.mapv_inplace(|v| v + rng.random_range(-0.2..0.2));
    }
    let batch = 3;
    let xs: Vec<Array2<f64>> = (0..arch.window).map(|_| uniform(&mut rng, batch, arch.input_dim)).collect();
    let t: Array1<f64> = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mask_seed = (dropout > 0.0).then_some(seed + 7);

    let mut mask_rng = mask_seed.map(ChaCha8Rng::seed_from_u64);
    let (_, grads) = m.mse_and_grad(&xs, &t, mask_rng.as_mut()).unwrap();

    let mut worst = 0.0f64;
    for (k, g) in grads.iter().enumerate() {
        for (idx, &analytic) in g.indexed_iter() {
            let mut plus = m.clone();
            plus.params[k][idx] += FD_EPS;
            let mut minus = m.clone();
            minus.params[k][idx] -= FD_EPS;
            let numeric = (loss(&plus, &xs, &t, mask_seed) - loss(&minus, &xs, &t, mask_seed)) / (2.0 * FD_EPS);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}
