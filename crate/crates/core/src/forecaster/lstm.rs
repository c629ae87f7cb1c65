use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::INPUT_DIM;
use crate::error::{Error, Result};

/// Layer sizes of the stacked-LSTM regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub input_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub dense1: usize,
    pub dense2: usize,
    pub window: usize,
}

impl Default for Arch {
    fn default() -> Self {
        Self {
            input_dim: INPUT_DIM,
            hidden1: 128,
            hidden2: 64,
            dense1: 32,
            dense2: 16,
            window: 60,
        }
    }
}

impl Arch {
    /// Small clone used for gradient checks and smoke training.
    pub fn tiny() -> Self {
        Self {
            hidden1: 4,
            hidden2: 3,
            dense1: 4,
            dense2: 3,
            window: 5,
            ..Self::default()
        }
    }

    /// `(name, rows, cols)` of every tensor in archive order. Biases have
    /// one row.
    pub fn tensors(&self) -> [(&'static str, usize, usize); 12] {
        let (i, h1, h2, d1, d2) = (self.input_dim, self.hidden1, self.hidden2, self.dense1, self.dense2);
        [
            ("lstm1.w_ih", 4 * h1, i),
            ("lstm1.w_hh", 4 * h1, h1),
            ("lstm1.bias", 1, 4 * h1),
            ("lstm2.w_ih", 4 * h2, h1),
            ("lstm2.w_hh", 4 * h2, h2),
            ("lstm2.bias", 1, 4 * h2),
            ("dense1.weight", d1, h2),
            ("dense1.bias", 1, d1),
            ("dense2.weight", d2, d1),
            ("dense2.bias", 1, d2),
            ("head.weight", 1, d2),
            ("head.bias", 1, 1),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, r, c)| r * c).sum()
    }
}

const L1_IH: usize = 0;
const L1_HH: usize = 1;
const L1_B: usize = 2;
const L2_IH: usize = 3;
const L2_HH: usize = 4;
const L2_B: usize = 5;
const D1_W: usize = 6;
const D1_B: usize = 7;
const D2_W: usize = 8;
const D2_B: usize = 9;
const HEAD_W: usize = 10;
const HEAD_B: usize = 11;

/// Gate blocks are laid out `[input, forget, cell, output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub arch: Arch,
    pub dropout: f64,
    pub params: Vec<Array2<f64>>,
}

struct LayerCache {
    /// Inputs fed to the layer at each step.
    xs: Vec<Array2<f64>>,
    /// `h_0 ..= h_T`.
    hs: Vec<Array2<f64>>,
    cs: Vec<Array2<f64>>,
    /// Activated gates per step.
    gates: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
}

/// Activations kept for the backward pass.
pub struct ForwardCache {
    l1: LayerCache,
    l2: LayerCache,
    mask1: Option<Vec<Array2<f64>>>,
    mask2: Option<Array2<f64>>,
    h2_in: Array2<f64>,
    z1: Array2<f64>,
    a1: Array2<f64>,
    z2: Array2<f64>,
    a2: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn all_finite(a: &Array2<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}

fn dropout_mask(rng: &mut ChaCha8Rng, shape: (usize, usize), p: f64) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < p { 0.0 } else { keep })
}

/// `out (+)= a · bᵀ`.
fn mul_bt(a: &ArrayView2<f64>, b: &Array2<f64>, beta: f64, out: &mut Array2<f64>) {
    general_mat_mul(1.0, a, &b.t(), beta, out);
}

fn lstm_layer(
    xs: Vec<Array2<f64>>,
    w_ih: &Array2<f64>,
    w_hh: &Array2<f64>,
    bias: &Array2<f64>,
    hidden: usize,
    name: &'static str,
) -> Result<LayerCache> {
    let batch = xs[0].nrows();
    let steps = xs.len();
    let mut cache = LayerCache {
        hs: Vec::with_capacity(steps + 1),
        cs: Vec::with_capacity(steps + 1),
        gates: Vec::with_capacity(steps),
        tanh_c: Vec::with_capacity(steps),
        xs: Vec::new(),
    };
    cache.hs.push(Array2::zeros((batch, hidden)));
    cache.cs.push(Array2::zeros((batch, hidden)));
    for (t, x) in xs.iter().enumerate() {
        let mut a = Array2::zeros((batch, 4 * hidden));
        a.assign(&bias.broadcast((batch, 4 * hidden)).expect("bias row"));
        mul_bt(&x.view(), w_ih, 1.0, &mut a);
        mul_bt(&cache.hs[t].view(), w_hh, 1.0, &mut a);
        a.slice_mut(s![.., 0..2 * hidden]).mapv_inplace(sigmoid);
        a.slice_mut(s![.., 2 * hidden..3 * hidden]).mapv_inplace(f64::tanh);
        a.slice_mut(s![.., 3 * hidden..]).mapv_inplace(sigmoid);

        let mut c = Array2::zeros((batch, hidden));
        Zip::from(&mut c)
            .and(&cache.cs[t])
            .and(a.slice(s![.., 0..hidden]))
            .and(a.slice(s![.., hidden..2 * hidden]))
            .and(a.slice(s![.., 2 * hidden..3 * hidden]))
            .for_each(|c, &cp, &i, &f, &g| *c = f * cp + i * g);
        let tc = c.mapv(f64::tanh);
        let h = &a.slice(s![.., 3 * hidden..]) * &tc;
        if !all_finite(&h) || !all_finite(&c) {
            return Err(Error::NonFiniteActivation { layer: name, step: t });
        }
        cache.gates.push(a);
        cache.cs.push(c);
        cache.tanh_c.push(tc);
        cache.hs.push(h);
    }
    cache.xs = xs;
    Ok(cache)
}

/// BPTT through one layer. `dh_above[t]` is the loss gradient arriving at
/// `h_{t+1}` from above; returns parameter gradients and, when asked, the
/// gradients with respect to the layer inputs.
fn lstm_layer_backward(
    cache: &LayerCache,
    dh_above: &[Option<Array2<f64>>],
    w_ih: &Array2<f64>,
    w_hh: &Array2<f64>,
    hidden: usize,
    want_dx: bool,
) -> (Array2<f64>, Array2<f64>, Array2<f64>, Vec<Array2<f64>>) {
    let steps = cache.gates.len();
    let batch = cache.hs[0].nrows();
    let mut d_ih = Array2::zeros(w_ih.raw_dim());
    let mut d_hh = Array2::zeros(w_hh.raw_dim());
    let mut d_b = Array2::zeros((1, 4 * hidden));
    let mut dxs = vec![Array2::zeros((0, 0)); if want_dx { steps } else { 0 }];
    let mut dh_next = Array2::<f64>::zeros((batch, hidden));
    let mut dc_next = Array2::<f64>::zeros((batch, hidden));
    let mut da = Array2::<f64>::zeros((batch, 4 * hidden));

    for t in (0..steps).rev() {
        let mut dh = dh_next.clone();
        if let Some(g) = &dh_above[t] {
            dh += g;
        }
        let gates = &cache.gates[t];
        let tc = &cache.tanh_c[t];
        let c_prev = &cache.cs[t];
        let mut dc = dc_next.clone();
        for b in 0..batch {
            for j in 0..hidden {
                let i = gates[[b, j]];
                let f = gates[[b, hidden + j]];
                let g = gates[[b, 2 * hidden + j]];
                let o = gates[[b, 3 * hidden + j]];
                let tcj = tc[[b, j]];
                let dhj = dh[[b, j]];
                let dcj = dc[[b, j]] + dhj * o * (1.0 - tcj * tcj);
                dc[[b, j]] = dcj;
                da[[b, j]] = dcj * g * i * (1.0 - i);
                da[[b, hidden + j]] = dcj * c_prev[[b, j]] * f * (1.0 - f);
                da[[b, 2 * hidden + j]] = dcj * i * (1.0 - g * g);
                da[[b, 3 * hidden + j]] = dhj * tcj * o * (1.0 - o);
                dc_next[[b, j]] = dcj * f;
            }
        }
        general_mat_mul(1.0, &da.t(), &cache.xs[t], 1.0, &mut d_ih);
        general_mat_mul(1.0, &da.t(), &cache.hs[t], 1.0, &mut d_hh);
        d_b += &da.sum_axis(Axis(0)).insert_axis(Axis(0));
        if want_dx {
            dxs[t] = da.dot(w_ih);
        }
        dh_next = da.dot(w_hh);
    }
    (d_ih, d_hh, d_b, dxs)
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, limit: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
}

impl LstmModel {
    pub fn zeros(arch: Arch, dropout: f64) -> Self {
        let params = arch.tensors().iter().map(|&(_, r, c)| Array2::zeros((r, c))).collect();
        Self { arch, dropout, params }
    }

    /// Uniform ±1/√hidden for the recurrent layers (forget bias 1),
    /// Glorot-uniform for the dense layers, zero head bias.
    pub fn init(arch: Arch, dropout: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(arch, dropout);
        for (idx, (name, r, c)) in arch.tensors().into_iter().enumerate() {
            m.params[idx] = if name.starts_with("lstm") {
                let hidden = r.max(c) / 4;
                uniform(&mut rng, r, c, 1.0 / (hidden as f64).sqrt())
            } else if name.ends_with("weight") {
                uniform(&mut rng, r, c, (6.0 / (r + c) as f64).sqrt())
            } else {
                Array2::zeros((r, c))
            };
        }
        for (idx, h) in [(L1_B, arch.hidden1), (L2_B, arch.hidden2)] {
            m.params[idx].slice_mut(s![.., h..2 * h]).fill(1.0);
        }
        m
    }

    /// Runs a time-major batch (`xs[t]` is `(batch, input_dim)`) and returns
    /// the raw head output per sample. Dropout is applied only when `rng`
    /// is given.
    pub fn forward(&self, xs: &[Array2<f64>], rng: Option<&mut ChaCha8Rng>) -> Result<(Array1<f64>, ForwardCache)> {
        let a = &self.arch;
        let p = &self.params;
        if xs.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        let batch = xs[0].nrows();
        let l1 = lstm_layer(xs.to_vec(), &p[L1_IH], &p[L1_HH], &p[L1_B], a.hidden1, "lstm1")?;

        let (mask1, mask2) = match rng {
            Some(rng) if self.dropout > 0.0 => {
                let m1: Vec<_> = (0..xs.len())
                    .map(|_| dropout_mask(rng, (batch, a.hidden1), self.dropout))
                    .collect();
                let m2 = dropout_mask(rng, (batch, a.hidden2), self.dropout);
                (Some(m1), Some(m2))
            }
            _ => (None, None),
        };
        let l2_in: Vec<Array2<f64>> = match &mask1 {
            Some(m) => l1.hs[1..].iter().zip(m).map(|(h, m)| h * m).collect(),
            None => l1.hs[1..].to_vec(),
        };
        let l2 = lstm_layer(l2_in, &p[L2_IH], &p[L2_HH], &p[L2_B], a.hidden2, "lstm2")?;
        let h_last = l2.hs.last().expect("at least one step");
        let h2_in = match &mask2 {
            Some(m) => h_last * m,
            None => h_last.clone(),
        };

        let dense = |x: &Array2<f64>, w: usize, b: usize| {
            let mut z = Array2::zeros((batch, p[w].nrows()));
            z.assign(&p[b].broadcast((batch, p[w].nrows())).expect("bias row"));
            mul_bt(&x.view(), &p[w], 1.0, &mut z);
            z
        };
        let z1 = dense(&h2_in, D1_W, D1_B);
        let a1 = z1.mapv(|v| v.max(0.0));
        let z2 = dense(&a1, D2_W, D2_B);
        let a2 = z2.mapv(|v| v.max(0.0));
        let out = dense(&a2, HEAD_W, HEAD_B);
        let steps = xs.len();
        for (name, v) in [("dense1", &a1), ("dense2", &a2), ("head", &out)] {
            if !all_finite(v) {
                return Err(Error::NonFiniteActivation { layer: name, step: steps - 1 });
            }
        }
        let cache = ForwardCache {
            l1,
            l2,
            mask1,
            mask2,
            h2_in,
            z1,
            a1,
            z2,
            a2,
        };
        Ok((out.column(0).to_owned(), cache))
    }

    /// Gradients of a scalar loss whose derivative with respect to the
    /// head outputs is `d_out`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array1<f64>) -> Vec<Array2<f64>> {
        let a = &self.arch;
        let p = &self.params;
        let mut g: Vec<Array2<f64>> = p.iter().map(|t| Array2::zeros(t.raw_dim())).collect();
        let d_out = d_out.view().insert_axis(Axis(1));

        g[HEAD_W] = d_out.t().dot(&cache.a2);
        g[HEAD_B] = d_out.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut dz2 = d_out.dot(&p[HEAD_W]);
        Zip::from(&mut dz2).and(&cache.z2).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });
        g[D2_W] = dz2.t().dot(&cache.a1);
        g[D2_B] = dz2.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut dz1 = dz2.dot(&p[D2_W]);
        Zip::from(&mut dz1).and(&cache.z1).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });
        g[D1_W] = dz1.t().dot(&cache.h2_in);
        g[D1_B] = dz1.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut dh2 = dz1.dot(&p[D1_W]);
        if let Some(m) = &cache.mask2 {
            dh2 *= m;
        }

        let steps = cache.l2.gates.len();
        let mut above2 = vec![None; steps];
        above2[steps - 1] = Some(dh2);
        let (ih, hh, b, dx2) = lstm_layer_backward(&cache.l2, &above2, &p[L2_IH], &p[L2_HH], a.hidden2, true);
        g[L2_IH] = ih;
        g[L2_HH] = hh;
        g[L2_B] = b;

        let above1: Vec<Option<Array2<f64>>> = match &cache.mask1 {
            Some(m) => dx2.into_iter().zip(m).map(|(d, m)| Some(d * m)).collect(),
            None => dx2.into_iter().map(Some).collect(),
        };
        let (ih, hh, b, _) = lstm_layer_backward(&cache.l1, &above1, &p[L1_IH], &p[L1_HH], a.hidden1, false);
        g[L1_IH] = ih;
        g[L1_HH] = hh;
        g[L1_B] = b;
        g
    }

    /// Mean-squared error of `forward` against `targets` and its gradient.
    pub fn mse_and_grad(
        &self,
        xs: &[Array2<f64>],
        targets: &Array1<f64>,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        let (out, cache) = self.forward(xs, rng)?;
        let diff = &out - targets;
        let n = diff.len() as f64;
        let loss = diff.mapv(|d| d * d).sum() / n;
        let d_out = diff.mapv(|d| 2.0 * d / n);
        Ok((loss, self.backward(&cache, &d_out)))
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(all_finite)
    }

    /// Rounds every parameter to the nearest `f32`, the archive precision.
    pub fn quantize_f32(&mut self) {
        for t in &mut self.params {
            t.mapv_inplace(|v| v as f32 as f64);
        }
    }
}
