//! Single-sample inference in `f32` with the input and recurrent weights
//! of each gate row stored side by side.

use super::lstm::LstmModel;

fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f32>() + tail
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    hidden: usize,
    /// `4·hidden` rows of `[w_ih | w_hh]`.
    w: Vec<f32>,
    b: Vec<f32>,
}

impl Cell {
    fn new(w_ih: &ndarray::Array2<f64>, w_hh: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>) -> Self {
        let hidden = w_hh.ncols();
        let mut w = Vec::with_capacity(w_ih.nrows() * (w_ih.ncols() + hidden));
        for r in 0..w_ih.nrows() {
            w.extend(w_ih.row(r).iter().map(|&v| v as f32));
            w.extend(w_hh.row(r).iter().map(|&v| v as f32));
        }
        Self {
            hidden,
            w,
            b: b.iter().map(|&v| v as f32).collect(),
        }
    }

    /// Advances `(h, c)` given the concatenated `[x | h]` in `xh`.
    fn step(&self, xh: &[f32], gates: &mut [f32], h: &mut [f32], c: &mut [f32]) {
        let width = xh.len();
        for (r, g) in gates.iter_mut().enumerate() {
            *g = self.b[r] + dot(&self.w[r * width..(r + 1) * width], xh);
        }
        let n = self.hidden;
        for j in 0..n {
            let i = sigmoid(gates[j]);
            let f = sigmoid(gates[n + j]);
            let g = gates[2 * n + j].tanh();
            let o = sigmoid(gates[3 * n + j]);
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    w: Vec<f32>,
    b: Vec<f32>,
    inputs: usize,
}

impl Dense {
    fn new(w: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>) -> Self {
        Self {
            w: w.iter().map(|&v| v as f32).collect(),
            b: b.iter().map(|&v| v as f32).collect(),
            inputs: w.ncols(),
        }
    }

    fn apply(&self, x: &[f32], relu: bool) -> Vec<f32> {
        self.b
            .iter()
            .enumerate()
            .map(|(r, &b)| {
                let v = b + dot(&self.w[r * self.inputs..(r + 1) * self.inputs], x);
                if relu {
                    v.max(0.0)
                } else {
                    v
                }
            })
            .collect()
    }
}

/// Inference-only copy of an [`LstmModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceNet {
    l1: Cell,
    l2: Cell,
    d1: Dense,
    d2: Dense,
    head: Dense,
    input_dim: usize,
}

impl InferenceNet {
    pub fn new(m: &LstmModel) -> Self {
        let p = &m.params;
        Self {
            l1: Cell::new(&p[0], &p[1], &p[2]),
            l2: Cell::new(&p[3], &p[4], &p[5]),
            d1: Dense::new(&p[6], &p[7]),
            d2: Dense::new(&p[8], &p[9]),
            head: Dense::new(&p[10], &p[11]),
            input_dim: m.arch.input_dim,
        }
    }

    /// Raw head output for one window of input rows.
    pub fn run<'a>(&self, rows: impl Iterator<Item = &'a [f64]>) -> f64 {
        let (n1, n2) = (self.l1.hidden, self.l2.hidden);
        let d = self.input_dim;
        let mut xh1 = vec![0.0f32; d + n1];
        let mut xh2 = vec![0.0f32; n1 + n2];
        let mut c1 = vec![0.0f32; n1];
        let mut c2 = vec![0.0f32; n2];
        let mut h1 = vec![0.0f32; n1];
        let mut h2 = vec![0.0f32; n2];
        let mut g1 = vec![0.0f32; 4 * n1];
        let mut g2 = vec![0.0f32; 4 * n2];
        for row in rows {
            for (dst, &src) in xh1[..d].iter_mut().zip(row) {
                *dst = src as f32;
            }
            xh1[d..].copy_from_slice(&h1);
            self.l1.step(&xh1, &mut g1, &mut h1, &mut c1);
            xh2[..n1].copy_from_slice(&h1);
            xh2[n1..].copy_from_slice(&h2);
            self.l2.step(&xh2, &mut g2, &mut h2, &mut c2);
        }
        let a1 = self.d1.apply(&h2, true);
        let a2 = self.d2.apply(&a1, true);
        f64::from(self.head.apply(&a2, false)[0])
    }
}
