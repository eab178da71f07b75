//! Fully connected network with rectifier hidden layers and a single sigmoid
//! output, trained by mini-batch backpropagation with Adam steps.
//!
//! Parameters live in one flat vector. Layer `l` stores its weight matrix
//! (`out x in`, row-major) followed by its bias vector.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Mlp {
    /// Uniform fan-in initialization: every weight and bias of a layer with
    /// `n_in` inputs is drawn from `U(-1/sqrt(n_in), 1/sqrt(n_in))`.
    pub fn new<R: Rng>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(input_dim, hidden);
        let mut off = 0;
        for l in 0..net.sizes.len() - 1 {
            let (n_in, n_out) = (net.sizes[l], net.sizes[l + 1]);
            let bound = 1.0 / (n_in.max(1) as f64).sqrt();
            for p in &mut net.params[off..off + n_in * n_out + n_out] {
                *p = rng.random_range(-bound..bound);
            }
            off += n_in * n_out + n_out;
        }
        net
    }

    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self {
            sizes,
            params: vec![0.0; n],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn hidden_width(&self) -> usize {
        self.sizes[1..self.sizes.len() - 1].iter().sum()
    }

    /// Output logit for one input row. `hidden` receives the post-activation
    /// values of every hidden layer, concatenated.
    fn forward_row(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let n_layers = self.sizes.len() - 1;
        let mut p_off = 0;
        let mut h_off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[p_off..p_off + n_in * n_out];
            let b = &self.params[p_off + n_in * n_out..p_off + n_in * n_out + n_out];
            p_off += n_in * n_out + n_out;
            let (prev, cur) = hidden.split_at_mut(h_off);
            let input: &[f64] = if l == 0 { x } else { &prev[h_off - n_in..] };
            if l == n_layers - 1 {
                return dot(w, input) + b[0];
            }
            for o in 0..n_out {
                cur[o] = (dot(&w[o * n_in..(o + 1) * n_in], input) + b[o]).max(0.0);
            }
            h_off += n_out;
        }
        unreachable!("network has an output layer")
    }

    /// Accumulate the gradient of `dlogit * logit(x)` into `grad`.
    fn backward_row(&self, x: &[f64], hidden: &[f64], dlogit: f64, grad: &mut [f64], delta: &mut Vec<f64>, next: &mut Vec<f64>) {
        let n_layers = self.sizes.len() - 1;
        delta.clear();
        delta.push(dlogit);
        let mut p_end = self.params.len();
        let mut h_end = hidden.len();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let p_off = p_end - (n_in * n_out + n_out);
            let input: &[f64] = if l == 0 { x } else { &hidden[h_end - n_in..h_end] };
            let (gw, gb) = grad[p_off..p_end].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, v) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                    *g += d * v;
                }
            }
            if l > 0 {
                let w = &self.params[p_off..p_off + n_in * n_out];
                next.clear();
                next.resize(n_in, 0.0);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (nx, wv) in next.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *nx += d * wv;
                    }
                }
                for (nx, a) in next.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *nx = 0.0;
                    }
                }
                std::mem::swap(delta, next);
                h_end -= n_in;
            }
            p_end = p_off;
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.hidden_width()];
        self.forward_row(x, &mut hidden)
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Vec<f64> {
        let mut hidden = vec![0.0; self.hidden_width()];
        (0..x.rows())
            .map(|i| sigmoid(self.forward_row(x.row(i), &mut hidden)))
            .collect()
    }

    /// Loss of `objective` on `rows` and its gradient with respect to every
    /// parameter.
    pub fn loss_and_gradient(&self, x: &Matrix, rows: &[usize], objective: &dyn BatchLoss) -> (f64, Vec<f64>) {
        let mut ws = Workspace::new(self, rows.len());
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.batch_step(x, rows, objective, &mut ws, &mut grad);
        (loss, grad)
    }

    /// Forward `rows`, evaluate the objective, and write the parameter
    /// gradient into `grad` (overwritten).
    fn batch_step(&self, x: &Matrix, rows: &[usize], objective: &dyn BatchLoss, ws: &mut Workspace, grad: &mut [f64]) -> f64 {
        let hw = self.hidden_width();
        ws.ensure(rows.len(), hw);
        for (k, &r) in rows.iter().enumerate() {
            ws.logits[k] = self.forward_row(x.row(r), &mut ws.hidden[k * hw..(k + 1) * hw]);
        }
        let b = rows.len();
        let loss = objective.evaluate(rows, &ws.logits[..b], &mut ws.dlogits[..b]);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (k, &r) in rows.iter().enumerate() {
            self.backward_row(
                x.row(r),
                &ws.hidden[k * hw..(k + 1) * hw],
                ws.dlogits[k],
                grad,
                &mut ws.delta,
                &mut ws.next,
            );
        }
        loss
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Workspace {
    hidden: Vec<f64>,
    logits: Vec<f64>,
    dlogits: Vec<f64>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl Workspace {
    fn new(net: &Mlp, batch: usize) -> Self {
        let mut ws = Self {
            hidden: Vec::new(),
            logits: Vec::new(),
            dlogits: Vec::new(),
            delta: Vec::new(),
            next: Vec::new(),
        };
        ws.ensure(batch, net.hidden_width());
        ws
    }

    fn ensure(&mut self, batch: usize, hidden_width: usize) {
        if self.logits.len() < batch {
            self.logits.resize(batch, 0.0);
            self.dlogits.resize(batch, 0.0);
        }
        if self.hidden.len() < batch * hidden_width {
            self.hidden.resize(batch * hidden_width, 0.0);
        }
    }
}

/// A per-batch objective over output logits.
pub trait BatchLoss: Sync {
    /// Loss on the batch `rows` with network outputs `logits`. Writes the
    /// derivative of the loss with respect to each logit into `dlogits`.
    fn evaluate(&self, rows: &[usize], logits: &[f64], dlogits: &mut [f64]) -> f64;
}

/// Mean over the batch of `w_i * BCE(y_i, sigmoid(z_i))`.
pub struct WeightedBce<'a> {
    pub labels: &'a [u8],
    pub weights: &'a [f64],
}

impl BatchLoss for WeightedBce<'_> {
    fn evaluate(&self, rows: &[usize], logits: &[f64], dlogits: &mut [f64]) -> f64 {
        let scale = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        for ((&r, &z), dz) in rows.iter().zip(logits).zip(dlogits.iter_mut()) {
            let y = self.labels[r] as f64;
            let w = self.weights[r];
            loss += w * (softplus(z) - y * z);
            *dz = w * (sigmoid(z) - y) * scale;
        }
        loss * scale
    }
}

/// Adam with the usual decay constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let c2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch schedule shared by every network trainer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Shuffle seed; epoch `e` shuffles with stream `e + 1` of it.
    pub seed: u64,
    /// Index of the first epoch, so resumed training continues the shuffle stream.
    pub first_epoch: usize,
}

pub(crate) fn run_epochs(net: &mut Mlp, adam: &mut Adam, x: &Matrix, objective: &dyn BatchLoss, s: &Schedule) -> Result<()> {
    if s.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    if !(s.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("learning_rate must be positive".into()));
    }
    let n = x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut ws = Workspace::new(net, s.batch_size.min(n));
    let mut grad = vec![0.0; net.params.len()];
    for e in s.first_epoch..s.first_epoch + s.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng_for(s.seed, e as u64 + 1));
        for batch in order.chunks(s.batch_size) {
            let loss = net.batch_step(x, batch, objective, &mut ws, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite loss in epoch {e} (learning rate {} may be too high)",
                    s.learning_rate
                )));
            }
            adam.step(&mut net.params, &grad, s.learning_rate);
        }
    }
    Ok(())
}
