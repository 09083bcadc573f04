use rand::Rng;

use super::Matrix;
use crate::error::{PllError, Result};
use crate::rng;

/// Hidden width of the tabular MLP.
pub const HIDDEN_WIDTH: usize = 500;

/// Parameters of `logits = W2 · relu(W1 · x + b1) + b2`.
///
/// All tensors live in one flat buffer so the optimizer can treat them
/// uniformly. `W1` is stored input-major (`d × hidden`, entry `(k, j)` is the
/// weight from input `k` to hidden unit `j`), `W2` as `hidden × q`. Gradients
/// use the same type and layout.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    d: usize,
    hidden: usize,
    q: usize,
    data: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(d: usize, hidden: usize, q: usize) -> Self {
        MlpParams {
            d,
            hidden,
            q,
            data: vec![0.0; d * hidden + hidden + hidden * q + q],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    pub fn num_classes(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offsets(&self) -> [usize; 4] {
        let w1 = 0;
        let b1 = self.d * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.hidden * self.q;
        [w1, b1, w2, b2]
    }

    pub fn w1(&self) -> &[f64] {
        let [w1, b1, ..] = self.offsets();
        &self.data[w1..b1]
    }

    pub fn b1(&self) -> &[f64] {
        let [_, b1, w2, _] = self.offsets();
        &self.data[b1..w2]
    }

    pub fn w2(&self) -> &[f64] {
        let [_, _, w2, b2] = self.offsets();
        &self.data[w2..b2]
    }

    pub fn b2(&self) -> &[f64] {
        let [.., b2] = self.offsets();
        &self.data[b2..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Named tensors with their stored shapes, in buffer order.
    pub fn tensor_shapes(&self) -> [(&'static str, [usize; 2]); 4] {
        [
            ("w1", [self.d, self.hidden]),
            ("b1", [1, self.hidden]),
            ("w2", [self.hidden, self.q]),
            ("b2", [1, self.q]),
        ]
    }

    pub(crate) fn from_parts(d: usize, hidden: usize, q: usize, data: Vec<f64>) -> Result<Self> {
        let p = MlpParams::zeros(d, hidden, q);
        if p.data.len() != data.len() {
            return Err(PllError::Shape(format!(
                "{} values for an MLP with {} parameters",
                data.len(),
                p.data.len()
            )));
        }
        Ok(MlpParams { d, hidden, q, data })
    }
}

/// Inputs and hidden pre-activations saved by [`forward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input: Matrix,
    pre: Matrix,
}

impl ForwardCache {
    pub fn pre_activations(&self) -> &Matrix {
        &self.pre
    }
}

/// Uniform `±sqrt(6 / fan_in)` weights, zero biases.
pub fn init_params(d: usize, q: usize, seed: u64) -> MlpParams {
    init_params_with_width(d, HIDDEN_WIDTH, q, seed)
}

pub fn init_params_with_width(d: usize, hidden: usize, q: usize, seed: u64) -> MlpParams {
    assert!(d >= 1 && q >= 1 && hidden >= 1);
    let mut p = MlpParams::zeros(d, hidden, q);
    let [w1, b1, w2, b2] = p.offsets();
    let mut r = rng::stream(seed, 0);
    let bound1 = (6.0 / d as f64).sqrt();
    for v in &mut p.data[w1..b1] {
        *v = r.random_range(-bound1..bound1);
    }
    let bound2 = (6.0 / hidden as f64).sqrt();
    for v in &mut p.data[w2..b2] {
        *v = r.random_range(-bound2..bound2);
    }
    p
}

pub fn forward(params: &MlpParams, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
    let (b, d) = batch.shape();
    if d != params.d {
        return Err(PllError::Shape(format!("batch width {d}, model expects {}", params.d)));
    }
    if !batch.is_finite() {
        return Err(PllError::NonFinite("forward input"));
    }
    let (h, q) = (params.hidden, params.q);
    let (w1, b1, w2, b2) = (params.w1(), params.b1(), params.w2(), params.b2());

    let mut pre = Matrix::zeros(b, h);
    for r in 0..b {
        let x = batch.row(r);
        let out = pre.row_mut(r);
        out.copy_from_slice(b1);
        for (k, &xk) in x.iter().enumerate() {
            if xk == 0.0 {
                continue;
            }
            let wk = &w1[k * h..(k + 1) * h];
            for (o, w) in out.iter_mut().zip(wk) {
                *o += xk * w;
            }
        }
    }

    let mut logits = Matrix::zeros(b, q);
    for r in 0..b {
        let hidden = pre.row(r);
        let out = logits.row_mut(r);
        out.copy_from_slice(b2);
        for (j, &a) in hidden.iter().enumerate() {
            if a <= 0.0 {
                continue;
            }
            let wj = &w2[j * q..(j + 1) * q];
            for (o, w) in out.iter_mut().zip(wj) {
                *o += a * w;
            }
        }
    }
    Ok((
        logits,
        ForwardCache {
            input: batch.clone(),
            pre,
        },
    ))
}

/// Back-propagates `d_logits` (the gradient of the scalar loss with respect
/// to each logit) into parameter gradients. Rows are summed, so a batch-mean
/// loss whose `d_logits` rows carry the `1/B` factor yields the mean of the
/// per-example gradients.
pub fn backward(params: &MlpParams, cache: &ForwardCache, d_logits: &Matrix) -> Result<MlpParams> {
    let (b, q) = d_logits.shape();
    if q != params.q || b != cache.pre.rows() || cache.input.cols() != params.d {
        return Err(PllError::Shape(format!(
            "upstream gradient {b}x{q} does not match cache {}x{}",
            cache.pre.rows(),
            params.q
        )));
    }
    let (d, h) = (params.d, params.hidden);
    let w2 = params.w2();
    let mut grads = MlpParams::zeros(d, h, q);
    let [gw1, gb1, gw2, gb2] = grads.offsets();
    let (head, tail) = grads.data.split_at_mut(gw2);
    let (g_w1, g_b1) = head.split_at_mut(gb1);
    let (g_w2, g_b2) = tail.split_at_mut(gb2 - gw2);
    debug_assert_eq!(gw1, 0);

    let mut d_hidden = vec![0.0; h];
    for r in 0..b {
        let g = d_logits.row(r);
        let pre = cache.pre.row(r);
        for (acc, gc) in g_b2.iter_mut().zip(g) {
            *acc += gc;
        }
        for j in 0..h {
            let a = pre[j];
            if a <= 0.0 {
                d_hidden[j] = 0.0;
                continue;
            }
            let wj = &w2[j * q..(j + 1) * q];
            let gw = &mut g_w2[j * q..(j + 1) * q];
            let mut dh = 0.0;
            for c in 0..q {
                gw[c] += a * g[c];
                dh += g[c] * wj[c];
            }
            d_hidden[j] = dh;
        }
        for (acc, dh) in g_b1.iter_mut().zip(&d_hidden) {
            *acc += dh;
        }
        let x = cache.input.row(r);
        for (k, &xk) in x.iter().enumerate() {
            if xk == 0.0 {
                continue;
            }
            let gk = &mut g_w1[k * h..(k + 1) * h];
            for (o, dh) in gk.iter_mut().zip(&d_hidden) {
                *o += xk * dh;
            }
        }
    }
    Ok(grads)
}
