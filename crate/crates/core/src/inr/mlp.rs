//! The per-shape occupancy MLP: 27 → 128 → 128 → 128 → 1 with ReLU hidden
//! layers, producing a logit per point.
//!
//! Parameters are laid out as eight tensors `W₁ b₁ W₂ b₂ W₃ b₃ W₄ b₄`.
//! Weights are `out × in` row-major, so a layer computes `x·Wᵀ + b`. The
//! kernels below work on the flat concatenation of those tensors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::PeConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::tensor::{accumulate_column_sums, add_row_bias, gemm, MatMut, MatRef};

pub const ENCODED_DIM: usize = 27;
pub const HIDDEN: usize = 128;

/// `(fan_in, fan_out)` per dense layer.
pub const LAYERS: [(usize, usize); 4] = [
    (ENCODED_DIM, HIDDEN),
    (HIDDEN, HIDDEN),
    (HIDDEN, HIDDEN),
    (HIDDEN, 1),
];

pub const TENSOR_NAMES: [&str; 8] = ["W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4"];

/// Element count of each tensor in flatten order.
pub const TENSOR_SIZES: [usize; 8] = [
    HIDDEN * ENCODED_DIM,
    HIDDEN,
    HIDDEN * HIDDEN,
    HIDDEN,
    HIDDEN * HIDDEN,
    HIDDEN,
    HIDDEN,
    1,
];

pub const PARAM_COUNT: usize = {
    let mut total = 0;
    let mut i = 0;
    while i < TENSOR_SIZES.len() {
        total += TENSOR_SIZES[i];
        i += 1;
    }
    total
};

/// Row/column shape of each tensor; biases are single columns.
pub fn tensor_shapes() -> [[usize; 2]; 8] {
    let mut out = [[0; 2]; 8];
    for (l, &(fan_in, fan_out)) in LAYERS.iter().enumerate() {
        out[2 * l] = [fan_out, fan_in];
        out[2 * l + 1] = [fan_out, 1];
    }
    out
}

fn tensor_offset(t: usize) -> usize {
    TENSOR_SIZES[..t].iter().sum()
}

/// Weight and bias slices of dense layer `l` within a flat parameter vector.
fn layer(theta: &[f32], l: usize) -> (&[f32], &[f32]) {
    let w = tensor_offset(2 * l);
    let b = w + TENSOR_SIZES[2 * l];
    (&theta[w..b], &theta[b..b + TENSOR_SIZES[2 * l + 1]])
}

fn layer_mut(theta: &mut [f32], l: usize) -> (&mut [f32], &mut [f32]) {
    let w = tensor_offset(2 * l);
    let b = w + TENSOR_SIZES[2 * l];
    let (head, tail) = theta[w..].split_at_mut(b - w);
    (head, &mut tail[..TENSOR_SIZES[2 * l + 1]])
}

/// Structured MLP weights, one vector per tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub tensors: Vec<Vec<f32>>,
}

impl MlpParams {
    pub fn zeros() -> Self {
        Self {
            tensors: TENSOR_SIZES.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Fan-in scaled uniform init: weights `U(±√(6/fan_in))`, biases
    /// `U(±1/√fan_in)`.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut tensors = Vec::with_capacity(8);
        for &(fan_in, fan_out) in &LAYERS {
            let wb = (6.0 / fan_in as f64).sqrt() as f32;
            let bb = (1.0 / fan_in as f64).sqrt() as f32;
            tensors.push((0..fan_in * fan_out).map(|_| rng.random_range(-wb..wb)).collect());
            tensors.push((0..fan_out).map(|_| rng.random_range(-bb..bb)).collect());
        }
        Self { tensors }
    }

    /// Checks tensor count, sizes and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.tensors.len() != TENSOR_SIZES.len() {
            return Err(Error::ShapeMismatch {
                tensor: "tensor list".into(),
                expected: TENSOR_SIZES.len(),
                actual: self.tensors.len(),
            });
        }
        for (i, (t, &n)) in self.tensors.iter().zip(&TENSOR_SIZES).enumerate() {
            if t.len() != n {
                return Err(Error::ShapeMismatch {
                    tensor: TENSOR_NAMES[i].into(),
                    expected: n,
                    actual: t.len(),
                });
            }
            if let Some(j) = t.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{}[{j}]", TENSOR_NAMES[i])));
            }
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f32> {
        self.tensors.concat()
    }

    /// Splits a flat vector of exactly `PARAM_COUNT` values.
    pub fn from_flat(flat: &[f32]) -> Result<Self> {
        if flat.len() != PARAM_COUNT {
            return Err(Error::ShapeMismatch {
                tensor: "flat parameters".into(),
                expected: PARAM_COUNT,
                actual: flat.len(),
            });
        }
        let mut rest = flat;
        let tensors = TENSOR_SIZES
            .iter()
            .map(|&n| {
                let (head, tail) = rest.split_at(n);
                rest = tail;
                head.to_vec()
            })
            .collect();
        Ok(Self { tensors })
    }
}

/// Activation buffers for one batch, reused across steps.
#[derive(Debug, Default)]
pub struct MlpWorkspace {
    batch: usize,
    encoded: Vec<f32>,
    hidden: [Vec<f32>; 3],
    logits: Vec<f32>,
    grad_out: Vec<f32>,
    grad_in: Vec<f32>,
}

impl MlpWorkspace {
    fn resize(&mut self, n: usize) {
        self.batch = n;
        self.encoded.resize(n * ENCODED_DIM, 0.0);
        for h in &mut self.hidden {
            h.resize(n * HIDDEN, 0.0);
        }
        self.logits.resize(n, 0.0);
        self.grad_out.resize(n * HIDDEN, 0.0);
        self.grad_in.resize(n * HIDDEN, 0.0);
    }

    pub fn logits(&self) -> &[f32] {
        &self.logits[..self.batch]
    }
}

/// Encodes a batch of points into rows of `ENCODED_DIM` values.
pub fn encode_points(points: &[Vec3], pe: &PeConfig) -> Vec<f32> {
    let mut out = vec![0.0; points.len() * ENCODED_DIM];
    for (p, row) in points.iter().zip(out.chunks_exact_mut(ENCODED_DIM)) {
        pe.encode_into(p, row);
    }
    out
}

/// Forward pass over a flat parameter vector; logits end up in the workspace.
pub fn forward_flat<'w>(theta: &[f32], points: &[Vec3], pe: &PeConfig, ws: &'w mut MlpWorkspace) -> &'w [f32] {
    ws.resize(points.len());
    for (p, row) in points.iter().zip(ws.encoded.chunks_exact_mut(ENCODED_DIM)) {
        pe.encode_into(p, row);
    }
    forward_layers(theta, ws)
}

/// Forward pass from rows gathered out of a pre-encoded table.
pub fn forward_gathered<'w>(theta: &[f32], table: &[f32], rows: &[usize], ws: &'w mut MlpWorkspace) -> &'w [f32] {
    ws.resize(rows.len());
    for (&r, dst) in rows.iter().zip(ws.encoded.chunks_exact_mut(ENCODED_DIM)) {
        dst.copy_from_slice(&table[r * ENCODED_DIM..(r + 1) * ENCODED_DIM]);
    }
    forward_layers(theta, ws)
}

fn forward_layers<'w>(theta: &[f32], ws: &'w mut MlpWorkspace) -> &'w [f32] {
    debug_assert_eq!(theta.len(), PARAM_COUNT);
    let n = ws.batch;
    for (l, &(fan_in, fan_out)) in LAYERS.iter().enumerate() {
        let (w, b) = layer(theta, l);
        let (input, output): (&[f32], &mut [f32]) = match l {
            0 => (&ws.encoded, &mut ws.hidden[0]),
            1 | 2 => {
                let (lo, hi) = ws.hidden.split_at_mut(l);
                (&lo[l - 1], &mut hi[0])
            }
            _ => (&ws.hidden[2], &mut ws.logits),
        };
        gemm(
            1.0,
            MatRef::new(&input[..n * fan_in], n, fan_in),
            MatRef::new(w, fan_out, fan_in).t(),
            0.0,
            MatMut::new(&mut output[..n * fan_out], n, fan_out),
        );
        add_row_bias(output, fan_out, n, b);
        if l < 3 {
            for v in &mut output[..n * fan_out] {
                *v = v.max(0.0);
            }
        }
    }
    &ws.logits[..n]
}

/// Backpropagates `d_logits` through the activations of the last forward
/// pass, overwriting `grad` (same layout as `theta`).
pub fn backward_flat(theta: &[f32], ws: &mut MlpWorkspace, d_logits: &[f32], grad: &mut [f32]) {
    let n = ws.batch;
    assert_eq!(d_logits.len(), n);
    grad.fill(0.0);
    ws.grad_out[..n].copy_from_slice(d_logits);
    for l in (0..LAYERS.len()).rev() {
        let (fan_in, fan_out) = LAYERS[l];
        let input: &[f32] = if l == 0 { &ws.encoded } else { &ws.hidden[l - 1] };
        let (gw, gb) = layer_mut(grad, l);
        let d_out = &ws.grad_out[..n * fan_out];
        gemm(
            1.0,
            MatRef::new(d_out, n, fan_out).t(),
            MatRef::new(&input[..n * fan_in], n, fan_in),
            0.0,
            MatMut::new(gw, fan_out, fan_in),
        );
        accumulate_column_sums(gb, d_out, fan_out, n);
        if l == 0 {
            break;
        }
        let (w, _) = layer(theta, l);
        gemm(
            1.0,
            MatRef::new(d_out, n, fan_out),
            MatRef::new(w, fan_out, fan_in),
            0.0,
            MatMut::new(&mut ws.grad_in[..n * fan_in], n, fan_in),
        );
        // ReLU: pass gradient where the activation was positive.
        // Written as a select so it vectorizes; a branch here mispredicts
        // on roughly half the units.
        for (g, h) in ws.grad_in[..n * fan_in].iter_mut().zip(&ws.hidden[l - 1][..n * fan_in]) {
            *g = if *h > 0.0 { *g } else { 0.0 };
        }
        std::mem::swap(&mut ws.grad_in, &mut ws.grad_out);
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(z: f32) -> f32 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy against soft targets in `[0, 1]`, plus its
/// gradient with respect to the logits.
pub fn bce_with_targets(logits: &[f32], targets: &[f32], d_logits: &mut [f32]) -> f64 {
    let n = logits.len() as f64;
    let mut total = 0.0;
    for ((&z, &y), d) in logits.iter().zip(targets).zip(d_logits.iter_mut()) {
        // -[y log σ(z) + (1-y) log(1-σ(z))] = softplus(z) - y z
        total += softplus(z as f64) - y as f64 * z as f64;
        *d = ((sigmoid(z) as f64 - y as f64) / n) as f32;
    }
    total / n
}

fn check_labels(labels: &[u8]) -> Result<()> {
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    Ok(())
}

/// Mean binary cross-entropy of logits against occupancy bits.
pub fn bce_loss(logits: &[f32], labels: &[u8]) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if logits.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            tensor: "labels".into(),
            expected: logits.len(),
            actual: labels.len(),
        });
    }
    check_labels(labels)?;
    let targets: Vec<f32> = labels.iter().map(|&l| l as f32).collect();
    let mut scratch = vec![0.0; logits.len()];
    Ok(bce_with_targets(logits, &targets, &mut scratch))
}

/// Occupancy logits for a batch of points.
pub fn mlp_forward(params: &MlpParams, points: &[Vec3]) -> Result<Vec<f32>> {
    params.validate()?;
    let theta = params.to_flat();
    let mut ws = MlpWorkspace::default();
    Ok(forward_flat(&theta, points, &PeConfig::default(), &mut ws).to_vec())
}

/// Loss and exact gradients of the mean BCE with respect to every tensor.
pub fn mlp_gradients(params: &MlpParams, points: &[Vec3], labels: &[u8]) -> Result<(f64, MlpParams)> {
    check_labels(labels)?;
    let targets: Vec<f32> = labels.iter().map(|&l| l as f32).collect();
    mlp_gradients_soft(params, points, &targets)
}

/// Like [`mlp_gradients`] but with real-valued targets.
pub fn mlp_gradients_soft(params: &MlpParams, points: &[Vec3], targets: &[f32]) -> Result<(f64, MlpParams)> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if points.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            tensor: "labels".into(),
            expected: points.len(),
            actual: targets.len(),
        });
    }
    let theta = params.to_flat();
    let mut ws = MlpWorkspace::default();
    let mut d_logits = vec![0.0; points.len()];
    let loss = {
        let logits = forward_flat(&theta, points, &PeConfig::default(), &mut ws);
        bce_with_targets(logits, targets, &mut d_logits)
    };
    let mut grad = vec![0.0; PARAM_COUNT];
    backward_flat(&theta, &mut ws, &d_logits, &mut grad);
    Ok((loss, MlpParams::from_flat(&grad)?))
}
