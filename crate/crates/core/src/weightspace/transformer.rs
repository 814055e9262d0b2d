//! Transformer denoiser over tokenized weight vectors.
//!
//! Each of the eight signature tensors is projected by its own affine map to
//! an `n_emb` token. A ninth token carries the diffusion step: its
//! sinusoidal embedding through one more affine map. A learned positional
//! table is added to all nine. Pre-norm encoder blocks follow, then a final
//! LayerNorm. Per-tensor output projections map token `i` back to the
//! elements of tensor `i`, and the results are concatenated in signature
//! order.
//!
//! All parameters live in one flat `Vec<f32>`. Linear weights are stored
//! `fan_in × fan_out` row-major (so a layer is `x·W + b`). Allocation order,
//! which is also the checkpoint order, is: input projections `(W, b)` per
//! tensor, the time projection, the positional table, then per block
//! `ln1.γ ln1.β qkv proj ln2.γ ln2.β fc1 fc2`, then `ln_f.γ ln_f.β`, then the
//! output projections per tensor.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::theta::{timestep_embedding, ShapeSignature};
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::tensor::{accumulate_column_sums, add_row_bias, gemm, MatMut, MatRef};

const LN_EPS: f32 = 1e-5;
const POS_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiserConfig {
    pub n_emb: usize,
    pub layers: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub seed: u64,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            n_emb: 2880,
            layers: 12,
            heads: 16,
            mlp_ratio: 4,
            seed: 0,
        }
    }
}

impl DenoiserConfig {
    /// Small preset that trains on a laptop CPU.
    pub fn desk() -> Self {
        Self {
            n_emb: 256,
            layers: 4,
            heads: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_emb == 0 || self.heads == 0 || self.n_emb % self.heads != 0 {
            return Err(Error::invalid(format!(
                "n_emb {} must be a positive multiple of heads {}",
                self.n_emb, self.heads
            )));
        }
        if self.layers == 0 || self.mlp_ratio == 0 {
            return Err(Error::invalid("layers and mlp_ratio must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gamma: usize,
    beta: usize,
}

#[derive(Debug, Clone)]
struct Block {
    ln1: Norm,
    qkv: Linear,
    proj: Linear,
    ln2: Norm,
    fc1: Linear,
    fc2: Linear,
}

#[derive(Debug, Clone)]
struct Layout {
    input: Vec<Linear>,
    time: Linear,
    pos: usize,
    blocks: Vec<Block>,
    ln_f: Norm,
    output: Vec<Linear>,
    total: usize,
}

impl Layout {
    fn new(cfg: &DenoiserConfig, sig: &ShapeSignature) -> Self {
        let d = cfg.n_emb;
        let mut next = 0usize;
        let mut take = |n: usize| {
            let o = next;
            next += n;
            o
        };
        let linear = |take: &mut dyn FnMut(usize) -> usize, fan_in: usize, fan_out: usize| Linear {
            w: take(fan_in * fan_out),
            b: take(fan_out),
            fan_in,
            fan_out,
        };
        let input = sig.0.iter().map(|&n| linear(&mut take, n, d)).collect();
        let time = linear(&mut take, d, d);
        let pos = take((sig.len() + 1) * d);
        let blocks = (0..cfg.layers)
            .map(|_| Block {
                ln1: Norm {
                    gamma: take(d),
                    beta: take(d),
                },
                qkv: linear(&mut take, d, 3 * d),
                proj: linear(&mut take, d, d),
                ln2: Norm {
                    gamma: take(d),
                    beta: take(d),
                },
                fc1: linear(&mut take, d, cfg.mlp_ratio * d),
                fc2: linear(&mut take, cfg.mlp_ratio * d, d),
            })
            .collect();
        let ln_f = Norm {
            gamma: take(d),
            beta: take(d),
        };
        let output = sig.0.iter().map(|&n| linear(&mut take, d, n)).collect();
        Self {
            input,
            time,
            pos,
            blocks,
            ln_f,
            output,
            total: next,
        }
    }

    fn linears(&self) -> Vec<Linear> {
        let mut v: Vec<Linear> = self.input.clone();
        v.push(self.time);
        for b in &self.blocks {
            v.extend([b.qkv, b.proj, b.fc1, b.fc2]);
        }
        v.extend(self.output.iter().copied());
        v
    }

    fn norms(&self) -> Vec<Norm> {
        let mut v: Vec<Norm> = self.blocks.iter().flat_map(|b| [b.ln1, b.ln2]).collect();
        v.push(self.ln_f);
        v
    }
}

fn linear_forward(p: &[f32], lin: &Linear, x: MatRef<'_>, y: &mut [f32], y_stride: usize) {
    let w = MatRef::new(&p[lin.w..lin.w + lin.fan_in * lin.fan_out], lin.fan_in, lin.fan_out);
    gemm(1.0, x, w, 0.0, MatMut::strided(y, x.rows, lin.fan_out, y_stride));
    add_row_bias(y, y_stride, x.rows, &p[lin.b..lin.b + lin.fan_out]);
}

/// Accumulates parameter gradients and optionally writes `dx`.
fn linear_backward(p: &[f32], g: &mut [f32], lin: &Linear, x: MatRef<'_>, dy: MatRef<'_>, dx: Option<(&mut [f32], usize)>) {
    let nw = lin.fan_in * lin.fan_out;
    gemm(1.0, x.t(), dy, 1.0, MatMut::new(&mut g[lin.w..lin.w + nw], lin.fan_in, lin.fan_out));
    accumulate_column_sums(&mut g[lin.b..lin.b + lin.fan_out], dy.data, dy.row_stride, dy.rows);
    if let Some((dx, stride)) = dx {
        let w = MatRef::new(&p[lin.w..lin.w + nw], lin.fan_in, lin.fan_out);
        gemm(1.0, dy, w.t(), 0.0, MatMut::strided(dx, dy.rows, lin.fan_in, stride));
    }
}

struct NormCache {
    xhat: Vec<f32>,
    rstd: Vec<f32>,
}

fn norm_forward(p: &[f32], n: &Norm, x: &[f32], d: usize, y: &mut [f32]) -> NormCache {
    let rows = x.len() / d;
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = vec![0.0; rows];
    let (gamma, beta) = (&p[n.gamma..n.gamma + d], &p[n.beta..n.beta + d]);
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / d as f64;
        let var = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / d as f64;
        let s = (1.0 / (var + LN_EPS as f64).sqrt()) as f32;
        rstd[r] = s;
        for c in 0..d {
            let h = (row[c] - mean as f32) * s;
            xhat[r * d + c] = h;
            y[r * d + c] = gamma[c] * h + beta[c];
        }
    }
    NormCache { xhat, rstd }
}

/// Adds the input gradient into `dx`.
fn norm_backward(p: &[f32], g: &mut [f32], n: &Norm, cache: &NormCache, dy: &[f32], d: usize, dx: &mut [f32]) {
    let rows = dy.len() / d;
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut sum_dxh = 0.0f64;
        let mut sum_dxh_xh = 0.0f64;
        for c in 0..d {
            g[n.gamma + c] += dyr[c] * xh[c];
            g[n.beta + c] += dyr[c];
            let dxh = (dyr[c] * p[n.gamma + c]) as f64;
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xh[c] as f64;
        }
        let (m1, m2) = ((sum_dxh / d as f64) as f32, (sum_dxh_xh / d as f64) as f32);
        let s = cache.rstd[r];
        for c in 0..d {
            let dxh = dyr[c] * p[n.gamma + c];
            dx[r * d + c] += s * (dxh - m1 - xh[c] * m2);
        }
    }
}

const GELU_C: f32 = 0.797_884_6; // √(2/π)
const GELU_K: f32 = 0.044_715;

#[inline]
fn gelu(u: f32) -> f32 {
    0.5 * u * (1.0 + (GELU_C * (u + GELU_K * u * u * u)).tanh())
}

#[inline]
fn gelu_grad(u: f32) -> f32 {
    let t = (GELU_C * (u + GELU_K * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * u * u)
}

struct BlockCache {
    ln1: NormCache,
    a: Vec<f32>,
    qkv: Vec<f32>,
    probs: Vec<f32>,
    attn: Vec<f32>,
    ln2: NormCache,
    m: Vec<f32>,
    u: Vec<f32>,
    act: Vec<f32>,
}

struct Cache {
    batch: usize,
    emb: Vec<f32>,
    blocks: Vec<BlockCache>,
    ln_f: NormCache,
    z: Vec<f32>,
}

/// The weight-space denoiser: predicts clean (standardized) weights from
/// noisy ones and a diffusion step.
#[derive(Debug, Clone)]
pub struct TransformerDenoiser {
    cfg: DenoiserConfig,
    signature: ShapeSignature,
    layout: Layout,
    params: Vec<f32>,
}

impl TransformerDenoiser {
    pub fn new(cfg: DenoiserConfig, signature: ShapeSignature) -> Result<Self> {
        cfg.validate()?;
        if signature.is_empty() || signature.0.contains(&0) {
            return Err(Error::invalid("signature needs non-empty tensors"));
        }
        let layout = Layout::new(&cfg, &signature);
        let mut params = vec![0.0f32; layout.total];
        let mut rng = seeded(cfg.seed);
        for lin in layout.linears() {
            let bound = (1.0 / lin.fan_in as f64).sqrt() as f32;
            for v in &mut params[lin.w..lin.w + lin.fan_in * lin.fan_out] {
                *v = rng.random_range(-bound..bound);
            }
            for v in &mut params[lin.b..lin.b + lin.fan_out] {
                *v = rng.random_range(-bound..bound);
            }
        }
        let normal = Normal::new(0.0, POS_INIT_STD).unwrap();
        let n_pos = (signature.len() + 1) * cfg.n_emb;
        for v in &mut params[layout.pos..layout.pos + n_pos] {
            *v = normal.sample(&mut rng) as f32;
        }
        for n in layout.norms() {
            params[n.gamma..n.gamma + cfg.n_emb].fill(1.0);
        }
        Ok(Self {
            cfg,
            signature,
            layout,
            params,
        })
    }

    /// Rebuilds a model from a flat parameter vector in layout order.
    pub fn from_params(cfg: DenoiserConfig, signature: ShapeSignature, params: Vec<f32>) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg, &signature);
        if params.len() != layout.total {
            return Err(Error::ShapeMismatch {
                tensor: "denoiser parameters".into(),
                expected: layout.total,
                actual: params.len(),
            });
        }
        Ok(Self {
            cfg,
            signature,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.cfg
    }

    pub fn signature(&self) -> &ShapeSignature {
        &self.signature
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn theta_len(&self) -> usize {
        self.signature.total()
    }

    fn tokens(&self) -> usize {
        self.signature.len() + 1
    }

    fn check_batch(&self, thetas: &[f32], ts: &[usize]) -> Result<()> {
        let n = self.theta_len();
        if ts.is_empty() || thetas.len() != ts.len() * n {
            return Err(Error::ShapeMismatch {
                tensor: "theta batch".into(),
                expected: ts.len() * n,
                actual: thetas.len(),
            });
        }
        if let Some(i) = thetas.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("denoiser input element {i}")));
        }
        Ok(())
    }

    /// The `9 × n_emb` token matrix (before the encoder blocks) for a batch.
    fn embed(&self, thetas: &[f32], ts: &[usize]) -> (Vec<f32>, Vec<f32>) {
        let (p, d, s, n) = (&self.params, self.cfg.n_emb, self.tokens(), self.theta_len());
        let b = ts.len();
        let mut x = vec![0.0f32; b * s * d];
        for (i, (lin, off)) in self.layout.input.iter().zip(self.signature.offsets()).enumerate() {
            let xi = MatRef::strided(&thetas[off..], b, lin.fan_in, n);
            linear_forward(p, lin, xi, &mut x[i * d..], s * d);
        }
        let emb: Vec<f32> = ts.iter().flat_map(|&t| timestep_embedding(t, d)).collect();
        linear_forward(p, &self.layout.time, MatRef::new(&emb, b, d), &mut x[(s - 1) * d..], s * d);
        let pos = &p[self.layout.pos..self.layout.pos + s * d];
        for row in x.chunks_exact_mut(s * d) {
            for (v, q) in row.iter_mut().zip(pos) {
                *v += q;
            }
        }
        (x, emb)
    }

    /// Token sequence for one input, shape `9 × n_emb` row-major.
    pub fn tokenize(&self, theta: &[f32], t: usize) -> Result<Vec<f32>> {
        self.check_batch(theta, &[t])?;
        Ok(self.embed(theta, &[t]).0)
    }

    fn forward(&self, thetas: &[f32], ts: &[usize]) -> (Vec<f32>, Cache) {
        let (p, d, s, n) = (&self.params, self.cfg.n_emb, self.tokens(), self.theta_len());
        let (b, h) = (ts.len(), self.cfg.heads);
        let rows = b * s;
        let (mut x, emb) = self.embed(thetas, ts);
        let mut blocks = Vec::with_capacity(self.layout.blocks.len());
        for blk in &self.layout.blocks {
            let mut a = vec![0.0; rows * d];
            let ln1 = norm_forward(p, &blk.ln1, &x, d, &mut a);
            let mut qkv = vec![0.0; rows * 3 * d];
            linear_forward(p, &blk.qkv, MatRef::new(&a, rows, d), &mut qkv, 3 * d);
            let (probs, attn) = attention_forward(&qkv, b, s, d, h);
            let mut x_mid = vec![0.0; rows * d];
            linear_forward(p, &blk.proj, MatRef::new(&attn, rows, d), &mut x_mid, d);
            for (v, r) in x_mid.iter_mut().zip(&x) {
                *v += r;
            }
            let mut m = vec![0.0; rows * d];
            let ln2 = norm_forward(p, &blk.ln2, &x_mid, d, &mut m);
            let hid = blk.fc1.fan_out;
            let mut u = vec![0.0; rows * hid];
            linear_forward(p, &blk.fc1, MatRef::new(&m, rows, d), &mut u, hid);
            let act: Vec<f32> = u.iter().map(|&v| gelu(v)).collect();
            linear_forward(p, &blk.fc2, MatRef::new(&act, rows, hid), &mut x, d);
            for (v, r) in x.iter_mut().zip(&x_mid) {
                *v += r;
            }
            blocks.push(BlockCache {
                ln1,
                a,
                qkv,
                probs,
                attn,
                ln2,
                m,
                u,
                act,
            });
        }
        let mut z = vec![0.0; rows * d];
        let ln_f = norm_forward(p, &self.layout.ln_f, &x, d, &mut z);
        let mut out = vec![0.0f32; b * n];
        for (i, (lin, off)) in self.layout.output.iter().zip(self.signature.offsets()).enumerate() {
            let zi = MatRef::strided(&z[i * d..], b, d, s * d);
            linear_forward(p, lin, zi, &mut out[off..], n);
        }
        let cache = Cache {
            batch: b,
            emb,
            blocks,
            ln_f,
            z,
        };
        (out, cache)
    }

    fn backward(&self, thetas: &[f32], cache: &Cache, d_out: &[f32], g: &mut [f32]) {
        let (p, d, s, n) = (&self.params, self.cfg.n_emb, self.tokens(), self.theta_len());
        let (b, h) = (cache.batch, self.cfg.heads);
        let rows = b * s;
        let mut dz = vec![0.0f32; rows * d];
        for (i, (lin, off)) in self.layout.output.iter().zip(self.signature.offsets()).enumerate() {
            let zi = MatRef::strided(&cache.z[i * d..], b, d, s * d);
            let dyi = MatRef::strided(&d_out[off..], b, lin.fan_out, n);
            linear_backward(p, g, lin, zi, dyi, Some((&mut dz[i * d..], s * d)));
        }
        let mut dx = vec![0.0f32; rows * d];
        norm_backward(p, g, &self.layout.ln_f, &cache.ln_f, &dz, d, &mut dx);

        for (blk, bc) in self.layout.blocks.iter().zip(&cache.blocks).rev() {
            let hid = blk.fc1.fan_out;
            let mut d_act = vec![0.0f32; rows * hid];
            linear_backward(p, g, &blk.fc2, MatRef::new(&bc.act, rows, hid), MatRef::new(&dx, rows, d), Some((&mut d_act, hid)));
            for (da, &u) in d_act.iter_mut().zip(&bc.u) {
                *da *= gelu_grad(u);
            }
            let mut dm = vec![0.0f32; rows * d];
            linear_backward(p, g, &blk.fc1, MatRef::new(&bc.m, rows, d), MatRef::new(&d_act, rows, hid), Some((&mut dm, d)));
            norm_backward(p, g, &blk.ln2, &bc.ln2, &dm, d, &mut dx);

            let mut d_attn = vec![0.0f32; rows * d];
            linear_backward(p, g, &blk.proj, MatRef::new(&bc.attn, rows, d), MatRef::new(&dx, rows, d), Some((&mut d_attn, d)));
            let d_qkv = attention_backward(&bc.qkv, &bc.probs, &d_attn, b, s, d, h);
            let mut da = vec![0.0f32; rows * d];
            linear_backward(p, g, &blk.qkv, MatRef::new(&bc.a, rows, d), MatRef::new(&d_qkv, rows, 3 * d), Some((&mut da, d)));
            norm_backward(p, g, &blk.ln1, &bc.ln1, &da, d, &mut dx);
        }

        let pos = self.layout.pos;
        for row in dx.chunks_exact(s * d) {
            for (gp, v) in g[pos..pos + s * d].iter_mut().zip(row) {
                *gp += v;
            }
        }
        for (i, (lin, off)) in self.layout.input.iter().zip(self.signature.offsets()).enumerate() {
            let xi = MatRef::strided(&thetas[off..], b, lin.fan_in, n);
            let dyi = MatRef::strided(&dx[i * d..], b, d, s * d);
            linear_backward(p, g, lin, xi, dyi, None);
        }
        let dyt = MatRef::strided(&dx[(s - 1) * d..], b, d, s * d);
        linear_backward(p, g, &self.layout.time, MatRef::new(&cache.emb, b, d), dyt, None);
    }

    /// Predicted clean weights for a batch of noisy inputs (row-major,
    /// one theta per row) at steps `ts`.
    pub fn predict(&self, thetas: &[f32], ts: &[usize]) -> Result<Vec<f32>> {
        self.check_batch(thetas, ts)?;
        Ok(self.forward(thetas, ts).0)
    }

    pub fn denoise(&self, theta_t: &[f32], t: usize) -> Result<Vec<f32>> {
        self.predict(theta_t, &[t])
    }

    /// Mean squared error of the prediction against `targets`, and its
    /// gradient with respect to every parameter (overwriting `grad`).
    pub fn loss_and_grad(&self, thetas: &[f32], ts: &[usize], targets: &[f32], grad: &mut [f32]) -> Result<f64> {
        self.check_batch(thetas, ts)?;
        if targets.len() != thetas.len() || grad.len() != self.param_count() {
            return Err(Error::invalid("target or gradient buffer has the wrong size"));
        }
        let (out, cache) = self.forward(thetas, ts);
        let count = out.len() as f64;
        let mut loss = 0.0f64;
        let mut d_out = vec![0.0f32; out.len()];
        for ((d, &o), &y) in d_out.iter_mut().zip(&out).zip(targets) {
            let e = (o - y) as f64;
            loss += e * e;
            *d = (2.0 * e / count) as f32;
        }
        grad.fill(0.0);
        self.backward(thetas, &cache, &d_out, grad);
        Ok(loss / count)
    }
}

fn attention_forward(qkv: &[f32], b: usize, s: usize, d: usize, h: usize) -> (Vec<f32>, Vec<f32>) {
    let dh = d / h;
    let scale = 1.0 / (dh as f32).sqrt();
    let mut probs = vec![0.0f32; b * h * s * s];
    let mut out = vec![0.0f32; b * s * d];
    let at = |bi: usize, i: usize, part: usize, head: usize| (bi * s + i) * 3 * d + part * d + head * dh;
    for bi in 0..b {
        for head in 0..h {
            let pbase = (bi * h + head) * s * s;
            for i in 0..s {
                let q = &qkv[at(bi, i, 0, head)..][..dh];
                let row = &mut probs[pbase + i * s..pbase + (i + 1) * s];
                let mut max = f32::NEG_INFINITY;
                for (j, r) in row.iter_mut().enumerate() {
                    let k = &qkv[at(bi, j, 1, head)..][..dh];
                    *r = q.iter().zip(k).map(|(a, c)| a * c).sum::<f32>() * scale;
                    max = max.max(*r);
                }
                let mut sum = 0.0;
                for r in row.iter_mut() {
                    *r = (*r - max).exp();
                    sum += *r;
                }
                for r in row.iter_mut() {
                    *r /= sum;
                }
                let o = &mut out[(bi * s + i) * d + head * dh..][..dh];
                for (j, &pj) in row.iter().enumerate() {
                    let v = &qkv[at(bi, j, 2, head)..][..dh];
                    for (oc, vc) in o.iter_mut().zip(v) {
                        *oc += pj * vc;
                    }
                }
            }
        }
    }
    (probs, out)
}

fn attention_backward(qkv: &[f32], probs: &[f32], d_out: &[f32], b: usize, s: usize, d: usize, h: usize) -> Vec<f32> {
    let dh = d / h;
    let scale = 1.0 / (dh as f32).sqrt();
    let mut d_qkv = vec![0.0f32; b * s * 3 * d];
    let at = |bi: usize, i: usize, part: usize, head: usize| (bi * s + i) * 3 * d + part * d + head * dh;
    let mut dp = vec![0.0f32; s];
    for bi in 0..b {
        for head in 0..h {
            let pbase = (bi * h + head) * s * s;
            for i in 0..s {
                let dout = &d_out[(bi * s + i) * d + head * dh..][..dh];
                let row = &probs[pbase + i * s..pbase + (i + 1) * s];
                // dV_j += p_ij·dO_i and dP_ij = dO_i·V_j
                for j in 0..s {
                    let v = &qkv[at(bi, j, 2, head)..][..dh];
                    dp[j] = dout.iter().zip(v).map(|(a, c)| a * c).sum();
                    let dv = &mut d_qkv[at(bi, j, 2, head)..][..dh];
                    for (x, y) in dv.iter_mut().zip(dout) {
                        *x += row[j] * y;
                    }
                }
                let dot: f32 = row.iter().zip(&dp).map(|(a, c)| a * c).sum();
                for j in 0..s {
                    let ds = row[j] * (dp[j] - dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for c in 0..dh {
                        let kjc = qkv[at(bi, j, 1, head) + c];
                        let qic = qkv[at(bi, i, 0, head) + c];
                        d_qkv[at(bi, i, 0, head) + c] += ds * kjc;
                        d_qkv[at(bi, j, 1, head) + c] += ds * qic;
                    }
                }
            }
        }
    }
    d_qkv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::StandardNormal;

    fn tiny() -> TransformerDenoiser {
        let cfg = DenoiserConfig {
            n_emb: 16,
            layers: 1,
            heads: 2,
            mlp_ratio: 4,
            seed: 3,
        };
        TransformerDenoiser::new(cfg, ShapeSignature::default()).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Vec<f32> {
        let mut rng = seeded(seed);
        (0..n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()
    }

    #[test]
    fn token_shape_and_output_length() {
        let m = tiny();
        let theta = noise(m.theta_len(), 1);
        assert_eq!(m.tokenize(&theta, 5).unwrap().len(), 9 * 16);
        assert_eq!(m.denoise(&theta, 5).unwrap().len(), 36737);
    }

    #[test]
    fn zero_projections_leave_positional_table() {
        let mut m = tiny();
        let pos = m.layout.pos;
        let table = m.params[pos..pos + 9 * 16].to_vec();
        let lins = m.layout.linears();
        for lin in lins.iter().take(9) {
            m.params[lin.w..lin.w + lin.fan_in * lin.fan_out].fill(0.0);
            m.params[lin.b..lin.b + lin.fan_out].fill(0.0);
        }
        let tokens = m.tokenize(&vec![0.0; 36737], 17).unwrap();
        assert_eq!(tokens, table);
    }

    #[test]
    fn tokens_are_local_to_tensors() {
        let m = tiny();
        let a = noise(36737, 2);
        let mut b = a.clone();
        *b.last_mut().unwrap() += 1.0;
        let (ta, tb) = (m.tokenize(&a, 3).unwrap(), m.tokenize(&b, 3).unwrap());
        for tok in 0..9 {
            let same = ta[tok * 16..(tok + 1) * 16] == tb[tok * 16..(tok + 1) * 16];
            assert_eq!(same, tok != 7, "token {tok}");
        }
    }

    #[test]
    fn tokenize_is_affine() {
        let m = tiny();
        let (a, b) = (noise(36737, 4), noise(36737, 5));
        let w = 0.3f32;
        let mix: Vec<f32> = a.iter().zip(&b).map(|(x, y)| w * x + (1.0 - w) * y).collect();
        let (ta, tb, tm) = (m.tokenize(&a, 9).unwrap(), m.tokenize(&b, 9).unwrap(), m.tokenize(&mix, 9).unwrap());
        for i in 0..tm.len() {
            assert!((tm[i] - (w * ta[i] + (1.0 - w) * tb[i])).abs() < 1e-5 * (1.0 + tm[i].abs()));
        }
    }

    #[test]
    fn duplicated_batch_rows_agree() {
        let m = tiny();
        let a = noise(36737, 6);
        let mut two = a.clone();
        two.extend_from_slice(&a);
        let out = m.predict(&two, &[40, 40]).unwrap();
        assert_eq!(out[..36737], out[36737..]);
        assert_eq!(out[..36737], m.denoise(&a, 40).unwrap()[..]);
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = tiny();
        let mut a = noise(36737, 7);
        a[10] = f32::NAN;
        assert!(matches!(m.denoise(&a, 1), Err(Error::NonFinite(_))));
    }

    #[test]
    fn param_count_of_desk_preset() {
        let m = TransformerDenoiser::new(DenoiserConfig::desk(), ShapeSignature::default()).unwrap();
        let d = 256;
        let blocks = 4 * (4 * d + (d * 3 * d + 3 * d) + (d * d + d) + (d * 4 * d + 4 * d) + (4 * d * d + d));
        let io = 2 * (36737 * d) + 8 * d + 36737 + d * d + d + 9 * d + 2 * d;
        assert_eq!(m.param_count(), blocks + io);
    }
}
