//! Spiral convolution layers with per-layer gate/bias conditioning.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::SpiralTable;
use crate::error::{Error, Result};
use crate::linalg::{affine_row, gemm};
use crate::params::{ParameterSet, Tensor};

/// Borrowed weights for one spiral convolution.
#[derive(Debug, Clone, Copy)]
pub struct SpiralConvWeights<'a> {
    /// `(L * C_in) x C_out`, row-major.
    pub weight: &'a [f64],
    /// `C_out`.
    pub bias: &'a [f64],
    pub gate: Option<GateWeights<'a>>,
}

/// Affine maps of the condition vector producing `gamma` and `beta`.
#[derive(Debug, Clone, Copy)]
pub struct GateWeights<'a> {
    pub gamma_weight: &'a [f64],
    pub gamma_bias: &'a [f64],
    pub beta_weight: &'a [f64],
    pub beta_bias: &'a [f64],
}

/// Copies features along each spiral row; sentinel entries gather zeros.
pub(crate) fn gather(features: &[f64], channels: usize, table: &SpiralTable, out: &mut Vec<f64>) {
    let n = table.num_vertices();
    let l = table.length();
    out.clear();
    out.resize(n * l * channels, 0.0);
    for (slot, &src) in out.chunks_exact_mut(channels).zip(table.entries()) {
        if src != n {
            slot.copy_from_slice(&features[src * channels..(src + 1) * channels]);
        }
    }
}

/// Adjoint of [`gather`]: accumulates row gradients back onto vertices.
pub(crate) fn scatter_add(grad_rows: &[f64], channels: usize, table: &SpiralTable, out: &mut [f64]) {
    let n = table.num_vertices();
    for (slot, &dst) in grad_rows.chunks_exact(channels).zip(table.entries()) {
        if dst != n {
            for (o, g) in out[dst * channels..(dst + 1) * channels].iter_mut().zip(slot) {
                *o += g;
            }
        }
    }
}

/// One conditioned spiral convolution, before the nonlinearity:
/// `(gather(x) W + b) * (1 + gamma(c)) + beta(c)`.
///
/// `features` is `N x in_channels`; the result is `N x C_out`.
pub fn spiral_conv(
    features: &[f64],
    in_channels: usize,
    table: &SpiralTable,
    weights: &SpiralConvWeights<'_>,
    condition: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = table.num_vertices();
    let cout = weights.bias.len();
    let k = table.length() * in_channels;
    if features.len() != n * in_channels {
        return Err(Error::Shape(format!(
            "features have {} values, expected {n} x {in_channels}",
            features.len()
        )));
    }
    if weights.weight.len() != k * cout {
        return Err(Error::Shape(format!(
            "weight has {} values, expected {k} x {cout}",
            weights.weight.len()
        )));
    }
    let mut g = Vec::new();
    gather(features, in_channels, table, &mut g);
    let mut h = vec![0.0; n * cout];
    gemm(n, k, cout, &g, false, weights.weight, false, &mut h, false);
    for row in h.chunks_exact_mut(cout) {
        for (x, b) in row.iter_mut().zip(weights.bias) {
            *x += b;
        }
    }
    if let Some(gate) = weights.gate {
        let c = condition.ok_or_else(|| Error::Shape("gated layer needs a condition".into()))?;
        if gate.gamma_weight.len() != c.len() * cout || gate.beta_weight.len() != c.len() * cout {
            return Err(Error::Shape("gate weights do not match condition length".into()));
        }
        let mut gamma = vec![0.0; cout];
        let mut beta = vec![0.0; cout];
        affine_row(c, gate.gamma_weight, gate.gamma_bias, &mut gamma);
        affine_row(c, gate.beta_weight, gate.beta_bias, &mut beta);
        modulate(&mut h, &gamma, &beta);
    }
    Ok(h)
}

fn modulate(h: &mut [f64], gamma: &[f64], beta: &[f64]) {
    let cout = gamma.len();
    for row in h.chunks_exact_mut(cout) {
        for ((x, g), b) in row.iter_mut().zip(gamma).zip(beta) {
            *x = *x * (1.0 + g) + b;
        }
    }
}

#[inline]
pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Derivative of ELU expressed through its input.
#[inline]
pub(crate) fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

pub(crate) fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, len: usize, scale: f64) -> Vec<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| scale * rng.random_range(-a..=a)).collect()
}

#[derive(Debug, Clone)]
struct LayerSlots {
    weight: usize,
    bias: usize,
    gate: Option<[usize; 4]>,
}

#[derive(Debug, Clone)]
struct Layer {
    in_channels: usize,
    out_channels: usize,
    table: Arc<SpiralTable>,
    slots: LayerSlots,
}

/// A sequence of spiral layers, each followed by ELU, all at full mesh
/// resolution. Parameters live in an external [`ParameterSet`].
#[derive(Debug, Clone)]
pub(crate) struct SpiralStack {
    layers: Vec<Layer>,
    cond_dim: usize,
}

#[derive(Debug, Default)]
pub(crate) struct LayerCache {
    gathered: Vec<f64>,
    pre: Vec<f64>,
    gamma: Vec<f64>,
    act: Vec<f64>,
}

#[derive(Debug, Default)]
pub(crate) struct StackCache {
    layers: Vec<LayerCache>,
    /// Output of every layer; `outputs.last()` is the stack output.
    outputs: Vec<Vec<f64>>,
}

impl StackCache {
    pub(crate) fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl SpiralStack {
    /// Registers parameters for each layer under `prefix` and returns the
    /// layout. `cond_dim == 0` builds an unconditioned stack.
    pub(crate) fn init(
        params: &mut ParameterSet,
        prefix: &str,
        in_channels: usize,
        widths: &[usize],
        tables: &[Arc<SpiralTable>],
        cond_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(widths.len());
        let mut cin = in_channels;
        for (i, (&cout, table)) in widths.iter().zip(tables).enumerate() {
            let l = table.length();
            let k = l * cin;
            let weight = params.push(Tensor::new(
                format!("{prefix}{i}.weight"),
                vec![k, cout],
                glorot(rng, k, cout, k * cout, 1.0),
            )?)?;
            let bias = params.push(Tensor::zeros(format!("{prefix}{i}.bias"), vec![cout]))?;
            let gate = if cond_dim > 0 {
                let gw = params.push(Tensor::new(
                    format!("{prefix}{i}.gamma.weight"),
                    vec![cond_dim, cout],
                    glorot(rng, cond_dim, cout, cond_dim * cout, 1.0),
                )?)?;
                let gb = params.push(Tensor::zeros(format!("{prefix}{i}.gamma.bias"), vec![cout]))?;
                let bw = params.push(Tensor::new(
                    format!("{prefix}{i}.beta.weight"),
                    vec![cond_dim, cout],
                    glorot(rng, cond_dim, cout, cond_dim * cout, 1.0),
                )?)?;
                let bb = params.push(Tensor::zeros(format!("{prefix}{i}.beta.bias"), vec![cout]))?;
                Some([gw, gb, bw, bb])
            } else {
                None
            };
            layers.push(Layer {
                in_channels: cin,
                out_channels: cout,
                table: Arc::clone(table),
                slots: LayerSlots { weight, bias, gate },
            });
            cin = cout;
        }
        Ok(Self { layers, cond_dim })
    }

    pub(crate) fn out_channels(&self) -> usize {
        self.layers.last().map(|l| l.out_channels).unwrap_or(0)
    }

    pub(crate) fn weights<'a>(&self, params: &'a ParameterSet, i: usize) -> SpiralConvWeights<'a> {
        let s = &self.layers[i].slots;
        SpiralConvWeights {
            weight: params.slot(s.weight),
            bias: params.slot(s.bias),
            gate: s.gate.map(|[gw, gb, bw, bb]| GateWeights {
                gamma_weight: params.slot(gw),
                gamma_bias: params.slot(gb),
                beta_weight: params.slot(bw),
                beta_bias: params.slot(bb),
            }),
        }
    }

    pub(crate) fn forward(&self, params: &ParameterSet, x: &[f64], cond: &[f64]) -> StackCache {
        debug_assert_eq!(cond.len(), self.cond_dim);
        let mut cache = StackCache {
            layers: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
        };
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { x } else { &cache.outputs[i - 1] };
            let n = layer.table.num_vertices();
            let cout = layer.out_channels;
            let k = layer.table.length() * layer.in_channels;
            let w = self.weights(params, i);
            let mut lc = LayerCache::default();
            gather(input, layer.in_channels, &layer.table, &mut lc.gathered);
            lc.pre = vec![0.0; n * cout];
            gemm(n, k, cout, &lc.gathered, false, w.weight, false, &mut lc.pre, false);
            for row in lc.pre.chunks_exact_mut(cout) {
                for (v, b) in row.iter_mut().zip(w.bias) {
                    *v += b;
                }
            }
            lc.act = lc.pre.clone();
            if let Some(g) = w.gate {
                lc.gamma = vec![0.0; cout];
                let mut beta = vec![0.0; cout];
                affine_row(cond, g.gamma_weight, g.gamma_bias, &mut lc.gamma);
                affine_row(cond, g.beta_weight, g.beta_bias, &mut beta);
                modulate(&mut lc.act, &lc.gamma, &beta);
            }
            let out = lc.act.iter().map(|&a| elu(a)).collect();
            cache.layers.push(lc);
            cache.outputs.push(out);
        }
        cache
    }

    /// Backpropagates `d_out` (gradient w.r.t. the stack output). Parameter
    /// gradients are accumulated into `grads`; returns the gradients w.r.t.
    /// the stack input and the condition vector.
    pub(crate) fn backward(
        &self,
        params: &ParameterSet,
        x: &[f64],
        cond: &[f64],
        cache: &StackCache,
        d_out: Vec<f64>,
        grads: &mut ParameterSet,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut d_cond = vec![0.0; self.cond_dim];
        let mut d = d_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let lc = &cache.layers[i];
            let n = layer.table.num_vertices();
            let cout = layer.out_channels;
            let cin = layer.in_channels;
            let k = layer.table.length() * cin;
            // through ELU
            for (g, a) in d.iter_mut().zip(&lc.act) {
                *g *= elu_grad(*a);
            }
            // through modulation
            let mut d_pre = d;
            if let Some([gw, gb, bw, bb]) = layer.slots.gate {
                let mut d_gamma = vec![0.0; cout];
                let mut d_beta = vec![0.0; cout];
                for (drow, hrow) in d_pre.chunks_exact(cout).zip(lc.pre.chunks_exact(cout)) {
                    for j in 0..cout {
                        d_gamma[j] += drow[j] * hrow[j];
                        d_beta[j] += drow[j];
                    }
                }
                for row in d_pre.chunks_exact_mut(cout) {
                    for (x, g) in row.iter_mut().zip(&lc.gamma) {
                        *x *= 1.0 + g;
                    }
                }
                for (slot_w, slot_b, dv) in [(gw, gb, &d_gamma), (bw, bb, &d_beta)] {
                    let wmat = params.slot(slot_w);
                    for ci in 0..cond.len() {
                        let wrow = &wmat[ci * cout..(ci + 1) * cout];
                        d_cond[ci] += wrow.iter().zip(dv.iter()).map(|(a, b)| a * b).sum::<f64>();
                    }
                    let gwm = grads.slot_mut(slot_w);
                    for (ci, &c) in cond.iter().enumerate() {
                        if c != 0.0 {
                            for (gv, dvj) in gwm[ci * cout..(ci + 1) * cout].iter_mut().zip(dv.iter()) {
                                *gv += c * dvj;
                            }
                        }
                    }
                    for (gv, dvj) in grads.slot_mut(slot_b).iter_mut().zip(dv.iter()) {
                        *gv += dvj;
                    }
                }
            }
            // affine part
            {
                let gb = grads.slot_mut(layer.slots.bias);
                for row in d_pre.chunks_exact(cout) {
                    for (g, v) in gb.iter_mut().zip(row) {
                        *g += v;
                    }
                }
            }
            gemm(k, n, cout, &lc.gathered, true, &d_pre, false, grads.slot_mut(layer.slots.weight), true);
            let mut d_gathered = vec![0.0; n * k];
            gemm(n, cout, k, &d_pre, false, params.slot(layer.slots.weight), true, &mut d_gathered, false);
            let mut d_in = vec![0.0; n * cin];
            scatter_add(&d_gathered, cin, &layer.table, &mut d_in);
            d = d_in;
        }
        let _ = x;
        (d, d_cond)
    }
}
