use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::conv::{glorot, SpiralStack, StackCache};
use super::{build_spirals, check_monotone, SpiralTable};
use crate::error::{Error, Result};
use crate::linalg::affine_row;
use crate::mesh::{TopologyId, TriangleMesh};
use crate::params::{ParameterSet, Tensor};

/// Layout of the identity encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentitySpec {
    pub widths: Vec<usize>,
    pub spiral_lengths: Vec<usize>,
    pub d_id: usize,
    /// Centered neutral coordinates are multiplied by this before encoding.
    pub input_scale: f64,
}

impl Default for IdentitySpec {
    fn default() -> Self {
        Self {
            widths: vec![16, 32],
            spiral_lengths: vec![9, 9],
            d_id: 16,
            input_scale: 0.01,
        }
    }
}

/// Spiral encoder of a neutral mesh: spiral layers, global mean-pool, then a
/// linear map to `d_id` reals. Parameters are held by a [`ParameterSet`]
/// (its own, or the denoiser's when trained jointly).
#[derive(Debug, Clone)]
pub struct IdentityEncoder {
    spec: IdentitySpec,
    topology: TopologyId,
    num_vertices: usize,
    stack: SpiralStack,
    lin_weight: usize,
    lin_bias: usize,
}

pub(crate) struct EncoderCache {
    input: Vec<f64>,
    stack: StackCache,
    pooled: Vec<f64>,
}

impl IdentityEncoder {
    /// A standalone encoder with freshly initialized parameters.
    pub fn new(spec: IdentitySpec, topology: &TriangleMesh, rng: &mut ChaCha8Rng) -> Result<(Self, ParameterSet)> {
        let mut params = ParameterSet::new();
        let enc = Self::register(spec, topology, &mut params, "", rng)?;
        Ok((enc, params))
    }

    pub(crate) fn register(
        spec: IdentitySpec,
        topology: &TriangleMesh,
        params: &mut ParameterSet,
        prefix: &str,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        check_monotone(&spec.widths, &spec.spiral_lengths)?;
        if spec.d_id == 0 {
            return Err(Error::InvalidArgument("d_id must be positive".into()));
        }
        let n = topology.num_vertices();
        let max_l = *spec.spiral_lengths.iter().max().expect("non-empty");
        let full = build_spirals(topology.faces(), n, max_l)?;
        let tables: Vec<Arc<SpiralTable>> = spec
            .spiral_lengths
            .iter()
            .map(|&l| full.truncated(l).map(Arc::new))
            .collect::<Result<_>>()?;
        let stack = SpiralStack::init(params, &format!("{prefix}conv"), 3, &spec.widths, &tables, 0, rng)?;
        let c = stack.out_channels();
        let lin_weight = params.push(Tensor::new(
            format!("{prefix}lin.weight"),
            vec![c, spec.d_id],
            glorot(rng, c, spec.d_id, c * spec.d_id, 1.0),
        )?)?;
        let lin_bias = params.push(Tensor::zeros(format!("{prefix}lin.bias"), vec![spec.d_id]))?;
        Ok(Self {
            spec,
            topology: topology.topology_id(),
            num_vertices: n,
            stack,
            lin_weight,
            lin_bias,
        })
    }

    pub fn spec(&self) -> &IdentitySpec {
        &self.spec
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.d_id
    }

    /// Fixed-length latent code of `neutral`.
    pub fn encode(&self, params: &ParameterSet, neutral: &TriangleMesh) -> Result<Vec<f64>> {
        Ok(self.forward(params, neutral)?.0)
    }

    pub(crate) fn forward(&self, params: &ParameterSet, neutral: &TriangleMesh) -> Result<(Vec<f64>, EncoderCache)> {
        if neutral.topology_id() != self.topology {
            return Err(Error::Topology("neutral mesh does not match encoder topology".into()));
        }
        let n = self.num_vertices;
        let mut centroid = [0.0; 3];
        for v in neutral.vertices() {
            for k in 0..3 {
                centroid[k] += v[k] / n as f64;
            }
        }
        let input: Vec<f64> = neutral
            .vertices()
            .iter()
            .flat_map(|v| (0..3).map(move |k| (v[k] - centroid[k]) * self.spec.input_scale))
            .collect();
        let stack = self.stack.forward(params, &input, &[]);
        let c = self.stack.out_channels();
        let mut pooled = vec![0.0; c];
        for row in stack.output().chunks_exact(c) {
            for (p, v) in pooled.iter_mut().zip(row) {
                *p += v;
            }
        }
        pooled.iter_mut().for_each(|p| *p /= n as f64);
        let mut out = vec![0.0; self.spec.d_id];
        affine_row(&pooled, params.slot(self.lin_weight), params.slot(self.lin_bias), &mut out);
        Ok((out, EncoderCache { input, stack, pooled }))
    }

    pub(crate) fn backward(&self, params: &ParameterSet, cache: &EncoderCache, d_latent: &[f64], grads: &mut ParameterSet) {
        let c = self.stack.out_channels();
        let d_id = self.spec.d_id;
        let w = params.slot(self.lin_weight);
        let mut d_pooled = vec![0.0; c];
        for (ci, dp) in d_pooled.iter_mut().enumerate() {
            *dp = w[ci * d_id..(ci + 1) * d_id]
                .iter()
                .zip(d_latent)
                .map(|(a, b)| a * b)
                .sum();
        }
        let gw = grads.slot_mut(self.lin_weight);
        for (ci, &p) in cache.pooled.iter().enumerate() {
            for (g, d) in gw[ci * d_id..(ci + 1) * d_id].iter_mut().zip(d_latent) {
                *g += p * d;
            }
        }
        for (g, d) in grads.slot_mut(self.lin_bias).iter_mut().zip(d_latent) {
            *g += d;
        }
        let n = self.num_vertices as f64;
        let d_out: Vec<f64> = (0..self.num_vertices)
            .flat_map(|_| d_pooled.iter().map(|d| d / n))
            .collect();
        let _ = self.stack.backward(params, &cache.input, &[], &cache.stack, d_out, grads);
    }
}

/// Encodes `neutral` with `enc` and its parameters.
pub fn encode_identity(neutral: &TriangleMesh, enc: &IdentityEncoder, params: &ParameterSet) -> Result<Vec<f64>> {
    enc.encode(params, neutral)
}
