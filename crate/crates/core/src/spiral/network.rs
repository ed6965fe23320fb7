use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::conv::{glorot, SpiralStack, StackCache};
use super::encoder::{EncoderCache, IdentityEncoder, IdentitySpec};
use super::{build_spirals, check_monotone, SpiralTable};
use crate::error::{Error, Result};
use crate::linalg::gemm;
use crate::mesh::{TopologyId, TriangleMesh};
use crate::params::{ParameterSet, Tensor};

/// Architecture of the denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// Expression-signal width `M`.
    pub expression_dim: usize,
    /// Number of diffusion steps `T` (rows of the timestep table).
    pub timesteps: usize,
    pub widths: Vec<usize>,
    pub spiral_lengths: Vec<usize>,
    /// Width of the learnable per-vertex index embedding.
    pub d_idx: usize,
    /// Width of the learnable timestep embedding.
    pub d_t: usize,
    pub identity: Option<IdentitySpec>,
    /// Scale applied to the Glorot range of the 3-channel output head.
    pub head_init_scale: f64,
}

impl NetworkSpec {
    /// Desk-scale defaults: 4 layers, widths 16..128, spirals 9..12.
    pub fn desk_scale(expression_dim: usize, timesteps: usize) -> Self {
        Self {
            expression_dim,
            timesteps,
            widths: vec![16, 32, 64, 128],
            spiral_lengths: vec![9, 9, 12, 12],
            d_idx: 8,
            d_t: 64,
            identity: None,
            head_init_scale: 1e-2,
        }
    }

    pub fn condition_dim(&self) -> usize {
        self.expression_dim + self.d_t + self.identity.as_ref().map_or(0, |i| i.d_id)
    }
}

/// The assembled condition `c = [e | time embedding | identity latent]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningVector {
    pub expression_stage: Vec<f64>,
    pub timestep_embedding: Vec<f64>,
    pub identity_latent: Option<Vec<f64>>,
}

impl ConditioningVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.expression_stage.clone();
        v.extend_from_slice(&self.timestep_embedding);
        if let Some(id) = &self.identity_latent {
            v.extend_from_slice(id);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.expression_stage.len()
            + self.timestep_embedding.len()
            + self.identity_latent.as_ref().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Where the identity part of the condition comes from.
#[derive(Debug, Clone, Copy)]
pub enum IdentityInput<'a> {
    None,
    /// A precomputed latent; no gradient flows into the encoder.
    Latent(&'a [f64]),
    /// Encode this neutral mesh inside the pass (trained jointly).
    Neutral(&'a TriangleMesh),
}

/// One noise-prediction example for the loss `sum_v ||target - s(noisy)||^2`.
#[derive(Debug, Clone, Copy)]
pub struct EpsSample<'a> {
    pub noisy: &'a [f64],
    pub t: usize,
    pub expression: &'a [f64],
    pub identity: IdentityInput<'a>,
    pub target: &'a [f64],
}

/// Spiral-convolution noise predictor `s(d_t, t, c)` at full resolution.
#[derive(Debug, Clone)]
pub struct DenoiserNetwork {
    spec: NetworkSpec,
    topology: TopologyId,
    num_vertices: usize,
    stack: SpiralStack,
    index_embedding: usize,
    time_embedding: usize,
    head_weight: usize,
    head_bias: usize,
    identity: Option<IdentityEncoder>,
    params: ParameterSet,
}

struct Forward {
    input: Vec<f64>,
    cond: Vec<f64>,
    id_cache: Option<EncoderCache>,
    stack: StackCache,
    out: Vec<f64>,
}

impl DenoiserNetwork {
    /// Builds spirals for `topology` and initializes parameters from `seed`.
    pub fn new(spec: NetworkSpec, topology: &TriangleMesh, seed: u64) -> Result<Self> {
        check_monotone(&spec.widths, &spec.spiral_lengths)?;
        let max_l = *spec.spiral_lengths.iter().max().expect("non-empty");
        let full = build_spirals(topology.faces(), topology.num_vertices(), max_l)?;
        Self::with_spirals(spec, topology, &full, seed)
    }

    /// Like [`DenoiserNetwork::new`] but uses the given spiral table
    /// (truncated per layer) instead of building one from the faces.
    pub fn with_spirals(spec: NetworkSpec, topology: &TriangleMesh, full: &SpiralTable, seed: u64) -> Result<Self> {
        check_monotone(&spec.widths, &spec.spiral_lengths)?;
        if spec.expression_dim == 0 || spec.timesteps == 0 || spec.d_t == 0 {
            return Err(Error::InvalidArgument(
                "expression_dim, timesteps and d_t must be positive".into(),
            ));
        }
        let n = topology.num_vertices();
        if full.num_vertices() != n {
            return Err(Error::Shape(format!(
                "spiral table covers {} vertices, mesh has {n}",
                full.num_vertices()
            )));
        }
        let tables: Vec<Arc<SpiralTable>> = spec
            .spiral_lengths
            .iter()
            .map(|&l| full.truncated(l).map(Arc::new))
            .collect::<Result<_>>()?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let normal = Normal::new(0.0, 0.02).expect("valid sigma");
        let index_embedding = params.push(Tensor::new(
            "index_embedding",
            vec![n, spec.d_idx],
            (0..n * spec.d_idx).map(|_| normal.sample(&mut rng)).collect(),
        )?)?;
        let time_embedding = params.push(Tensor::new(
            "time_embedding",
            vec![spec.timesteps, spec.d_t],
            (0..spec.timesteps * spec.d_t).map(|_| normal.sample(&mut rng)).collect(),
        )?)?;
        let stack = SpiralStack::init(
            &mut params,
            "conv",
            3 + spec.d_idx,
            &spec.widths,
            &tables,
            spec.condition_dim(),
            &mut rng,
        )?;
        let c = stack.out_channels();
        let head_weight = params.push(Tensor::new(
            "head.weight",
            vec![c, 3],
            glorot(&mut rng, c, 3, c * 3, spec.head_init_scale),
        )?)?;
        let head_bias = params.push(Tensor::zeros("head.bias", vec![3]))?;
        let identity = match &spec.identity {
            Some(id_spec) => Some(IdentityEncoder::register(
                id_spec.clone(),
                topology,
                &mut params,
                "identity.",
                &mut rng,
            )?),
            None => None,
        };
        Ok(Self {
            spec,
            topology: topology.topology_id(),
            num_vertices: n,
            stack,
            index_embedding,
            time_embedding,
            head_weight,
            head_bias,
            identity,
            params,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn topology_id(&self) -> TopologyId {
        self.topology
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    /// Replaces all parameters; the layout must match.
    pub fn set_params(&mut self, params: ParameterSet) -> Result<()> {
        self.params.check_layout(&params)?;
        self.params = params;
        Ok(())
    }

    pub fn identity_encoder(&self) -> Option<&IdentityEncoder> {
        self.identity.as_ref()
    }

    pub fn condition_dim(&self) -> usize {
        self.spec.condition_dim()
    }

    /// Latent of `neutral` under the jointly trained identity encoder.
    pub fn encode_identity(&self, neutral: &TriangleMesh) -> Result<Vec<f64>> {
        let enc = self
            .identity
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("network has no identity encoder".into()))?;
        enc.encode(&self.params, neutral)
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.spec.timesteps {
            return Err(Error::InvalidArgument(format!(
                "timestep {t} outside [1, {}]",
                self.spec.timesteps
            )));
        }
        Ok(())
    }

    /// Assembles the condition vector for timestep `t`.
    pub fn conditioning(&self, t: usize, expression: &[f64], identity: Option<&[f64]>) -> Result<ConditioningVector> {
        self.conditioning_with(&self.params, t, expression, identity)
    }

    fn conditioning_with(
        &self,
        params: &ParameterSet,
        t: usize,
        expression: &[f64],
        identity: Option<&[f64]>,
    ) -> Result<ConditioningVector> {
        self.check_t(t)?;
        if expression.len() != self.spec.expression_dim {
            return Err(Error::Shape(format!(
                "expression vector has {} entries, network expects {}",
                expression.len(),
                self.spec.expression_dim
            )));
        }
        let identity_latent = match (&self.spec.identity, identity) {
            (None, None) => None,
            (Some(s), Some(id)) if id.len() == s.d_id => Some(id.to_vec()),
            (Some(_), _) => {
                return Err(Error::Shape("identity latent missing or of wrong length".into()))
            }
            (None, Some(_)) => {
                return Err(Error::Shape("network was built without identity conditioning".into()))
            }
        };
        let d_t = self.spec.d_t;
        let table = params.slot(self.time_embedding);
        Ok(ConditioningVector {
            expression_stage: expression.to_vec(),
            timestep_embedding: table[(t - 1) * d_t..t * d_t].to_vec(),
            identity_latent,
        })
    }

    /// Predicted noise, `N x 3` row-major, for the noisy deformation `noisy`.
    pub fn denoise(&self, noisy: &[f64], t: usize, expression: &[f64], identity: Option<&[f64]>) -> Result<Vec<f64>> {
        self.denoise_with(&self.params, noisy, t, expression, identity)
    }

    /// [`denoise`](Self::denoise) evaluated with an explicit parameter set of
    /// this network's layout.
    pub fn denoise_with(
        &self,
        params: &ParameterSet,
        noisy: &[f64],
        t: usize,
        expression: &[f64],
        identity: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let id = identity.map_or(IdentityInput::None, IdentityInput::Latent);
        Ok(self.forward(params, noisy, t, expression, id)?.out)
    }

    fn forward(
        &self,
        params: &ParameterSet,
        noisy: &[f64],
        t: usize,
        expression: &[f64],
        identity: IdentityInput<'_>,
    ) -> Result<Forward> {
        let n = self.num_vertices;
        if noisy.len() != n * 3 {
            return Err(Error::Shape(format!(
                "noisy input has {} values, expected {n} x 3",
                noisy.len()
            )));
        }
        let (latent, id_cache) = match identity {
            IdentityInput::None => (None, None),
            IdentityInput::Latent(l) => (Some(l.to_vec()), None),
            IdentityInput::Neutral(mesh) => {
                let enc = self.identity.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("network has no identity encoder".into())
                })?;
                let (l, c) = enc.forward(params, mesh)?;
                (Some(l), Some(c))
            }
        };
        let cond = self
            .conditioning_with(params, t, expression, latent.as_deref())?
            .to_vec();

        let d_idx = self.spec.d_idx;
        let width = 3 + d_idx;
        let emb = params.slot(self.index_embedding);
        let mut input = vec![0.0; n * width];
        for v in 0..n {
            let row = &mut input[v * width..(v + 1) * width];
            row[..3].copy_from_slice(&noisy[v * 3..v * 3 + 3]);
            row[3..].copy_from_slice(&emb[v * d_idx..(v + 1) * d_idx]);
        }
        let stack = self.stack.forward(params, &input, &cond);
        let c = self.stack.out_channels();
        let mut out = vec![0.0; n * 3];
        gemm(n, c, 3, stack.output(), false, params.slot(self.head_weight), false, &mut out, false);
        let hb = params.slot(self.head_bias);
        for row in out.chunks_exact_mut(3) {
            for (o, b) in row.iter_mut().zip(hb) {
                *o += b;
            }
        }
        Ok(Forward {
            input,
            cond,
            id_cache,
            stack,
            out,
        })
    }

    /// Squared-error loss of one example and its exact gradient, accumulated
    /// into `grads` (same layout as `params`).
    pub fn loss_and_grad_into(
        &self,
        params: &ParameterSet,
        sample: &EpsSample<'_>,
        grads: &mut ParameterSet,
    ) -> Result<f64> {
        let n = self.num_vertices;
        if sample.target.len() != n * 3 {
            return Err(Error::Shape("target noise must be N x 3".into()));
        }
        let fw = self.forward(params, sample.noisy, sample.t, sample.expression, sample.identity)?;
        let mut loss = 0.0;
        let d_out: Vec<f64> = fw
            .out
            .iter()
            .zip(sample.target)
            .map(|(o, e)| {
                let r = e - o;
                loss += r * r;
                -2.0 * r
            })
            .collect();
        if !loss.is_finite() {
            return Err(Error::Numeric("non-finite loss".into()));
        }

        // head
        let c = self.stack.out_channels();
        let feats = fw.stack.output();
        gemm(c, n, 3, feats, true, &d_out, false, grads.slot_mut(self.head_weight), true);
        {
            let hb = grads.slot_mut(self.head_bias);
            for row in d_out.chunks_exact(3) {
                for (g, d) in hb.iter_mut().zip(row) {
                    *g += d;
                }
            }
        }
        let mut d_feats = vec![0.0; n * c];
        gemm(n, 3, c, &d_out, false, params.slot(self.head_weight), true, &mut d_feats, false);

        let (d_input, d_cond) = self
            .stack
            .backward(params, &fw.input, &fw.cond, &fw.stack, d_feats, grads);

        let d_idx = self.spec.d_idx;
        let width = 3 + d_idx;
        {
            let ge = grads.slot_mut(self.index_embedding);
            for v in 0..n {
                for (g, d) in ge[v * d_idx..(v + 1) * d_idx]
                    .iter_mut()
                    .zip(&d_input[v * width + 3..(v + 1) * width])
                {
                    *g += d;
                }
            }
        }
        let m = self.spec.expression_dim;
        let d_t = self.spec.d_t;
        {
            let gt = grads.slot_mut(self.time_embedding);
            for (g, d) in gt[(sample.t - 1) * d_t..sample.t * d_t]
                .iter_mut()
                .zip(&d_cond[m..m + d_t])
            {
                *g += d;
            }
        }
        if let (Some(enc), Some(cache)) = (&self.identity, &fw.id_cache) {
            enc.backward(params, cache, &d_cond[m + d_t..], grads);
        }
        Ok(loss)
    }

    /// Loss of one example without gradients.
    pub fn loss(&self, params: &ParameterSet, sample: &EpsSample<'_>) -> Result<f64> {
        let fw = self.forward(params, sample.noisy, sample.t, sample.expression, sample.identity)?;
        Ok(fw
            .out
            .iter()
            .zip(sample.target)
            .map(|(o, e)| (e - o) * (e - o))
            .sum())
    }
}
