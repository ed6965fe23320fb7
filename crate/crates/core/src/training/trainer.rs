use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::adam::{adam_step, OptimizerState};
use super::gradients::Objective;
use crate::datapipe::ExpressionSignal;
use crate::diffusion::{forward_sample, NoiseSchedule};
use crate::error::{Error, Result};
use crate::mesh::{AnimationClip, DeformationField, TriangleMesh};
use crate::params::ParameterSet;
use crate::spiral::{DenoiserNetwork, EpsSample, IdentityInput};

/// How the diffusion timestep of each training draw is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestepSampling {
    /// Uniform over `1..=T`.
    Uniform,
    /// Always the given step.
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub seed: u64,
    pub timesteps: TimestepSampling,
}

impl TrainConfig {
    pub fn new(epochs: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size,
            lr_initial: 1e-3,
            lr_final: 1e-4,
            seed,
            timesteps: TimestepSampling::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch_size must be positive".into()));
        }
        if !(self.lr_final > 0.0 && self.lr_final <= self.lr_initial) || !self.lr_initial.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need 0 < lr_final <= lr_initial, got {} and {}",
                self.lr_final, self.lr_initial
            )));
        }
        Ok(())
    }

    /// Optimizer steps per epoch: one pass worth of frame draws.
    pub fn steps_per_epoch(&self, num_frames: usize) -> usize {
        num_frames.div_ceil(self.batch_size).max(1)
    }
}

/// Learning rate of `epoch`, decaying geometrically from `lr_initial` at
/// epoch 0 to `lr_final` at the last epoch.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    cfg.validate()?;
    if epoch >= cfg.epochs {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} outside [0, {})",
            cfg.epochs
        )));
    }
    if epoch == 0 || cfg.epochs == 1 {
        return Ok(cfg.lr_initial);
    }
    if epoch == cfg.epochs - 1 {
        return Ok(cfg.lr_final);
    }
    let frac = epoch as f64 / (cfg.epochs - 1) as f64;
    Ok(cfg.lr_initial * (cfg.lr_final / cfg.lr_initial).powf(frac))
}

#[derive(Debug, Clone)]
struct Example {
    neutral: usize,
    deformation: Vec<f64>,
    expression: Vec<f64>,
}

/// Individual frames with their conditioning, the unit of training.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    neutrals: Vec<TriangleMesh>,
    examples: Vec<Example>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds every frame of `clip`, conditioned on the matching signal row.
    pub fn push_clip(&mut self, clip: &AnimationClip, signal: &ExpressionSignal) -> Result<()> {
        if signal.num_frames() != clip.num_frames() {
            return Err(Error::Data(format!(
                "signal has {} rows but clip has {} frames",
                signal.num_frames(),
                clip.num_frames()
            )));
        }
        let neutral = self.add_neutral(clip.neutral());
        for (d, e) in clip.frames().iter().zip(signal.rows()) {
            self.examples.push(Example {
                neutral,
                deformation: d.to_flat(),
                expression: e.clone(),
            });
        }
        Ok(())
    }

    /// Adds a single frame.
    pub fn push_frame(&mut self, neutral: &TriangleMesh, d: &DeformationField, expression: Vec<f64>) -> Result<()> {
        if d.topology_id() != neutral.topology_id() {
            return Err(Error::Topology("frame does not match the neutral mesh".into()));
        }
        let neutral = self.add_neutral(neutral);
        self.examples.push(Example {
            neutral,
            deformation: d.to_flat(),
            expression,
        });
        Ok(())
    }

    fn add_neutral(&mut self, mesh: &TriangleMesh) -> usize {
        if let Some(i) = self.neutrals.iter().position(|m| m == mesh) {
            return i;
        }
        self.neutrals.push(mesh.clone());
        self.neutrals.len() - 1
    }

    pub fn num_frames(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    fn check_against(&self, net: &DenoiserNetwork) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Data("training set is empty".into()));
        }
        let m = net.spec().expression_dim;
        if let Some(bad) = self.examples.iter().find(|e| e.expression.len() != m) {
            return Err(Error::Shape(format!(
                "expression rows have width {}, network expects {m}",
                bad.expression.len()
            )));
        }
        if self.neutrals.iter().any(|n| n.topology_id() != net.topology_id()) {
            return Err(Error::Topology("training meshes do not match the network topology".into()));
        }
        Ok(())
    }
}

/// Optimizer state plus bookkeeping; everything needed to resume a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub optimizer: OptimizerState,
    pub epochs_done: usize,
    /// Mean per-frame loss of each finished epoch.
    pub loss_history: Vec<f64>,
}

impl TrainState {
    pub fn new(params: &ParameterSet) -> Self {
        Self {
            optimizer: OptimizerState::new(params),
            epochs_done: 0,
            loss_history: Vec::new(),
        }
    }
}

/// One drawn training example: which frame, which step, which noise.
struct Draw {
    example: usize,
    t: usize,
    eps: Vec<f64>,
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

fn sample_t(rule: TimestepSampling, steps: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    match rule {
        TimestepSampling::Uniform => Ok(rng.random_range(1..=steps)),
        TimestepSampling::Fixed(t) if (1..=steps).contains(&t) => Ok(t),
        TimestepSampling::Fixed(t) => Err(Error::InvalidArgument(format!("fixed t={t} outside 1..={steps}"))),
    }
}

/// Trains from scratch for `cfg.epochs` epochs.
pub fn train(set: &TrainingSet, cfg: &TrainConfig, net: &mut DenoiserNetwork, sched: &NoiseSchedule) -> Result<TrainState> {
    let mut state = TrainState::new(net.params());
    train_epochs(set, cfg, net, sched, &mut state, cfg.epochs, |_, _| {})?;
    Ok(state)
}

/// Continues `state` up to (exclusive) epoch `until`. Epoch `e` draws its
/// examples from a stream derived from `(cfg.seed, e)` alone, so stopping
/// and resuming reproduces an uninterrupted run bit for bit. `on_epoch`
/// receives each finished epoch index and its mean loss.
pub fn train_epochs(
    set: &TrainingSet,
    cfg: &TrainConfig,
    net: &mut DenoiserNetwork,
    sched: &NoiseSchedule,
    state: &mut TrainState,
    until: usize,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<()> {
    cfg.validate()?;
    set.check_against(net)?;
    if sched.num_steps() != net.spec().timesteps {
        return Err(Error::InvalidArgument(format!(
            "schedule has {} steps, network expects {}",
            sched.num_steps(),
            net.spec().timesteps
        )));
    }
    net.params().check_layout(&state.optimizer.m)?;
    let until = until.min(cfg.epochs);
    let dim = net.num_vertices() * 3;
    let steps = cfg.steps_per_epoch(set.num_frames());

    while state.epochs_done < until {
        let epoch = state.epochs_done;
        let lr = lr_at(epoch, cfg)?;
        let mut rng = epoch_rng(cfg.seed, epoch);
        let mut total = 0.0;
        for _ in 0..steps {
            let draws = (0..cfg.batch_size)
                .map(|_| {
                    let example = rng.random_range(0..set.num_frames());
                    let t = sample_t(cfg.timesteps, sched.num_steps(), &mut rng)?;
                    let eps = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    Ok(Draw { example, t, eps })
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, grads) = batch_gradient(set, &draws, net, net.params(), sched)?;
            total += loss;
            adam_step(net.params_mut(), &grads, &mut state.optimizer, lr)?;
            if !net.params().all_finite() {
                return Err(Error::Numeric(format!("parameters diverged in epoch {epoch}")));
            }
        }
        let mean = total / steps as f64;
        state.loss_history.push(mean);
        state.epochs_done += 1;
        on_epoch(epoch, mean);
    }
    Ok(())
}

/// Mean loss and mean gradient over `draws`. Per-draw gradients are computed
/// in parallel and summed in draw order, so the result is independent of the
/// thread count.
fn batch_gradient(
    set: &TrainingSet,
    draws: &[Draw],
    net: &DenoiserNetwork,
    params: &ParameterSet,
    sched: &NoiseSchedule,
) -> Result<(f64, ParameterSet)> {
    let use_identity = net.identity_encoder().is_some();
    let per_draw: Vec<(f64, ParameterSet)> = draws
        .par_iter()
        .map(|d| {
            let ex = &set.examples[d.example];
            let noisy = forward_sample(&ex.deformation, d.t, &d.eps, sched)?;
            let identity = if use_identity {
                IdentityInput::Neutral(&set.neutrals[ex.neutral])
            } else {
                IdentityInput::None
            };
            let sample = EpsSample {
                noisy: &noisy,
                t: d.t,
                expression: &ex.expression,
                identity,
                target: &d.eps,
            };
            let mut g = params.zeros_like();
            let loss = net.loss_and_grad_into(params, &sample, &mut g)?;
            Ok((loss, g))
        })
        .collect::<Result<_>>()?;
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &per_draw {
        loss += l;
        grads.axpy(1.0, g)?;
    }
    let inv = 1.0 / draws.len() as f64;
    grads.scale(inv);
    let loss = loss * inv;
    if !loss.is_finite() {
        return Err(Error::Numeric("non-finite batch loss".into()));
    }
    Ok((loss, grads))
}

/// The mean noise-prediction loss over a fixed list of examples, as an
/// [`Objective`] of the network parameters.
pub struct DenoiserObjective<'a> {
    pub net: &'a DenoiserNetwork,
    pub samples: Vec<EpsSample<'a>>,
}

impl Objective for DenoiserObjective<'_> {
    fn loss(&self, params: &ParameterSet) -> Result<f64> {
        let mut total = 0.0;
        for s in &self.samples {
            total += self.net.loss(params, s)?;
        }
        Ok(total / self.samples.len() as f64)
    }

    fn loss_and_grad(&self, params: &ParameterSet, grads: &mut ParameterSet) -> Result<f64> {
        let mut g = params.zeros_like();
        let mut total = 0.0;
        for s in &self.samples {
            total += self.net.loss_and_grad_into(params, s, &mut g)?;
        }
        let inv = 1.0 / self.samples.len() as f64;
        grads.axpy(inv, &g)?;
        Ok(total * inv)
    }
}
