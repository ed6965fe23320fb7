use anyhow::{ensure, Result};
use mesh_diffusion::datapipe::{make_expression_signal, progression_signal, ExtremenessFactor, SignalMode};
use mesh_diffusion::diffusion::{forward_sample, linear_schedule};
use mesh_diffusion::mesh::{icosphere, synth_dataset, DeformationField};
use mesh_diffusion::params::ParameterSet;
use mesh_diffusion::spiral::{DenoiserNetwork, EpsSample, IdentityInput, NetworkSpec};
use mesh_diffusion::training::{
    compute_gradients, gradient_check_at, load_checkpoint, lr_at, save_checkpoint, train, train_epochs,
    DenoiserObjective, GradCheckReport, TrainConfig, TrainState, TrainingSet,
};
use rand::seq::index::sample;
use rand::Rng;

use super::spiral_checks::small_spec;
use super::{bits, normals, rng};

pub fn params_bits(p: &ParameterSet) -> Vec<(String, Vec<u64>)> {
    p.tensors().iter().map(|t| (t.name.clone(), bits(&t.data))).collect()
}

/// How coordinates are picked for a finite-difference check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Uniformly over all parameters.
    Uniform,
    /// An equal share from every tensor, restricted to entries whose
    /// predicted central-difference roundoff `eps * |L| / (h * |g|)` sits at
    /// least 10x below the tolerance.
    Conditioned,
}

/// Largest roundoff-predicted relative error accepted by `Sampling::Conditioned`.
pub const CONDITIONED_FLOOR: f64 = 1e-6;

fn conditioned_coordinates(grads: &ParameterSet, loss: f64, h: f64, total: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut r = rng(seed);
    let groups = grads.tensors().len();
    let share = total.div_ceil(groups);
    let min_grad = f64::EPSILON * loss.abs() / (h * CONDITIONED_FLOOR);
    let mut coords = Vec::new();
    for slot in 0..groups {
        let g = grads.slot(slot);
        let pool: Vec<usize> = (0..g.len()).filter(|&i| g[i].abs() >= min_grad).collect();
        for i in sample(&mut r, pool.len(), share.min(pool.len())) {
            coords.push((slot, pool[i]));
        }
    }
    coords
}

/// Finite-difference check of the noise-prediction loss on a 42-vertex
/// mesh with the identity encoder trained jointly (T = 1000).
pub fn denoiser_gradient_report(num_coords: usize, seed: u64, h: f64, how: Sampling) -> Result<(GradCheckReport, usize)> {
    let mesh = icosphere(1, 50.0);
    let n = mesh.num_vertices();
    let sched = linear_schedule(1000, 1e-4, 0.02)?;
    let net = DenoiserNetwork::new(small_spec(1000, true), &mesh, seed)?;
    let mut r = rng(seed + 1);
    let data: Vec<(Vec<f64>, Vec<f64>, usize, Vec<f64>)> = (0..2)
        .map(|_| {
            let d0: Vec<f64> = normals(&mut r, 3 * n).into_iter().map(|v| 2.0 * v).collect();
            let eps = normals(&mut r, 3 * n);
            let t = r.random_range(1..=1000);
            let noisy = forward_sample(&d0, t, &eps, &sched)?;
            Ok((noisy, eps, t, vec![0.0, r.random_range(0.1..1.0), 0.0]))
        })
        .collect::<Result<_>>()?;
    let samples = data
        .iter()
        .map(|(x, e, t, ex)| EpsSample { noisy: x, t: *t, expression: ex, identity: IdentityInput::Neutral(&mesh), target: e })
        .collect();
    let obj = DenoiserObjective { net: &net, samples };
    let groups = net.params().tensors().len();
    let coords: Vec<(usize, usize)> = match how {
        Sampling::Uniform => {
            sample(&mut r, net.params().num_elements(), num_coords).into_iter().map(|i| net.params().locate(i)).collect::<Option<_>>().expect("in range")
        }
        Sampling::Conditioned => {
            let (loss, grads) = compute_gradients(&obj, net.params())?;
            conditioned_coordinates(&grads, loss, h, num_coords, seed + 2)
        }
    };
    Ok((gradient_check_at(&obj, net.params(), h, &coords, 0.0)?, groups))
}

pub fn gradients_exact_every_group() -> Result<()> {
    let (report, groups) = denoiser_gradient_report(200, 7, 1e-5, Sampling::Conditioned)?;
    ensure!(report.entries.len() >= 200, "only {} coordinates checked", report.entries.len());
    let mut seen: Vec<&str> = report.entries.iter().map(|e| e.tensor.as_str()).collect();
    seen.sort_unstable();
    seen.dedup();
    ensure!(seen.len() == groups, "{} of {groups} parameter groups checked", seen.len());
    let worst = report.worst().expect("non-empty");
    ensure!(
        worst.rel_error <= 1e-5,
        "{}[{}]: analytic {:e} numeric {:e} (rel {:e})",
        worst.tensor,
        worst.element,
        worst.analytic,
        worst.numeric,
        worst.rel_error
    );
    Ok(())
}

/// Tiny synthetic training set on 42 vertices with local signals.
pub fn tiny_training_set() -> Result<(TrainingSet, mesh_diffusion::mesh::TriangleMesh)> {
    let ds = synth_dataset(2, 3, 6, 42, 1)?;
    let mut set = TrainingSet::new();
    let unit = ExtremenessFactor::new(1.0, 1.0)?;
    for c in &ds.clips {
        let p = progression_signal(c)?;
        set.push_clip(c, &make_expression_signal(c.expression_class(), 3, &p, &unit, SignalMode::Local)?)?;
    }
    Ok((set, ds.clips[0].neutral().clone()))
}

fn tiny_spec() -> NetworkSpec {
    NetworkSpec { head_init_scale: 1e-2, ..small_spec(50, false) }
}

pub fn training_deterministic() -> Result<()> {
    let (set, mesh) = tiny_training_set()?;
    let sched = linear_schedule(50, 1e-3, 0.2)?;
    let cfg = TrainConfig::new(3, 8, 11);
    let run = |threads: usize| -> Result<(Vec<(String, Vec<u64>)>, Vec<u64>)> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        pool.install(|| {
            let mut net = DenoiserNetwork::new(tiny_spec(), &mesh, 4)?;
            let state = train(&set, &cfg, &mut net, &sched)?;
            Ok((params_bits(net.params()), bits(&state.loss_history)))
        })
    };
    let a = run(1)?;
    let b = run(1)?;
    let c = run(3)?;
    ensure!(a == b, "two identical runs diverged");
    ensure!(a == c, "worker count changed the trajectory");
    let mut net = DenoiserNetwork::new(tiny_spec(), &mesh, 4)?;
    let other = train(&set, &TrainConfig::new(3, 8, 12), &mut net, &sched)?;
    ensure!(bits(&other.loss_history) != a.1, "a different seed gave the same trajectory");
    Ok(())
}

/// Trains a tiny network on one frame for `steps` optimizer steps and
/// returns the per-step loss.
pub fn overfit_single_frame(steps: usize) -> Result<Vec<f64>> {
    let ds = synth_dataset(1, 3, 6, 42, 2)?;
    let clip = &ds.clips[1];
    let mut set = TrainingSet::new();
    set.push_frame(clip.neutral(), clip.apex(), vec![0.0, 1.0, 0.0])?;
    let sched = linear_schedule(100, 1e-3, 0.2)?;
    let mut net = DenoiserNetwork::new(tiny_spec_t(100), clip.neutral(), 0)?;
    let cfg = TrainConfig { lr_initial: 3e-3, lr_final: 3e-4, ..TrainConfig::new(steps, 8, 3) };
    ensure!(cfg.steps_per_epoch(set.num_frames()) == 1, "one step per epoch expected");
    Ok(train(&set, &cfg, &mut net, &sched)?.loss_history)
}

fn tiny_spec_t(t: usize) -> NetworkSpec {
    NetworkSpec { head_init_scale: 1e-2, ..small_spec(t, false) }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn loss_nonnegative_and_overfit_trend() -> Result<()> {
    let hist = overfit_single_frame(2000)?;
    ensure!(hist.iter().all(|&l| l >= 0.0 && l.is_finite()), "negative or non-finite loss");
    let blocks: Vec<f64> = hist.chunks(100).map(mean).collect();
    ensure!(blocks.last() < blocks.first(), "100-step average rose: {blocks:?}");
    let n = blocks.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = mean(&blocks);
    let slope: f64 = blocks.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - ym)).sum::<f64>();
    ensure!(slope < 0.0, "moving-average trend is not downward: {blocks:?}");
    Ok(())
}

pub fn lr_endpoints_exact() -> Result<()> {
    for (epochs, a, b) in [(200, 1e-3, 1e-4), (2, 0.3, 0.1), (1000, 3e-3, 3e-4), (7, 1e-3, 1e-3), (1, 0.5, 0.01)] {
        let cfg = TrainConfig { lr_initial: a, lr_final: b, ..TrainConfig::new(epochs, 4, 0) };
        ensure!(lr_at(0, &cfg)? == a, "epoch 0 of {epochs}");
        if epochs > 1 {
            ensure!(lr_at(epochs - 1, &cfg)? == b, "last epoch of {epochs}");
        }
        ensure!(lr_at(epochs, &cfg).is_err(), "epoch == epochs must be rejected");
    }
    Ok(())
}

fn short_run(epochs: usize, until: usize) -> Result<(DenoiserNetwork, TrainState)> {
    let (set, mesh) = tiny_training_set()?;
    let sched = linear_schedule(50, 1e-3, 0.2)?;
    let cfg = TrainConfig::new(epochs, 8, 21);
    let mut net = DenoiserNetwork::new(tiny_spec(), &mesh, 6)?;
    let mut state = TrainState::new(net.params());
    train_epochs(&set, &cfg, &mut net, &sched, &mut state, until, |_, _| {})?;
    Ok((net, state))
}

pub fn checkpoint_roundtrip() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let (net, state) = short_run(2, 2)?;
    let path = dir.path().join("ck.mdck");
    save_checkpoint(&path, net.params(), Some(&state))?;
    let ck = load_checkpoint(&path)?;
    ensure!(params_bits(&ck.params) == params_bits(net.params()), "parameters changed");
    let s = ck.state.ok_or_else(|| anyhow::anyhow!("optimizer state missing"))?;
    ensure!(params_bits(&s.optimizer.m) == params_bits(&state.optimizer.m), "first moments changed");
    ensure!(params_bits(&s.optimizer.v) == params_bits(&state.optimizer.v), "second moments changed");
    ensure!(s.optimizer.step == state.optimizer.step && s.epochs_done == state.epochs_done, "counters changed");
    ensure!(bits(&s.loss_history) == bits(&state.loss_history), "loss history changed");
    let again = dir.path().join("ck2.mdck");
    save_checkpoint(&again, &ck.params, Some(&s))?;
    ensure!(std::fs::read(&path)? == std::fs::read(&again)?, "save-load-save changed bytes");
    let bytes = std::fs::read(&path)?;
    let cut = dir.path().join("cut.mdck");
    std::fs::write(&cut, &bytes[..bytes.len() - 5])?;
    let err = load_checkpoint(&cut).err().map(|e| e.to_string()).unwrap_or_default();
    ensure!(err.contains("unexpected end of tensor table"), "truncated file gave {err:?}");
    Ok(())
}

pub fn resume_equals_uninterrupted() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let (full, full_state) = short_run(4, 4)?;
    let (half, half_state) = short_run(4, 2)?;
    let path = dir.path().join("half.mdck");
    save_checkpoint(&path, half.params(), Some(&half_state))?;
    let ck = load_checkpoint(&path)?;

    let (set, mesh) = tiny_training_set()?;
    let sched = linear_schedule(50, 1e-3, 0.2)?;
    let mut net = DenoiserNetwork::new(tiny_spec(), &mesh, 999)?;
    net.set_params(ck.params)?;
    let mut state = ck.state.ok_or_else(|| anyhow::anyhow!("optimizer state missing"))?;
    train_epochs(&set, &TrainConfig::new(4, 8, 21), &mut net, &sched, &mut state, 4, |_, _| {})?;
    ensure!(params_bits(net.params()) == params_bits(full.params()), "resumed parameters differ");
    ensure!(bits(&state.loss_history) == bits(&full_state.loss_history), "resumed loss history differs");
    Ok(())
}

/// A deformation with every vertex moved by `offset`.
pub fn constant_field(mesh: &mesh_diffusion::mesh::TriangleMesh, offset: [f64; 3]) -> Result<DeformationField> {
    Ok(DeformationField::new(vec![offset; mesh.num_vertices()], mesh.topology_id())?)
}
