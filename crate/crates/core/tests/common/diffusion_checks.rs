use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{ensure, Result};
use mesh_diffusion::datapipe::{make_expression_signal, ExpressionSignal, ExtremenessFactor, SignalMode};
use mesh_diffusion::diffusion::{
    forward_sample, generate_animation, linear_schedule, sample_noise_bundle, NoiseMode, NoisePredictor, NoiseStream,
    SamplerConfig,
};
use mesh_diffusion::mesh::{icosphere, AnimationClip, TriangleMesh};
use mesh_diffusion::spiral::DenoiserNetwork;
use rand::Rng;
use rand_distr::StandardNormal;

use super::spiral_checks::small_spec;
use super::{bits, rng};

/// ᾱ of the T=1000, β 1e-4..0.02 schedule, from a 60-digit cumulative
/// product over the exact decimal betas.
pub const REFERENCE_ALPHA_BAR: [(usize, f64); 3] = [
    (1, 0.9999),
    (500, 0.078_587_242_881_778_237_343_289_826_891_1),
    (1000, 4.035_829_765_375_683_314_817_635_161_55e-5),
];

/// Returns zeros and counts its own invocations.
#[derive(Default)]
pub struct CountingStub {
    pub calls: AtomicUsize,
}

impl NoisePredictor for CountingStub {
    fn predict(&self, noisy: &[f64], _t: usize, _e: &[f64], _id: Option<&[f64]>) -> mesh_diffusion::Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(vec![0.0; noisy.len()])
    }
}

pub fn ramp_signal(class: usize, k: usize) -> Result<ExpressionSignal> {
    let p: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
    Ok(make_expression_signal(class, 3, &p, &ExtremenessFactor::new(1.0, 1.0)?, SignalMode::Local)?)
}

/// Runs the sampler with a counting stub; returns (reported, counted).
pub fn count_evaluations(mesh: &TriangleMesh, steps: usize, t_s: usize, k: usize) -> Result<(usize, usize)> {
    let sched = linear_schedule(steps, 1e-4, 0.02)?;
    let stub = CountingStub::default();
    let bundle = sample_noise_bundle(mesh.num_vertices(), steps, 1)?;
    let gen = generate_animation(mesh, &ramp_signal(0, k)?, &stub, &sched, &SamplerConfig::new(t_s), &bundle)?;
    Ok((gen.denoiser_evaluations, stub.calls.load(Ordering::Relaxed)))
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        c += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + c
}

pub fn schedule_monotone_and_compensated() -> Result<()> {
    for (steps, b1, bt) in [(1000, 1e-4, 0.02), (100, 1e-3, 0.2), (2, 0.1, 0.1), (5000, 1e-5, 0.05)] {
        let s = linear_schedule(steps, b1, bt)?;
        ensure!(s.beta(1) == b1 && s.beta(steps) == bt, "endpoints not exact");
        for t in 2..=steps {
            ensure!(s.alpha_bar(t) < s.alpha_bar(t - 1), "alpha_bar not strictly decreasing at t={t}");
        }
        for t in 1..=steps {
            let log = compensated_sum((1..=t).map(|u| (-s.beta(u)).ln_1p()));
            let want = log.exp();
            let got = s.alpha_bar(t);
            ensure!(
                ((got - want) / want).abs() <= 1e-12,
                "T={steps} t={t}: alpha_bar {got} vs compensated {want}"
            );
        }
    }
    Ok(())
}

pub fn alpha_bar_matches_reference() -> Result<()> {
    let s = linear_schedule(1000, 1e-4, 0.02)?;
    for (t, want) in REFERENCE_ALPHA_BAR {
        let got = s.alpha_bar(t);
        ensure!(((got - want) / want).abs() <= 1e-10, "alpha_bar_{t} = {got}, reference {want}");
    }
    Ok(())
}

/// Monte-Carlo moments of forward_sample; returns the worst deviation in
/// units of standard errors.
pub fn forward_marginal_z_scores(draws: usize, seed: u64) -> Result<Vec<(usize, f64, f64)>> {
    let s = linear_schedule(1000, 1e-4, 0.02)?;
    let d0 = [0.7, -1.3, 2.0];
    let mut r = rng(seed);
    let mut out = Vec::new();
    for t in [1, 500, 1000] {
        let ab = s.alpha_bar(t);
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..draws {
            let eps: Vec<f64> = (0..3).map(|_| r.sample(StandardNormal)).collect();
            let x = forward_sample(&d0, t, &eps, &s)?;
            for k in 0..3 {
                sum[k] += x[k];
                sq[k] += x[k] * x[k];
            }
        }
        let n = draws as f64;
        let var = 1.0 - ab;
        let (mut zm, mut zv) = (0.0f64, 0.0f64);
        for k in 0..3 {
            let mean = sum[k] / n;
            let sample_var = (sq[k] - n * mean * mean) / (n - 1.0);
            zm = zm.max((mean - ab.sqrt() * d0[k]).abs() / (var / n).sqrt());
            zv = zv.max((sample_var - var).abs() / (var * (2.0 / (n - 1.0)).sqrt()));
        }
        out.push((t, zm, zv));
    }
    Ok(out)
}

pub fn forward_marginal_statistics() -> Result<()> {
    for (t, zm, zv) in forward_marginal_z_scores(100_000, 2024)? {
        ensure!(zm <= 3.0 && zv <= 3.0, "t={t}: mean z {zm:.2}, variance z {zv:.2}");
    }
    Ok(())
}

pub fn step_count_identity() -> Result<()> {
    let mesh = icosphere(0, 1.0);
    for steps in 2..=7 {
        for t_s in 1..steps {
            for k in 2..=5 {
                let (reported, counted) = count_evaluations(&mesh, steps, t_s, k)?;
                let want = (steps - t_s) + k * t_s;
                ensure!(reported == want && counted == want, "T={steps} t_s={t_s} K={k}: {reported}/{counted} vs {want}");
            }
        }
    }
    let mut r = rng(4);
    for _ in 0..10 {
        let steps = r.random_range(2..300);
        let t_s = r.random_range(1..steps);
        let k = r.random_range(2..30);
        let (reported, counted) = count_evaluations(&mesh, steps, t_s, k)?;
        let want = (steps - t_s) + k * t_s;
        ensure!(reported == want && counted == want, "T={steps} t_s={t_s} K={k}: {reported}/{counted} vs {want}");
    }
    Ok(())
}

fn small_generation(cfg: &SamplerConfig, seed: u64) -> Result<AnimationClip> {
    let mesh = icosphere(1, 50.0);
    let net = DenoiserNetwork::new(small_spec(40, true), &mesh, 2)?;
    let sched = linear_schedule(40, 1e-3, 0.2)?;
    let bundle = sample_noise_bundle(mesh.num_vertices(), 40, seed)?;
    Ok(generate_animation(&mesh, &ramp_signal(1, 7)?, &net, &sched, cfg, &bundle)?.clip)
}

fn clip_bits(c: &AnimationClip) -> Vec<Vec<u64>> {
    c.frames().iter().map(|f| bits(&f.to_flat())).collect()
}

pub fn bundle_determinism() -> Result<()> {
    for mode in [NoiseMode::Shared, NoiseMode::Independent] {
        let cfg = SamplerConfig { noise_mode: mode, ..SamplerConfig::new(15) };
        let a = small_generation(&cfg, 3)?;
        let b = small_generation(&cfg, 3)?;
        ensure!(clip_bits(&a) == clip_bits(&b), "{mode}: repeated generation differs");
        let c = small_generation(&cfg, 4)?;
        ensure!(clip_bits(&a) != clip_bits(&c), "{mode}: different bundles gave identical clips");
    }
    Ok(())
}

pub fn serial_equals_concurrent() -> Result<()> {
    for mode in [NoiseMode::Shared, NoiseMode::Independent] {
        let serial = SamplerConfig { noise_mode: mode, ..SamplerConfig::new(15) };
        let conc = SamplerConfig { concurrent: true, threads: Some(4), ..serial.clone() };
        for seed in 0..2 {
            let a = small_generation(&serial, seed)?;
            let b = small_generation(&conc, seed)?;
            ensure!(clip_bits(&a) == clip_bits(&b), "{mode} seed {seed}: serial and concurrent differ");
        }
    }
    Ok(())
}

pub fn streamed_equals_materialized() -> Result<()> {
    let bundle = sample_noise_bundle(42, 60, 77)?;
    let stream = NoiseStream::new(77, 42);
    ensure!(bits(bundle.epsilon()) == bits(&stream.epsilon()), "epsilon differs");
    for t in 1..=60 {
        ensure!(bits(&bundle.z(t)) == bits(&stream.z(t)), "z_{t} differs");
    }
    ensure!(bundle.z(1).iter().all(|&v| v == 0.0), "z_1 must be zero");
    Ok(())
}
