//! Consistent-noise animation sampling.
//!
//! Frame 0 is denoised from `T` down to `t_s`; every frame (including 0)
//! then continues from that cached state for the remaining `t_s` steps with
//! its own expression row. In shared mode all frames consume the same
//! `epsilon` and `z_t`, so frame-to-frame differences come only from the
//! conditioning.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::{ddpm_step, NoiseBundle, NoisePredictor, NoiseSchedule};
use crate::datapipe::ExpressionSignal;
use crate::error::{Error, Result};
use crate::mesh::{AnimationClip, DeformationField, TriangleMesh};

/// How reverse-step noise is assigned to frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// One `z` sequence for every frame.
    #[default]
    Shared,
    /// Frames `k >= 1` draw their own `z` for the last `t_s` steps; an
    /// ablation baseline only.
    Independent,
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(NoiseMode::Shared),
            "independent" => Ok(NoiseMode::Independent),
            other => Err(Error::InvalidArgument(format!(
                "noise_mode must be shared|independent, got {other}"
            ))),
        }
    }
}

impl std::fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            NoiseMode::Shared => "shared",
            NoiseMode::Independent => "independent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Late-start timestep: frames branch off frame 0's trajectory here.
    pub t_s: usize,
    pub noise_mode: NoiseMode,
    /// Run frames `k >= 1` on a worker pool.
    pub concurrent: bool,
    /// Worker count when `concurrent`; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl SamplerConfig {
    pub fn new(t_s: usize) -> Self {
        Self {
            t_s,
            noise_mode: NoiseMode::Shared,
            concurrent: false,
            threads: None,
        }
    }
}

/// A generated clip and the number of network evaluations it took.
#[derive(Debug, Clone)]
pub struct Generation {
    pub clip: AnimationClip,
    pub denoiser_evaluations: usize,
}

/// Number of network evaluations for `K` frames: `(T - t_s) + K * t_s`.
pub fn expected_evaluations(steps: usize, t_s: usize, frames: usize) -> usize {
    (steps - t_s) + frames * t_s
}

/// Generates a `K`-frame animation of `neutral` driven by `signal`.
pub fn generate_animation<P: NoisePredictor + ?Sized>(
    neutral: &TriangleMesh,
    signal: &ExpressionSignal,
    net: &P,
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
    bundle: &NoiseBundle,
) -> Result<Generation> {
    let steps = sched.num_steps();
    let n = neutral.num_vertices();
    let k_frames = signal.num_frames();
    if !(1 <= cfg.t_s && cfg.t_s < steps) {
        return Err(Error::InvalidArgument(format!(
            "t_s must satisfy 1 <= t_s < T={steps}, got {}",
            cfg.t_s
        )));
    }
    if bundle.num_vertices() != n || bundle.num_steps() != steps {
        return Err(Error::Shape(format!(
            "noise bundle is for N={} T={}, need N={n} T={steps}",
            bundle.num_vertices(),
            bundle.num_steps()
        )));
    }
    if k_frames < 2 {
        return Err(Error::InvalidArgument("an animation needs at least 2 frames".into()));
    }

    let latent = net.identity_latent(neutral)?;
    let counter = AtomicUsize::new(0);
    let eval = |d: &[f64], t: usize, e: &[f64]| -> Result<Vec<f64>> {
        counter.fetch_add(1, Ordering::Relaxed);
        net.predict(d, t, e, latent.as_deref())
    };

    let rows = signal.rows();
    let mut state = bundle.epsilon().to_vec();
    for t in (cfg.t_s + 1..=steps).rev() {
        let eps_hat = eval(&state, t, &rows[0])?;
        state = ddpm_step(&state, t, &eps_hat, &bundle.z(t), sched)?;
    }
    let cached = state;

    let stream = bundle.stream();
    let run_frame = |k: usize| -> Result<Vec<f64>> {
        let mut d = cached.clone();
        for t in (1..=cfg.t_s).rev() {
            let eps_hat = eval(&d, t, &rows[k])?;
            d = match (cfg.noise_mode, k) {
                (NoiseMode::Independent, k) if k > 0 => {
                    ddpm_step(&d, t, &eps_hat, &stream.frame_z(k, t), sched)?
                }
                _ => ddpm_step(&d, t, &eps_hat, &bundle.z(t), sched)?,
            };
        }
        Ok(d)
    };

    let mut frames = Vec::with_capacity(k_frames);
    frames.push(run_frame(0)?);
    let rest: Vec<Result<Vec<f64>>> = if cfg.concurrent {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| (1..k_frames).into_par_iter().map(run_frame).collect())
    } else {
        (1..k_frames).map(run_frame).collect()
    };
    for r in rest {
        frames.push(r?);
    }

    let evaluations = counter.load(Ordering::Relaxed);
    let expected = expected_evaluations(steps, cfg.t_s, k_frames);
    if evaluations != expected {
        return Err(Error::Numeric(format!(
            "denoiser evaluated {evaluations} times, expected {expected}"
        )));
    }
    let topo = neutral.topology_id();
    let fields = frames
        .iter()
        .map(|f| DeformationField::from_flat(f, topo))
        .collect::<Result<Vec<_>>>()?;
    let clip = AnimationClip::new_generated(neutral.clone(), fields, signal.class(), "generated")?;
    Ok(Generation {
        clip,
        denoiser_evaluations: evaluations,
    })
}
