//! Counter-based Gaussian noise addressable by `(seed, role, t)`.
//!
//! Every block is drawn from its own ChaCha stream, so any `z_t` can be
//! regenerated without producing the others. [`NoiseBundle`] materializes
//! the blocks and [`NoiseStream`] produces them on demand; both agree
//! bit for bit.

use std::borrow::Cow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const ROLE_EPSILON: u64 = 0;
const ROLE_Z: u64 = 1;
const ROLE_FRAME_Z: u64 = 2;

fn normal_block(seed: u64, role: u64, t: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((role << 48) ^ t);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// On-demand noise for `N` vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub num_vertices: usize,
}

impl NoiseStream {
    pub fn new(seed: u64, num_vertices: usize) -> Self {
        Self { seed, num_vertices }
    }

    /// Initial noise `epsilon`, `N x 3`.
    pub fn epsilon(&self) -> Vec<f64> {
        normal_block(self.seed, ROLE_EPSILON, 0, self.num_vertices * 3)
    }

    /// Reverse-step noise `z_t`; exactly zero at `t = 1`.
    pub fn z(&self, t: usize) -> Vec<f64> {
        if t <= 1 {
            vec![0.0; self.num_vertices * 3]
        } else {
            normal_block(self.seed, ROLE_Z, t as u64, self.num_vertices * 3)
        }
    }

    /// Per-frame reverse-step noise used by the independent-noise ablation;
    /// also zero at `t = 1`.
    pub fn frame_z(&self, frame: usize, t: usize) -> Vec<f64> {
        if t <= 1 {
            vec![0.0; self.num_vertices * 3]
        } else {
            let role = ROLE_FRAME_Z + frame as u64;
            normal_block(self.seed, role, t as u64, self.num_vertices * 3)
        }
    }
}

/// Materialized `epsilon` and `z_T .. z_2`, with `z_1 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    seed: u64,
    num_vertices: usize,
    epsilon: Vec<f64>,
    /// `z[t - 2]` holds `z_t` for `t = 2..=T`.
    z: Vec<Vec<f64>>,
}

impl NoiseBundle {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_steps(&self) -> usize {
        self.z.len() + 1
    }

    pub fn epsilon(&self) -> &[f64] {
        &self.epsilon
    }

    /// `z_t` for `t in 1..=T`.
    pub fn z(&self, t: usize) -> Cow<'_, [f64]> {
        match t {
            0 => panic!("timesteps start at 1"),
            1 => Cow::Owned(vec![0.0; self.num_vertices * 3]),
            t => Cow::Borrowed(&self.z[t - 2]),
        }
    }

    pub fn stream(&self) -> NoiseStream {
        NoiseStream::new(self.seed, self.num_vertices)
    }
}

/// Draws a bundle for `N` vertices and `T` steps.
pub fn sample_noise_bundle(num_vertices: usize, steps: usize, seed: u64) -> Result<NoiseBundle> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("T must be >= 2, got {steps}")));
    }
    let stream = NoiseStream::new(seed, num_vertices);
    Ok(NoiseBundle {
        seed,
        num_vertices,
        epsilon: stream.epsilon(),
        z: (2..=steps).map(|t| stream.z(t)).collect(),
    })
}
