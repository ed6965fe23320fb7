//! Denoising diffusion directly on fixed-topology triangle meshes.
//!
//! A spiral-convolution network predicts the noise added to per-vertex
//! deformation fields; animations are sampled frame by frame with a shared
//! noise bundle so consecutive frames differ only through their expression
//! conditioning.
//!
//! Module map:
//! - [`mesh`]: meshes, deformation fields, OBJ/PLY I/O, synthetic corpus
//! - [`spiral`]: spiral tables, spiral convolution, denoiser, identity encoder
//! - [`diffusion`]: noise schedules, forward process, loss, DDPM step, sampler
//! - [`training`]: gradients, Adam, learning-rate decay, training loop, checkpoints
//! - [`datapipe`]: frame standardization, progression and intensity signals, splits
//! - [`evalkit`]: specificity, PCA, LSTM classifier, error maps
//! - [`cli`]: configuration and subcommands behind the `meshdiff` binary

pub mod cli;
pub mod datapipe;
pub mod diffusion;
pub mod error;
pub mod evalkit;
mod linalg;
pub mod mesh;
pub mod params;
pub mod spiral;
pub mod training;

pub use error::{Error, Result};
