//! Noise schedules, the forward process, the noise-prediction objective,
//! the reverse DDPM step and the consistent-noise animation sampler.

mod noise;
mod process;
mod sampler;
mod schedule;

pub use noise::{sample_noise_bundle, NoiseBundle, NoiseStream};
pub use process::{ddpm_step, forward_sample, training_loss, NoisePredictor};
pub use sampler::{expected_evaluations, generate_animation, Generation, NoiseMode, SamplerConfig};
pub use schedule::{linear_schedule, NoiseSchedule};
