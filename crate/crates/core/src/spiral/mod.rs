//! Spiral sequences over a fixed topology and the spiral-convolution
//! denoiser built on them.

mod conv;
mod encoder;
mod network;
mod table;

pub use conv::{spiral_conv, GateWeights, SpiralConvWeights};
pub use encoder::{encode_identity, IdentityEncoder, IdentitySpec};
pub use network::{ConditioningVector, DenoiserNetwork, EpsSample, IdentityInput, NetworkSpec};
pub use table::{build_spirals, SpiralTable};

use crate::error::{Error, Result};

/// Widths and spiral lengths must be non-empty, equally long and
/// non-decreasing with depth.
pub(crate) fn check_monotone(widths: &[usize], lengths: &[usize]) -> Result<()> {
    if widths.is_empty() || widths.len() != lengths.len() {
        return Err(Error::InvalidArgument(format!(
            "need equally many widths and spiral lengths, got {} and {}",
            widths.len(),
            lengths.len()
        )));
    }
    if widths.iter().chain(lengths).any(|&x| x == 0) {
        return Err(Error::InvalidArgument("widths and spiral lengths must be positive".into()));
    }
    if widths.windows(2).any(|w| w[1] < w[0]) || lengths.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(
            "widths and spiral lengths must be non-decreasing with depth".into(),
        ));
    }
    Ok(())
}
