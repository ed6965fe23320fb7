//! Preprocessing: frame-count standardization, progression signals,
//! extremeness factors, conditioning signals and subject-wise splits.

mod landmarks;
mod signal;
mod split;
mod standardize;

pub use landmarks::{load_landmarks, parse_landmarks, save_landmarks};
pub use signal::{
    corpus_max_by_class, extremeness_factor, make_expression_signal, progression_from_magnitudes,
    progression_signal, raw_extremeness, ExpressionSignal, ExtremenessFactor, SignalMode,
};
pub use split::{split_subjectwise, DatasetSplit};
pub use standardize::{consecutive_mass, frame_distance, standardize_frames};

/// Default standardized clip length.
pub const DEFAULT_FRAMES: usize = 40;
