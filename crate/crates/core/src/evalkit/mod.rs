//! Evaluation: specificity, PCA encoding, an LSTM expression classifier and
//! per-vertex error maps.

mod classifier;
mod pca;
mod report;
mod specificity;

pub use classifier::{
    classify, clip_codes, train_classifier, train_on_sequences, Classification, ClassifierConfig,
    ClassifierObjective, SequenceClassifier,
};
pub use pca::{encode_pca, fit_pca, fit_pca_variance, PcaEncoder, DEFAULT_VARIANCE_FRACTION};
pub use report::EvalReport;
pub use specificity::{error_map, load_error_map, save_error_map, specificity, SpecificityReport};
