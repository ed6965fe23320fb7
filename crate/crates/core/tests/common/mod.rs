//! Invariant checks shared by the `invariants` test target and the
//! acceptance harness. Each check returns `Err` with a description of the
//! first violation it finds.
#![allow(dead_code)]

pub mod cli_checks;
pub mod diffusion_checks;
pub mod evalkit_checks;
pub mod mesh_checks;
pub mod oracles;
pub mod spiral_checks;
pub mod training_checks;

use anyhow::{ensure, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Check = fn() -> Result<()>;

/// Every invariant, grouped by module, in execution order.
pub const INVARIANTS: &[(&str, Check)] = &[
    ("mesh: deformation ops are mutual inverses", mesh_checks::deformation_ops_invert),
    ("mesh: topology report matches brute force", mesh_checks::topology_matches_brute_force),
    ("mesh: save-load-save is byte identical", mesh_checks::file_roundtrip_idempotent),
    ("mesh: synthetic corpus reproducible", mesh_checks::synth_reproducible),
    ("spiral: table is a pure function", spiral_checks::table_is_pure),
    ("spiral: network equivariant under relabeling", spiral_checks::relabel_equivariance),
    ("spiral: zero gate equals plain layer", spiral_checks::zero_gate_is_plain),
    ("spiral: outputs finite on random inputs", spiral_checks::outputs_finite),
    ("diffusion: schedule monotone, compensated recompute", diffusion_checks::schedule_monotone_and_compensated),
    ("diffusion: alpha_bar matches high-precision values", diffusion_checks::alpha_bar_matches_reference),
    ("diffusion: forward marginal statistics", diffusion_checks::forward_marginal_statistics),
    ("diffusion: step-count identity", diffusion_checks::step_count_identity),
    ("diffusion: shared-bundle determinism", diffusion_checks::bundle_determinism),
    ("diffusion: serial equals concurrent", diffusion_checks::serial_equals_concurrent),
    ("diffusion: streamed noise equals materialized", diffusion_checks::streamed_equals_materialized),
    ("training: gradients exact for every group", training_checks::gradients_exact_every_group),
    ("training: deterministic trajectory", training_checks::training_deterministic),
    ("training: loss non-negative, overfit trend down", training_checks::loss_nonnegative_and_overfit_trend),
    ("training: lr endpoints exact", training_checks::lr_endpoints_exact),
    ("training: checkpoint round-trip bitwise", training_checks::checkpoint_roundtrip),
    ("training: resume equals uninterrupted run", training_checks::resume_equals_uninterrupted),
    ("datapipe: signal rows one-hot scaled", datapipe_checks::signal_rows_one_hot),
    ("datapipe: progression non-decreasing from 0", datapipe_checks::progression_monotone),
    ("datapipe: standardize keeps endpoints", datapipe_checks::standardize_keeps_endpoints),
    ("datapipe: standardize matches exhaustive oracle", datapipe_checks::standardize_matches_oracle),
    ("datapipe: progression matches reimplementation", datapipe_checks::progression_matches_oracle),
    ("datapipe: extremeness class max is 1", datapipe_checks::extremeness_class_max_is_one),
    ("datapipe: extremeness matches recomputation", datapipe_checks::extremeness_matches_oracle),
    ("datapipe: global = local scaled by g", datapipe_checks::mode_algebra),
    ("evalkit: specificity zero on self, symmetric", evalkit_checks::specificity_identity_and_symmetry),
    ("evalkit: specificity matches brute force", evalkit_checks::specificity_matches_brute_force),
    ("evalkit: error maps aggregate to specificity", evalkit_checks::error_map_aggregates),
    ("evalkit: PCA error non-increasing in m", evalkit_checks::pca_error_nonincreasing),
    ("evalkit: PCA basis orthonormal", evalkit_checks::pca_orthonormal),
    ("evalkit: PCA matches covariance eigensolver", evalkit_checks::pca_matches_eigensolver),
    ("evalkit: PCA residual equals complement energy", evalkit_checks::pca_residual_matches_projection),
    ("evalkit: softmax normalized for any input", evalkit_checks::softmax_normalized),
    ("cli: commands deterministic", cli_checks::commands_deterministic),
    ("cli: binary equals library calls", cli_checks::binary_equals_library),
    ("cli: resolved config reproduces run", cli_checks::resolved_config_reproduces),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn ensure_close(a: &[f64], b: &[f64], tol: f64, what: &str) -> Result<()> {
    ensure!(a.len() == b.len(), "{what}: lengths {} vs {}", a.len(), b.len());
    let d = max_abs_diff(a, b);
    ensure!(d <= tol, "{what}: max difference {d:e} exceeds {tol:e}");
    Ok(())
}
