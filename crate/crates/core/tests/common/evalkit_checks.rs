use anyhow::{ensure, Result};
use mesh_diffusion::evalkit::{error_map, fit_pca, specificity, SequenceClassifier};
use mesh_diffusion::mesh::{synth_dataset, AnimationClip, DeformationField};
use rand::Rng;

use super::oracles::{brute_force_specificity, covariance, jacobi_eigen};
use super::{bits, ensure_close, normals, rng};

fn clip_pair() -> Result<(AnimationClip, AnimationClip)> {
    let ds = synth_dataset(2, 3, 10, 162, 5)?;
    let a = ds.clips.iter().find(|c| c.subject_id() == ds.clips[0].subject_id() && c.expression_class() == 1);
    let b = ds.clips.iter().find(|c| c.subject_id() != ds.clips[0].subject_id() && c.expression_class() == 2);
    Ok((a.expect("clip").clone(), b.expect("clip").clone()))
}

fn random_clip(seed: u64, n_frames: usize) -> Result<AnimationClip> {
    let ds = synth_dataset(1, 3, 2, 42, seed)?;
    let base = ds.clips[0].neutral();
    let mut r = rng(seed);
    let verts = base.vertices().iter().map(|v| [v[0] + r.random_range(-1.0..1.0), v[1], v[2]]).collect();
    let neutral = base.with_vertices(verts)?;
    let n = neutral.num_vertices();
    let mut frames = vec![DeformationField::zeros(&neutral)];
    for _ in 1..n_frames {
        frames.push(DeformationField::from_flat(&normals(&mut r, 3 * n), neutral.topology_id())?);
    }
    Ok(AnimationClip::new(neutral, frames, 0, "r")?)
}

pub fn specificity_identity_and_symmetry() -> Result<()> {
    let (a, b) = clip_pair()?;
    let self_spec = specificity(&a, &a)?;
    ensure!(self_spec.per_frame.iter().all(|&v| v == 0.0) && self_spec.average == 0.0, "specificity(A, A) != 0");
    let ab = specificity(&a, &b)?;
    let ba = specificity(&b, &a)?;
    ensure!(bits(&ab.per_frame) == bits(&ba.per_frame), "specificity is not symmetric");
    ensure!(ab.average > 0.0, "distinct clips gave zero specificity");
    Ok(())
}

pub fn specificity_matches_brute_force() -> Result<()> {
    for seed in 0..5 {
        let a = random_clip(seed, 6)?;
        let b = random_clip(seed + 100, 6)?;
        let got = specificity(&a, &b)?;
        ensure_close(&got.per_frame, &brute_force_specificity(&a, &b), 1e-10, "specificity vs double loop")?;
    }
    let (a, b) = clip_pair()?;
    ensure_close(&specificity(&a, &b)?.per_frame, &brute_force_specificity(&a, &b), 1e-10, "synthetic pair")?;
    // A uniform +1 mm x offset on every frame gives exactly 1 mm.
    let shifted: Vec<DeformationField> = a
        .frames()
        .iter()
        .map(|f| {
            let offs = f.offsets().iter().map(|o| [o[0] + 1.0, o[1], o[2]]).collect();
            DeformationField::new(offs, f.topology_id())
        })
        .collect::<Result<_, _>>()?;
    let moved = AnimationClip::new_generated(a.neutral().clone(), shifted, a.expression_class(), "m")?;
    let s = specificity(&moved, &a)?;
    ensure_close(&s.per_frame, &vec![1.0; a.num_frames()], 1e-12, "uniform 1 mm offset")?;
    Ok(())
}

pub fn error_map_aggregates() -> Result<()> {
    let (a, b) = clip_pair()?;
    let s = specificity(&a, &b)?;
    for i in 0..a.num_frames() {
        let e = error_map(&a.frame_mesh(i)?, &b.frame_mesh(i)?)?;
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        ensure!((mean - s.per_frame[i]).abs() <= 1e-12, "frame {i}: map mean {mean} vs {}", s.per_frame[i]);
    }
    let avg = s.per_frame.iter().sum::<f64>() / s.per_frame.len() as f64;
    ensure!((avg - s.average).abs() <= 1e-12, "average {avg} vs {}", s.average);
    Ok(())
}

fn pca_corpus() -> Result<Vec<Vec<f64>>> {
    let ds = synth_dataset(3, 3, 8, 42, 17)?;
    Ok(ds.clips.iter().flat_map(|c| c.frames()[1..].iter().map(|f| f.to_flat())).collect())
}

fn reconstruction_error(samples: &[Vec<f64>], m: usize, full: &[Vec<f64>]) -> Result<f64> {
    let enc = fit_pca(full, m)?;
    let mut total = 0.0;
    for x in samples {
        let rec = enc.decode(&enc.encode(x)?)?;
        total += x.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total)
}

pub fn pca_error_nonincreasing() -> Result<()> {
    let data = pca_corpus()?;
    let rank = data.len() - 1;
    let mut prev = f64::INFINITY;
    for m in 1..=rank {
        let e = reconstruction_error(&data, m, &data)?;
        ensure!(e <= prev * (1.0 + 1e-12) + 1e-12, "m={m}: error {e} above m-1's {prev}");
        prev = e;
    }
    ensure!(prev <= 1e-8, "full-rank reconstruction error {prev}");
    Ok(())
}

pub fn pca_orthonormal() -> Result<()> {
    let data = pca_corpus()?;
    for m in [1, 5, data.len() - 1] {
        let enc = fit_pca(&data, m)?;
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let dot: f64 = enc.basis_row(i).iter().zip(enc.basis_row(j)).map(|(a, b)| a * b).sum();
                worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        ensure!(worst <= 1e-8, "m={m}: |B B^T - I|_max = {worst:e}");
    }
    Ok(())
}

pub fn pca_matches_eigensolver() -> Result<()> {
    let mut r = rng(10);
    for trial in 0..3 {
        let data: Vec<Vec<f64>> = (0..10).map(|_| normals(&mut r, 12)).collect();
        let enc = fit_pca(&data, 10)?;
        let (values, vectors) = jacobi_eigen(covariance(&data), 12);
        ensure_close(enc.explained_variance(), &values[..10], 1e-8, "explained variance vs eigenvalues")?;
        // Rank is 9 after centering; those directions are unique up to sign.
        for k in 0..9 {
            let mut v = vectors[k].clone();
            let pivot = v.iter().fold(0.0f64, |b, &x| if x.abs() > b.abs() { x } else { b });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            ensure_close(enc.basis_row(k), &v, 1e-8, &format!("trial {trial} basis row {k}"))?;
        }
    }
    Ok(())
}

pub fn pca_residual_matches_projection() -> Result<()> {
    let data = pca_corpus()?;
    let mut r = rng(12);
    for m in [1, 3, 10] {
        let enc = fit_pca(&data, m)?;
        for _ in 0..10 {
            let x = normals(&mut r, data[0].len());
            let centered: Vec<f64> = x.iter().zip(enc.mean()).map(|(a, b)| a - b).collect();
            let mut energy: f64 = centered.iter().map(|v| v * v).sum();
            for i in 0..m {
                let c: f64 = centered.iter().zip(enc.basis_row(i)).map(|(a, b)| a * b).sum();
                energy -= c * c;
            }
            let rec = enc.decode(&enc.encode(&x)?)?;
            let resid: f64 = x.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum();
            ensure!((resid - energy).abs() <= 1e-9 * (1.0 + energy), "m={m}: residual {resid} vs complement {energy}");
        }
    }
    Ok(())
}

pub fn softmax_normalized() -> Result<()> {
    let mut r = rng(14);
    let clf = SequenceClassifier::new(5, 8, 3, 2)?;
    for i in 0..300 {
        let len = r.random_range(1..12);
        let scale = 10f64.powf(r.random_range(-6.0..300.0));
        let seq: Vec<Vec<f64>> = (0..len).map(|_| normals(&mut r, 5).into_iter().map(|v| v * scale).collect()).collect();
        let p = clf.probabilities(&seq)?;
        ensure!(p.iter().all(|v| v.is_finite() && *v >= 0.0), "case {i}: bad probabilities {p:?}");
        let sum: f64 = p.iter().sum();
        ensure!((sum - 1.0).abs() <= 1e-6, "case {i} (scale {scale:e}): probabilities sum to {sum}");
    }
    Ok(())
}
