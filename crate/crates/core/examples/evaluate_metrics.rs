//! Specificity, error maps, PCA codes and the LSTM expression classifier on
//! ground-truth synthetic clips.

use anyhow::Result;
use mesh_diffusion::evalkit::{classify, error_map, fit_pca_variance, specificity, train_classifier, ClassifierConfig};
use mesh_diffusion::mesh::synth_dataset;

fn main() -> Result<()> {
    let ds = synth_dataset(4, 3, 20, 162, 11)?;
    let (a, b) = (&ds.clips[0], &ds.clips[3]);
    let s = specificity(a, b)?;
    println!(
        "specificity {}/class{} vs {}/class{}: average {:.3} mm, apex frame {:.3} mm",
        a.subject_id(),
        a.expression_class(),
        b.subject_id(),
        b.expression_class(),
        s.average,
        s.per_frame[s.per_frame.len() - 1]
    );
    let map = error_map(&a.frame_mesh(a.num_frames() - 1)?, &b.frame_mesh(b.num_frames() - 1)?)?;
    println!("apex error map: max {:.3} mm over {} vertices", map.iter().cloned().fold(0.0, f64::max), map.len());

    let frames: Vec<Vec<f64>> = ds.clips.iter().flat_map(|c| c.frames().iter().map(|d| d.to_flat())).collect();
    let enc = fit_pca_variance(&frames, 0.99)?;
    let kept: f64 = enc.explained_variance().iter().sum::<f64>() / enc.total_variance();
    println!("PCA: {} components keep {:.2}% of variance", enc.components(), 100.0 * kept);

    let clips: Vec<_> = ds.clips.iter().collect();
    let clf = train_classifier(&clips, &enc, &ClassifierConfig { epochs: 150, ..ClassifierConfig::default() })?;
    let correct = ds.clips.iter().filter(|c| classify(c, &enc, &clf).is_ok_and(|r| r.class == c.expression_class())).count();
    println!("classifier training accuracy {correct}/{}", ds.clips.len());
    let probs = classify(&ds.clips[1], &enc, &clf)?.probabilities;
    println!("class probabilities for clip 1 (class {}): {probs:.3?}", ds.clips[1].expression_class());
    Ok(())
}
