use crate::error::{Error, Result};
use crate::mesh::{dist3, DeformationField};

/// Mean per-vertex Euclidean distance between two frames.
pub fn frame_distance(a: &DeformationField, b: &DeformationField) -> f64 {
    let n = a.len().max(1) as f64;
    a.offsets()
        .iter()
        .zip(b.offsets())
        .map(|(x, y)| dist3(x, y))
        .sum::<f64>()
        / n
}

/// Sum of consecutive frame distances.
pub fn consecutive_mass(frames: &[DeformationField]) -> f64 {
    frames.windows(2).map(|w| frame_distance(&w[0], &w[1])).sum()
}

/// Brings a sequence to exactly `k_target` frames.
///
/// Longer sequences drop, one at a time, the interior frame whose removal
/// loses the least consecutive-difference mass; shorter ones gain the linear
/// midpoint of the most distant consecutive pair. First and last frames are
/// always kept unchanged.
pub fn standardize_frames(seq: &[DeformationField], k_target: usize) -> Result<Vec<DeformationField>> {
    if k_target < 2 {
        return Err(Error::InvalidArgument(format!("K_target must be >= 2, got {k_target}")));
    }
    if seq.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 frames to standardize".into()));
    }
    if let Some(bad) = seq.iter().position(|f| f.len() != seq[0].len()) {
        return Err(Error::Shape(format!("frame {bad} has a different vertex count")));
    }
    let mut frames = seq.to_vec();
    while frames.len() > k_target {
        let (drop, _) = (1..frames.len() - 1)
            .map(|j| {
                let loss = frame_distance(&frames[j - 1], &frames[j]) + frame_distance(&frames[j], &frames[j + 1])
                    - frame_distance(&frames[j - 1], &frames[j + 1]);
                (j, loss)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("at least three frames while decimating");
        frames.remove(drop);
    }
    while frames.len() < k_target {
        let (gap, _) = (0..frames.len() - 1)
            .map(|j| (j, frame_distance(&frames[j], &frames[j + 1])))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("at least two frames");
        let mid = midpoint(&frames[gap], &frames[gap + 1])?;
        frames.insert(gap + 1, mid);
    }
    Ok(frames)
}

fn midpoint(a: &DeformationField, b: &DeformationField) -> Result<DeformationField> {
    let offsets = a
        .offsets()
        .iter()
        .zip(b.offsets())
        .map(|(x, y)| [(x[0] + y[0]) / 2.0, (x[1] + y[1]) / 2.0, (x[2] + y[2]) / 2.0])
        .collect();
    DeformationField::new(offsets, a.topology_id())
}
