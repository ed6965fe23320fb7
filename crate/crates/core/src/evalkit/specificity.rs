use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{dist3, AnimationClip, TriangleMesh};

/// Per-frame mean vertex distance between two animations, in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecificityReport {
    pub per_frame: Vec<f64>,
    pub average: f64,
}

/// Per-vertex distance between two meshes of the same topology.
pub fn error_map(generated: &TriangleMesh, reference: &TriangleMesh) -> Result<Vec<f64>> {
    if !generated.same_topology(reference) {
        return Err(Error::Topology("error map needs meshes of the same topology".into()));
    }
    Ok(generated
        .vertices()
        .iter()
        .zip(reference.vertices())
        .map(|(a, b)| dist3(a, b))
        .collect())
}

/// Compares the reconstructed meshes (neutral + deformation) frame by frame.
pub fn specificity(generated: &AnimationClip, reference: &AnimationClip) -> Result<SpecificityReport> {
    if generated.num_frames() != reference.num_frames() {
        return Err(Error::Shape(format!(
            "generated clip has {} frames, reference has {}",
            generated.num_frames(),
            reference.num_frames()
        )));
    }
    if !generated.neutral().same_topology(reference.neutral()) {
        return Err(Error::Topology("clips have different topologies".into()));
    }
    let per_frame = (0..generated.num_frames())
        .map(|i| {
            let e = error_map(&generated.frame_mesh(i)?, &reference.frame_mesh(i)?)?;
            Ok(e.iter().sum::<f64>() / e.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let average = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
    Ok(SpecificityReport { per_frame, average })
}

/// Writes one value per line, the sidecar format paired with a frame OBJ.
pub fn save_error_map(path: &Path, values: &[f64]) -> Result<()> {
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_error_map(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad value {l:?}")))
        })
        .collect()
}
