//! Fixed-topology triangle meshes, deformation fields and animation clips.
//!
//! All coordinates are millimeters. A topology is identified by a stable
//! 64-bit fingerprint of its vertex count and face list, so deformation
//! fields can be checked against the mesh they were derived from.

mod io;
mod manifest;
mod synth;
mod topology;

pub use io::{load_mesh, save_mesh, MeshFormat};
pub use manifest::{load_clip, load_clips, save_clip, ClipMeta};
pub use synth::{icosphere, synth_dataset, synth_dataset_with, SynthConfig, SynthDataset};
pub use topology::{validate_topology, TopologyReport};

use crate::error::{Error, Result};

/// Offsets at or below this magnitude count as "neutral".
pub const NEUTRAL_EPS_MM: f64 = 1e-6;

/// Vertex positions plus a shared triangle list.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting out-of-range or repeated face indices and
    /// non-finite coordinates.
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "vertex {i} has a non-finite coordinate"
                )));
            }
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&idx| idx >= n) {
                return Err(Error::Topology(format!(
                    "face {fi} index {bad} out of range for {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Topology(format!("face {fi} is degenerate: {f:?}")));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn topology_id(&self) -> TopologyId {
        TopologyId::of(self.vertices.len(), &self.faces)
    }

    pub fn same_topology(&self, other: &TriangleMesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.faces == other.faces
    }

    /// Returns a copy with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> TriangleMesh {
        TriangleMesh {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] * s, v[1] * s, v[2] * s])
                .collect(),
            faces: self.faces.clone(),
        }
    }

    /// Same faces, new positions.
    pub fn with_vertices(&self, vertices: Vec<[f64; 3]>) -> Result<TriangleMesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Shape(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        TriangleMesh::new(vertices, self.faces.clone())
    }
}

/// Stable fingerprint of a topology (FNV-1a over vertex count and faces).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TopologyId(pub u64);

impl TopologyId {
    pub fn of(num_vertices: usize, faces: &[[usize; 3]]) -> Self {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(num_vertices as u64);
        for f in faces {
            for &i in f {
                feed(i as u64);
            }
        }
        TopologyId(h)
    }
}

/// Per-vertex offsets `d = x - x_neutral`, bound to one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    offsets: Vec<[f64; 3]>,
    topology_id: TopologyId,
}

impl DeformationField {
    pub fn new(offsets: Vec<[f64; 3]>, topology_id: TopologyId) -> Result<Self> {
        if let Some(i) = offsets.iter().position(|o| !o.iter().all(|c| c.is_finite())) {
            return Err(Error::Numeric(format!("offset {i} is not finite")));
        }
        Ok(Self {
            offsets,
            topology_id,
        })
    }

    pub fn zeros(mesh: &TriangleMesh) -> Self {
        Self {
            offsets: vec![[0.0; 3]; mesh.num_vertices()],
            topology_id: mesh.topology_id(),
        }
    }

    /// Builds a field from a row-major `N*3` buffer.
    pub fn from_flat(flat: &[f64], topology_id: TopologyId) -> Result<Self> {
        if flat.len() % 3 != 0 {
            return Err(Error::Shape(format!(
                "flat buffer length {} is not a multiple of 3",
                flat.len()
            )));
        }
        let offsets = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(offsets, topology_id)
    }

    pub fn offsets(&self) -> &[[f64; 3]] {
        &self.offsets
    }

    pub fn topology_id(&self) -> TopologyId {
        self.topology_id
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.offsets.iter().flat_map(|o| o.iter().copied()).collect()
    }

    /// Largest per-vertex offset norm.
    pub fn max_norm(&self) -> f64 {
        self.offsets.iter().map(|o| norm3(o)).fold(0.0, f64::max)
    }

    /// Mean per-vertex offset norm.
    pub fn mean_norm(&self) -> f64 {
        if self.offsets.is_empty() {
            return 0.0;
        }
        self.offsets.iter().map(|o| norm3(o)).sum::<f64>() / self.offsets.len() as f64
    }
}

/// `frame - neutral`, vertex by vertex.
pub fn compute_deformation(frame: &TriangleMesh, neutral: &TriangleMesh) -> Result<DeformationField> {
    if !frame.same_topology(neutral) {
        return Err(Error::Topology(
            "frame and neutral do not share a topology".into(),
        ));
    }
    let offsets = frame
        .vertices
        .iter()
        .zip(&neutral.vertices)
        .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
        .collect();
    DeformationField::new(offsets, neutral.topology_id())
}

/// `neutral + d`; faces are copied unchanged.
pub fn apply_deformation(neutral: &TriangleMesh, d: &DeformationField) -> Result<TriangleMesh> {
    if d.len() != neutral.num_vertices() {
        return Err(Error::Shape(format!(
            "deformation has {} vertices, mesh has {}",
            d.len(),
            neutral.num_vertices()
        )));
    }
    let vertices = neutral
        .vertices
        .iter()
        .zip(&d.offsets)
        .map(|(a, o)| [a[0] + o[0], a[1] + o[1], a[2] + o[2]])
        .collect();
    TriangleMesh::new(vertices, neutral.faces.clone())
}

/// A neutral mesh plus `K` deformation frames of one expression.
#[derive(Debug, Clone, PartialEq)]
pub struct AnimationClip {
    neutral: TriangleMesh,
    frames: Vec<DeformationField>,
    expression_class: usize,
    subject_id: String,
}

impl AnimationClip {
    pub fn new(
        neutral: TriangleMesh,
        frames: Vec<DeformationField>,
        expression_class: usize,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        let clip = Self::new_generated(neutral, frames, expression_class, subject_id)?;
        if !clip.starts_neutral() {
            return Err(Error::Data(format!(
                "frame 0 is not neutral (max offset {:.3e} mm)",
                clip.frames[0].max_norm()
            )));
        }
        Ok(clip)
    }

    /// Like [`new`](Self::new) but frame 0 may deviate from the neutral, as
    /// it does for model output.
    pub fn new_generated(
        neutral: TriangleMesh,
        frames: Vec<DeformationField>,
        expression_class: usize,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a clip needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let topo = neutral.topology_id();
        for (i, f) in frames.iter().enumerate() {
            if f.len() != neutral.num_vertices() || f.topology_id() != topo {
                return Err(Error::Topology(format!(
                    "frame {i} does not match the neutral topology"
                )));
            }
        }
        Ok(Self {
            neutral,
            frames,
            expression_class,
            subject_id: subject_id.into(),
        })
    }

    pub fn neutral(&self) -> &TriangleMesh {
        &self.neutral
    }

    /// Whether frame 0 is within [`NEUTRAL_EPS_MM`] of the neutral.
    pub fn starts_neutral(&self) -> bool {
        self.frames[0].max_norm() <= NEUTRAL_EPS_MM
    }

    /// Same clip under another subject id.
    pub fn with_subject(mut self, subject_id: impl Into<String>) -> Self {
        self.subject_id = subject_id.into();
        self
    }

    pub fn frames(&self) -> &[DeformationField] {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn expression_class(&self) -> usize {
        self.expression_class
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    /// Frame `i` as an absolute mesh.
    pub fn frame_mesh(&self, i: usize) -> Result<TriangleMesh> {
        let d = self
            .frames
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("frame {i} out of range")))?;
        apply_deformation(&self.neutral, d)
    }

    /// The last frame, taken as the expression apex.
    pub fn apex(&self) -> &DeformationField {
        self.frames.last().expect("clip has at least two frames")
    }
}

#[inline]
pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
pub(crate) fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    norm3(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}
