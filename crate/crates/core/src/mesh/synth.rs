//! Desk-scale synthetic expression corpus.
//!
//! Each subject is an icosphere "head" with a smooth per-subject shape
//! perturbation. Each expression class owns a template made of Gaussian
//! radial bumps around a class-specific anchor region; a clip ramps that
//! template in over `K` frames and adds a little spatially smooth jitter.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnimationClip, DeformationField, TriangleMesh};
use crate::error::{Error, Result};

/// Geodesic sphere: an icosahedron subdivided `level` times, radius `radius`,
/// counterclockwise winding seen from outside.
pub fn icosphere(level: usize, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(normalized)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalized(&[
                    (p[0] + q[0]) / 2.0,
                    (p[1] + q[1]) / 2.0,
                    (p[2] + q[2]) / 2.0,
                ]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts
        .into_iter()
        .map(|v| [v[0] * radius, v[1] * radius, v[2] * radius])
        .collect();
    TriangleMesh::new(verts, faces).expect("icosphere construction is valid")
}

fn normalized(v: &[f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_classes: usize,
    pub frames: usize,
    pub n_target: usize,
    pub seed: u64,
    /// Head radius in mm.
    pub radius: f64,
    /// Peak outward displacement of the primary bump at full intensity, mm.
    pub bump_amplitude: f64,
    /// Angular standard deviation of a bump, radians.
    pub bump_width: f64,
    /// Amplitude of the per-frame smooth jitter, mm.
    pub jitter: f64,
    /// Per-(subject, class) intensity is drawn uniformly from this range.
    pub intensity_range: (f64, f64),
}

impl SynthConfig {
    pub fn new(n_subjects: usize, n_classes: usize, frames: usize, n_target: usize, seed: u64) -> Self {
        Self {
            n_subjects,
            n_classes,
            frames,
            n_target,
            seed,
            radius: 50.0,
            bump_amplitude: 10.0,
            bump_width: 0.7,
            jitter: 0.02,
            intensity_range: (0.5, 1.0),
        }
    }
}

/// Generated corpus plus the ground truth used to build it.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub clips: Vec<AnimationClip>,
    /// Unit-intensity deformation template per class.
    pub templates: Vec<DeformationField>,
    /// Bump-anchor vertices per class; these double as landmarks.
    pub anchors: Vec<Vec<usize>>,
    /// Intensity used for each clip, same order as `clips`.
    pub intensities: Vec<f64>,
    pub subdivision_level: usize,
}

impl SynthDataset {
    /// All anchor vertices, sorted and deduplicated.
    pub fn landmarks(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.anchors.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

const MAX_LEVEL: usize = 7;

/// Deterministic synthetic dataset; see the module docs for the model.
pub fn synth_dataset(
    n_subjects: usize,
    n_classes: usize,
    k: usize,
    n_target: usize,
    seed: u64,
) -> Result<SynthDataset> {
    synth_dataset_with(&SynthConfig::new(n_subjects, n_classes, k, n_target, seed))
}

pub fn synth_dataset_with(cfg: &SynthConfig) -> Result<SynthDataset> {
    if cfg.n_classes < 2 || cfg.n_classes > 12 {
        return Err(Error::InvalidArgument(format!(
            "n_classes must be in [2, 12], got {}",
            cfg.n_classes
        )));
    }
    if cfg.frames < 2 {
        return Err(Error::InvalidArgument(format!("K must be >= 2, got {}", cfg.frames)));
    }
    if cfg.n_subjects == 0 {
        return Err(Error::InvalidArgument("n_subjects must be positive".into()));
    }
    let (lo, hi) = cfg.intensity_range;
    if !(0.0 < lo && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidArgument("intensity_range must lie in (0, 1]".into()));
    }

    let mut level = 0;
    while 10 * 4usize.pow(level as u32) + 2 < cfg.n_target {
        level += 1;
        if level > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!(
                "N_target {} exceeds the largest supported icosphere",
                cfg.n_target
            )));
        }
    }
    let unit = icosphere(level, 1.0);
    let dirs = unit.vertices().to_vec();
    let n = dirs.len();
    let topo = unit.topology_id();

    let (templates, anchors) = class_templates(&dirs, cfg);
    let templates: Vec<DeformationField> = templates
        .into_iter()
        .map(|t| DeformationField::new(t, topo).expect("finite template"))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut clips = Vec::with_capacity(cfg.n_subjects * cfg.n_classes);
    let mut intensities = Vec::with_capacity(clips.capacity());
    for s in 0..cfg.n_subjects {
        let neutral = subject_neutral(&unit, cfg.radius, &mut rng);
        let subject_id = format!("S{s:02}");
        for (c, template) in templates.iter().enumerate() {
            let intensity = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let mut frames = Vec::with_capacity(cfg.frames);
            frames.push(DeformationField::zeros(&neutral));
            for i in 1..cfg.frames {
                let x = i as f64 / (cfg.frames - 1) as f64;
                let w = smoothstep(x) * intensity;
                let jitter = SmoothField::random(&mut rng);
                let offsets = (0..n)
                    .map(|v| {
                        let t = template.offsets()[v];
                        let j = jitter.eval(&dirs[v]);
                        [
                            w * t[0] + cfg.jitter * j[0],
                            w * t[1] + cfg.jitter * j[1],
                            w * t[2] + cfg.jitter * j[2],
                        ]
                    })
                    .collect();
                frames.push(DeformationField::new(offsets, topo)?);
            }
            clips.push(AnimationClip::new(neutral.clone(), frames, c, subject_id.clone())?);
            intensities.push(intensity);
        }
    }
    Ok(SynthDataset {
        clips,
        templates,
        anchors,
        intensities,
        subdivision_level: level,
    })
}

fn smoothstep(x: f64) -> f64 {
    x * x * (3.0 - 2.0 * x)
}

/// Region centers by greedy farthest-point selection over the sphere's
/// vertices, starting at vertex 0; each class gets a primary outward bump
/// at its center and a weaker inward bump offset from it.
fn class_templates(dirs: &[[f64; 3]], cfg: &SynthConfig) -> (Vec<Vec<[f64; 3]>>, Vec<Vec<usize>>) {
    let mut centers = vec![0usize];
    while centers.len() < cfg.n_classes {
        let far = (0..dirs.len())
            .max_by(|&a, &b| {
                let da = nearest_angle(&dirs[a], &centers, dirs);
                let db = nearest_angle(&dirs[b], &centers, dirs);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("non-empty sphere");
        centers.push(far);
    }
    let secondary_offset = 0.6;
    let mut templates = Vec::with_capacity(cfg.n_classes);
    let mut anchors = Vec::with_capacity(cfg.n_classes);
    for &c in &centers {
        let center = dirs[c];
        let second = (0..dirs.len())
            .min_by(|&a, &b| {
                let ea = (angle(&dirs[a], &center) - secondary_offset).abs();
                let eb = (angle(&dirs[b], &center) - secondary_offset).abs();
                ea.total_cmp(&eb).then(a.cmp(&b))
            })
            .expect("non-empty sphere");
        let bumps = [
            (center, cfg.bump_amplitude),
            (dirs[second], -0.5 * cfg.bump_amplitude),
        ];
        let two_s2 = 2.0 * cfg.bump_width * cfg.bump_width;
        let template = dirs
            .iter()
            .map(|d| {
                let a: f64 = bumps
                    .iter()
                    .map(|(anchor, amp)| amp * (-angle(d, anchor).powi(2) / two_s2).exp())
                    .sum();
                [a * d[0], a * d[1], a * d[2]]
            })
            .collect();
        templates.push(template);
        anchors.push(vec![c, second]);
    }
    (templates, anchors)
}

fn angle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

fn nearest_angle(d: &[f64; 3], centers: &[usize], dirs: &[[f64; 3]]) -> f64 {
    centers
        .iter()
        .map(|&c| angle(d, &dirs[c]))
        .fold(f64::INFINITY, f64::min)
}

fn subject_neutral(unit: &TriangleMesh, radius: f64, rng: &mut ChaCha8Rng) -> TriangleMesh {
    let scale = [
        rng.random_range(0.9..1.1),
        rng.random_range(0.9..1.1),
        rng.random_range(0.9..1.1),
    ];
    let bump_dir = normalized(&[
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ]);
    let bump_amp = rng.random_range(-3.0..3.0);
    let verts = unit
        .vertices()
        .iter()
        .map(|d| {
            let r = radius + bump_amp * (-angle(d, &bump_dir).powi(2) / 1.28).exp();
            [d[0] * r * scale[0], d[1] * r * scale[1], d[2] * r * scale[2]]
        })
        .collect();
    unit.with_vertices(verts).expect("same vertex count")
}

/// Sum of a few random low-frequency sinusoids per axis, roughly unit scale.
struct SmoothField {
    terms: [[(f64, [f64; 3], f64); 3]; 3],
}

impl SmoothField {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut terms = [[(0.0, [0.0; 3], 0.0); 3]; 3];
        for axis in terms.iter_mut() {
            for term in axis.iter_mut() {
                let coef = rng.random_range(-1.0..1.0);
                let freq = [
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ];
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                *term = (coef, freq, phase);
            }
        }
        Self { terms }
    }

    fn eval(&self, d: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (o, axis) in out.iter_mut().zip(&self.terms) {
            *o = axis
                .iter()
                .map(|(c, w, p)| c * (dot(w, d) + p).sin())
                .sum::<f64>()
                / 3f64.sqrt();
        }
        out
    }
}
