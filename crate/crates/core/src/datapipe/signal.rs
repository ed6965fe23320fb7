use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::{norm3, AnimationClip};

/// Half-width of the centered smoothing window (window of 5 frames).
const SMOOTH_HALF_WIDTH: usize = 2;

/// Expression progression `p` of a clip: mean per-vertex deformation
/// magnitude per frame, smoothed with a centered 5-frame median (the window
/// shrinks symmetrically near the ends), rescaled so `p_0 = 0` and
/// `p_{K-1} = 1`, then clamped to be non-decreasing within `[0, 1]`.
pub fn progression_signal(clip: &AnimationClip) -> Result<Vec<f64>> {
    if !clip.starts_neutral() {
        return Err(Error::Data("progression needs a neutral first frame".into()));
    }
    let raw: Vec<f64> = clip.frames().iter().map(|f| f.mean_norm()).collect();
    progression_from_magnitudes(&raw)
}

/// The progression pipeline applied to precomputed per-frame magnitudes.
pub fn progression_from_magnitudes(raw: &[f64]) -> Result<Vec<f64>> {
    let k = raw.len();
    if k < 2 {
        return Err(Error::InvalidArgument("progression needs at least 2 frames".into()));
    }
    let smoothed: Vec<f64> = (0..k)
        .map(|i| {
            let h = SMOOTH_HALF_WIDTH.min(i).min(k - 1 - i);
            let mut w: Vec<f64> = raw[i - h..=i + h].to_vec();
            w.sort_by(f64::total_cmp);
            w[h]
        })
        .collect();
    let span = smoothed[k - 1] - smoothed[0];
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::Data("degenerate clip".into()));
    }
    let mut p: Vec<f64> = smoothed.iter().map(|s| (s - smoothed[0]) / span).collect();
    let mut running = 0.0f64;
    for v in p.iter_mut() {
        running = running.max(*v).min(1.0);
        *v = running;
    }
    p[0] = 0.0;
    Ok(p)
}

/// Apex landmark deformation of a clip and its per-class normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremenessFactor {
    pub raw: f64,
    /// `raw / class_max`, capped at 1 for clips outside the reference corpus.
    pub normalized: f64,
}

impl ExtremenessFactor {
    pub fn new(raw: f64, class_max: f64) -> Result<Self> {
        if !(raw > 0.0 && class_max > 0.0) || !raw.is_finite() || !class_max.is_finite() {
            return Err(Error::Data(format!(
                "extremeness needs positive values, got raw={raw} max={class_max}"
            )));
        }
        Ok(Self {
            raw,
            normalized: (raw / class_max).min(1.0),
        })
    }
}

/// Mean deformation norm over `landmarks` at the last (apex) frame.
pub fn raw_extremeness(clip: &AnimationClip, landmarks: &[usize]) -> Result<f64> {
    if landmarks.is_empty() {
        return Err(Error::InvalidArgument("landmark list is empty".into()));
    }
    let apex = clip.apex().offsets();
    landmarks
        .iter()
        .map(|&l| {
            apex.get(l)
                .map(norm3)
                .ok_or_else(|| Error::InvalidArgument(format!("landmark {l} out of range")))
        })
        .sum::<Result<f64>>()
        .map(|s| s / landmarks.len() as f64)
}

/// Largest raw extremeness per expression class over `clips`.
pub fn corpus_max_by_class<'a>(
    clips: impl IntoIterator<Item = &'a AnimationClip>,
    landmarks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    for clip in clips {
        let r = raw_extremeness(clip, landmarks)?;
        let e = out.entry(clip.expression_class()).or_insert(0.0);
        *e = e.max(r);
    }
    Ok(out)
}

/// Extremeness of `clip` normalized by its class maximum.
pub fn extremeness_factor(
    clip: &AnimationClip,
    landmarks: &[usize],
    corpus_max_by_class: &BTreeMap<usize, f64>,
) -> Result<ExtremenessFactor> {
    let class = clip.expression_class();
    let max = corpus_max_by_class
        .get(&class)
        .ok_or_else(|| Error::Data(format!("no corpus maximum for class {class}")))?;
    ExtremenessFactor::new(raw_extremeness(clip, landmarks)?, *max)
}

/// How per-frame intensities are scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalMode {
    /// Progression scaled by the clip's normalized extremeness.
    Global,
    /// Progression only.
    Local,
    /// Progression scaled by a chosen intensity in `(0, 1]`.
    Varying { intensity: f64 },
}

/// Per-frame conditioning rows `e_i = p_i * onehot(class)`, scaled per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionSignal {
    rows: Vec<Vec<f64>>,
    class: usize,
    mode: SignalMode,
}

impl ExpressionSignal {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn num_frames(&self) -> usize {
        self.rows.len()
    }

    pub fn num_classes(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn mode(&self) -> SignalMode {
        self.mode
    }

    /// Class-channel value of the last row.
    pub fn apex_value(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r[self.class])
    }

    /// Space-separated `K x M` text matrix.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    /// Parses a text matrix; the class is the only channel that is ever
    /// nonzero. The mode is recorded as `mode`.
    pub fn from_text(text: &str, mode: SignalMode) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| Error::Data(format!("bad signal value {t:?}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let m = rows.first().map_or(0, Vec::len);
        if rows.len() < 2 || m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::Data("signal must be a K x M matrix with K >= 2".into()));
        }
        let mut class = None;
        for row in &rows {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    match class {
                        None => class = Some(c),
                        Some(k) if k == c => {}
                        Some(_) => return Err(Error::Data("signal has more than one active channel".into())),
                    }
                }
            }
        }
        let class = class.ok_or_else(|| Error::Data("signal is all zero".into()))?;
        Ok(Self { rows, class, mode })
    }
}

/// Builds the conditioning signal for `class` out of `m` classes.
pub fn make_expression_signal(
    class: usize,
    m: usize,
    p: &[f64],
    g: &ExtremenessFactor,
    mode: SignalMode,
) -> Result<ExpressionSignal> {
    if class >= m {
        return Err(Error::InvalidArgument(format!("class {class} not in [0, {m})")));
    }
    if p.len() < 2 {
        return Err(Error::InvalidArgument("progression needs at least 2 frames".into()));
    }
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) || p.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(
            "progression must be non-decreasing within [0, 1]".into(),
        ));
    }
    let scale = match mode {
        SignalMode::Global => g.normalized,
        SignalMode::Local => 1.0,
        SignalMode::Varying { intensity } => {
            if !(intensity > 0.0 && intensity <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "intensity must lie in (0, 1], got {intensity}"
                )));
            }
            intensity
        }
    };
    let rows = p
        .iter()
        .map(|&pi| {
            let mut r = vec![0.0; m];
            r[class] = scale * pi;
            r
        })
        .collect();
    Ok(ExpressionSignal { rows, class, mode })
}
