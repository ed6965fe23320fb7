//! On-disk clip layout: one directory per clip holding `neutral.obj`,
//! `frame_000.obj` .. `frame_{K-1}.obj` and a `clip.meta` key/value file.

use std::fs;
use std::path::{Path, PathBuf};

use super::io::format_obj;
use super::{compute_deformation, load_mesh, AnimationClip};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipMeta {
    pub subject: String,
    pub expression_class: usize,
    pub num_frames: usize,
}

impl ClipMeta {
    fn render(&self) -> String {
        format!(
            "subject={}\nexpression_class={}\nnum_frames={}\n",
            self.subject, self.expression_class, self.num_frames
        )
    }

    fn parse(path: &Path, text: &str) -> Result<Self> {
        let (mut subject, mut class, mut frames) = (None, None, None);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected key=value"))?;
            match k.trim() {
                "subject" => subject = Some(v.trim().to_string()),
                "expression_class" => {
                    class = Some(v.trim().parse().map_err(|_| {
                        Error::parse(path, i + 1, "expression_class must be an integer")
                    })?)
                }
                "num_frames" => {
                    frames = Some(v.trim().parse().map_err(|_| {
                        Error::parse(path, i + 1, "num_frames must be an integer")
                    })?)
                }
                other => return Err(Error::parse(path, i + 1, format!("unknown key {other}"))),
            }
        }
        let missing = |k: &str| Error::parse(path, 0, format!("missing key {k}"));
        Ok(ClipMeta {
            subject: subject.ok_or_else(|| missing("subject"))?,
            expression_class: class.ok_or_else(|| missing("expression_class"))?,
            num_frames: frames.ok_or_else(|| missing("num_frames"))?,
        })
    }
}

pub fn frame_file_name(i: usize) -> String {
    format!("frame_{i:03}.obj")
}

/// Writes `clip` into `dir` (created if needed).
pub fn save_clip(clip: &AnimationClip, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(p, e))
    };
    write("neutral.obj", format_obj(clip.neutral()))?;
    for i in 0..clip.num_frames() {
        write(&frame_file_name(i), format_obj(&clip.frame_mesh(i)?))?;
    }
    let meta = ClipMeta {
        subject: clip.subject_id().to_string(),
        expression_class: clip.expression_class(),
        num_frames: clip.num_frames(),
    };
    write("clip.meta", meta.render())
}

/// Reads one clip directory. Frame 0 is not required to be neutral, so
/// generated clips load too; see [`AnimationClip::starts_neutral`].
pub fn load_clip(dir: impl AsRef<Path>) -> Result<AnimationClip> {
    let dir = dir.as_ref();
    let meta_path = dir.join("clip.meta");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta = ClipMeta::parse(&meta_path, &text)?;
    let neutral = load_mesh(dir.join("neutral.obj"), 1.0)?;
    let frames = (0..meta.num_frames)
        .map(|i| compute_deformation(&load_mesh(dir.join(frame_file_name(i)), 1.0)?, &neutral))
        .collect::<Result<Vec<_>>>()?;
    AnimationClip::new_generated(neutral, frames, meta.expression_class, meta.subject)
}

/// Every clip directory directly under `root`, in lexicographic order.
pub fn load_clips(root: impl AsRef<Path>) -> Result<Vec<(PathBuf, AnimationClip)>> {
    clip_dirs(root.as_ref())?
        .into_iter()
        .map(|d| load_clip(&d).map(|c| (d, c)))
        .collect()
}

pub(crate) fn clip_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("clip.meta").is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}
