use std::path::Path;

use crate::error::{Error, Result};

/// Parses a landmark list: one vertex index per line, `#` comments allowed.
pub fn parse_landmarks(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("").trim();
            (!l.is_empty()).then_some((i, l))
        })
        .map(|(i, l)| {
            l.parse::<usize>()
                .map_err(|_| Error::Data(format!("bad landmark index at line {}: {l:?}", i + 1)))
        })
        .collect()
}

pub fn load_landmarks(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lm = parse_landmarks(&text).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    if lm.is_empty() {
        return Err(Error::Data(format!("{}: no landmarks", path.display())));
    }
    Ok(lm)
}

pub fn save_landmarks(path: &Path, landmarks: &[usize]) -> Result<()> {
    let text: String = landmarks.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
