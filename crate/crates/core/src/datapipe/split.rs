use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Disjoint train/test partition of subject ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn is_train(&self, subject: &str) -> bool {
        self.train.iter().any(|s| s == subject)
    }

    pub fn is_test(&self, subject: &str) -> bool {
        self.test.iter().any(|s| s == subject)
    }

    /// Lines of the form `train <id>` / `test <id>`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for id in &self.train {
            s.push_str(&format!("train {id}\n"));
        }
        for id in &self.test {
            s.push_str(&format!("test {id}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut split = DatasetSplit { train: Vec::new(), test: Vec::new() };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once(' ') {
                Some(("train", id)) => split.train.push(id.trim().to_string()),
                Some(("test", id)) => split.test.push(id.trim().to_string()),
                _ => return Err(Error::Data(format!("bad split line {}: {line:?}", i + 1))),
            }
        }
        if split.train.iter().any(|s| split.is_test(s)) {
            return Err(Error::Data("split lists a subject in both train and test".into()));
        }
        Ok(split)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Shuffles the distinct subject ids with `seed` and takes the first
/// `n_train` for training. Ids are deduplicated and sorted before shuffling,
/// so the result does not depend on input order.
pub fn split_subjectwise<S: AsRef<str>>(subject_ids: &[S], n_train: usize, seed: u64) -> Result<DatasetSplit> {
    let unique: BTreeSet<&str> = subject_ids.iter().map(AsRef::as_ref).collect();
    let mut ids: Vec<String> = unique.into_iter().map(str::to_string).collect();
    if n_train == 0 || n_train >= ids.len() {
        return Err(Error::InvalidArgument(format!(
            "n_train must lie in [1, {}), got {n_train}",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = ids.split_off(n_train);
    Ok(DatasetSplit { train: ids, test })
}
