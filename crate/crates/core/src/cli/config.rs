use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::datapipe::DEFAULT_FRAMES;
use crate::diffusion::NoiseMode;
use crate::error::{Error, Result};

/// How expression intensity enters the conditioning signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityMode {
    /// Progression scaled by the clip's normalized extremeness.
    Global,
    /// Progression only.
    Local,
    /// Maximum intensity at generation time (`varying` with 1.0).
    Extreme,
    /// A chosen (or seeded-random) intensity at generation time.
    Varying,
}

impl std::str::FromStr for IntensityMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "local" => Ok(Self::Local),
            "extreme" => Ok(Self::Extreme),
            "varying" => Ok(Self::Varying),
            _ => Err(Error::InvalidArgument(format!(
                "intensity_mode must be global, local, extreme or varying, got {s:?}"
            ))),
        }
    }
}

impl std::fmt::Display for IntensityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Global => "global",
            Self::Local => "local",
            Self::Extreme => "extreme",
            Self::Varying => "varying",
        })
    }
}

/// Every setting of a run. Parsed from `key = value` lines, then
/// overridden by flags; the resolved form is written next to outputs.
#[derive(Debug, Clone, PartialEq)]
#[allow(non_snake_case)]
pub struct RunConfig {
    pub dataset_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub K: usize,
    pub M: usize,
    pub T: usize,
    pub beta1: f64,
    pub betaT: f64,
    pub t_s: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub hidden_widths: Vec<usize>,
    pub spiral_lengths: Vec<usize>,
    pub d_idx: usize,
    pub d_t: usize,
    pub d_id: usize,
    pub use_identity: bool,
    pub noise_mode: NoiseMode,
    pub intensity_mode: IntensityMode,
    /// Intensity for `varying` generation; drawn from `noise_seed` if unset.
    pub intensity: Option<f64>,
    pub data_seed: u64,
    pub init_seed: u64,
    pub train_seed: u64,
    pub noise_seed: u64,
    /// Synthetic corpus size.
    pub subjects: usize,
    pub vertices: usize,
    /// Training subjects in the split; three quarters of all if unset.
    pub n_train: Option<usize>,
    /// Landmark file for real data; synthetic datasets ship their own.
    pub landmarks: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Leading comment of a resolved config naming the command that wrote it.
pub const INVOCATION_PREFIX: &str = "# invocation: meshdiff ";

/// Config keys in file order.
pub const CONFIG_KEYS: &[&str] = &[
    "dataset_dir",
    "out_dir",
    "K",
    "M",
    "T",
    "beta1",
    "betaT",
    "t_s",
    "epochs",
    "batch_size",
    "lr_initial",
    "lr_final",
    "hidden_widths",
    "spiral_lengths",
    "d_idx",
    "d_t",
    "d_id",
    "use_identity",
    "noise_mode",
    "intensity_mode",
    "intensity",
    "data_seed",
    "init_seed",
    "train_seed",
    "noise_seed",
    "subjects",
    "vertices",
    "n_train",
    "landmarks",
    "threads",
];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_dir: None,
            out_dir: None,
            K: DEFAULT_FRAMES,
            M: 3,
            T: 1000,
            beta1: 1e-4,
            betaT: 0.02,
            t_s: 400,
            epochs: 200,
            batch_size: 32,
            lr_initial: 1e-3,
            lr_final: 1e-4,
            hidden_widths: vec![16, 32, 64, 128],
            spiral_lengths: vec![9, 9, 12, 12],
            d_idx: 8,
            d_t: 64,
            d_id: 16,
            use_identity: false,
            noise_mode: NoiseMode::Shared,
            intensity_mode: IntensityMode::Global,
            intensity: None,
            data_seed: 0,
            init_seed: 0,
            train_seed: 0,
            noise_seed: 0,
            subjects: 6,
            vertices: 162,
            n_train: None,
            landmarks: None,
            threads: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {v:?}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.is_empty() || v == "none" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn opt_path(v: &Option<PathBuf>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let path = |v: &str| if v.is_empty() || v == "none" { None } else { Some(PathBuf::from(v)) };
        match key {
            "dataset_dir" => self.dataset_dir = path(v),
            "out_dir" => self.out_dir = path(v),
            "K" => self.K = parse_num(key, v)?,
            "M" => self.M = parse_num(key, v)?,
            "T" => self.T = parse_num(key, v)?,
            "beta1" => self.beta1 = parse_num(key, v)?,
            "betaT" => self.betaT = parse_num(key, v)?,
            "t_s" => self.t_s = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "lr_initial" => self.lr_initial = parse_num(key, v)?,
            "lr_final" => self.lr_final = parse_num(key, v)?,
            "hidden_widths" => self.hidden_widths = parse_list(key, v)?,
            "spiral_lengths" => self.spiral_lengths = parse_list(key, v)?,
            "d_idx" => self.d_idx = parse_num(key, v)?,
            "d_t" => self.d_t = parse_num(key, v)?,
            "d_id" => self.d_id = parse_num(key, v)?,
            "use_identity" => self.use_identity = parse_num(key, v)?,
            "noise_mode" => self.noise_mode = v.parse()?,
            "intensity_mode" => self.intensity_mode = v.parse()?,
            "intensity" => self.intensity = parse_opt(key, v)?,
            "data_seed" => self.data_seed = parse_num(key, v)?,
            "init_seed" => self.init_seed = parse_num(key, v)?,
            "train_seed" => self.train_seed = parse_num(key, v)?,
            "noise_seed" => self.noise_seed = parse_num(key, v)?,
            "subjects" => self.subjects = parse_num(key, v)?,
            "vertices" => self.vertices = parse_num(key, v)?,
            "n_train" => self.n_train = parse_opt(key, v)?,
            "landmarks" => self.landmarks = path(v),
            "threads" => self.threads = parse_opt(key, v)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Textual value of a key, in the form [`set`](Self::set) accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "dataset_dir" => opt_path(&self.dataset_dir),
            "out_dir" => opt_path(&self.out_dir),
            "K" => self.K.to_string(),
            "M" => self.M.to_string(),
            "T" => self.T.to_string(),
            "beta1" => self.beta1.to_string(),
            "betaT" => self.betaT.to_string(),
            "t_s" => self.t_s.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "lr_initial" => self.lr_initial.to_string(),
            "lr_final" => self.lr_final.to_string(),
            "hidden_widths" => join(&self.hidden_widths),
            "spiral_lengths" => join(&self.spiral_lengths),
            "d_idx" => self.d_idx.to_string(),
            "d_t" => self.d_t.to_string(),
            "d_id" => self.d_id.to_string(),
            "use_identity" => self.use_identity.to_string(),
            "noise_mode" => self.noise_mode.to_string(),
            "intensity_mode" => self.intensity_mode.to_string(),
            "intensity" => opt(&self.intensity),
            "data_seed" => self.data_seed.to_string(),
            "init_seed" => self.init_seed.to_string(),
            "train_seed" => self.train_seed.to_string(),
            "noise_seed" => self.noise_seed.to_string(),
            "subjects" => self.subjects.to_string(),
            "vertices" => self.vertices.to_string(),
            "n_train" => opt(&self.n_train),
            "landmarks" => opt_path(&self.landmarks),
            "threads" => opt(&self.threads),
            _ => return None,
        })
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected `key = value`"))?;
            self.set(k.trim(), v).map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    /// Every key with its resolved value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("listed key"));
        }
        s
    }

    /// Writes `config.resolved` into `dir`. `invocation` (the subcommand and
    /// its non-config arguments) is recorded as a leading comment so the
    /// file alone suffices to repeat the run.
    pub fn write_resolved(&self, dir: &Path, invocation: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("config.resolved");
        let text = format!("{INVOCATION_PREFIX}{invocation}\n{}", self.to_text());
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn n_train_resolved(&self, n_subjects: usize) -> usize {
        self.n_train
            .unwrap_or((n_subjects * 3) / 4)
            .clamp(1, n_subjects.saturating_sub(1).max(1))
    }
}
