//! The `meshdiff` command line: `synth`, `preprocess`, `train`, `generate`
//! and `evaluate`, all driven by one [`RunConfig`].

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};

pub use commands::{
    cmd_evaluate, cmd_generate, cmd_preprocess, cmd_synth, cmd_train, generation_signal, load_processed,
    network_spec, schedule, train_config, GenerateRequest, ProcessedClip, CHECKPOINT_FILE, EXTREMENESS_FILE,
    LANDMARKS_FILE, LOSS_FILE, PROGRESSION_FILE, SIGNAL_FILE, SPLIT_FILE,
};
pub use config::{IntensityMode, RunConfig, CONFIG_KEYS, INVOCATION_PREFIX};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "meshdiff", version, about = "Diffusion-based 4D facial expression synthesis on fixed-topology meshes")]
struct Cli {
    /// `key = value` config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic expression corpus.
    Synth {
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Standardize clips, compute signals, extremeness and the split.
    Preprocess,
    /// Train the denoiser on a preprocessed dataset.
    Train {
        /// Continue from the checkpoint in out_dir.
        #[arg(long)]
        resume: bool,
        /// Stop after this many epochs in total.
        #[arg(long, value_name = "EPOCH")]
        stop_epoch: Option<usize>,
    },
    /// Sample one animation.
    Generate {
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Processed clip directory providing neutral, subject, class and progression.
        #[arg(long, value_name = "DIR")]
        reference: Option<PathBuf>,
        /// Neutral mesh (OBJ or PLY).
        #[arg(long, value_name = "FILE")]
        neutral: Option<PathBuf>,
        #[arg(long)]
        class: Option<usize>,
        #[arg(long)]
        subject: Option<String>,
        /// Progression values, one per line.
        #[arg(long, value_name = "FILE")]
        progression: Option<PathBuf>,
    },
    /// Score generated clips against the processed reference set.
    Evaluate {
        /// A generated clip directory, or a directory of them.
        #[arg(long, value_name = "DIR")]
        generated: PathBuf,
    },
}

/// One optional flag per config key.
#[derive(Debug, Args)]
struct Overrides {
    #[arg(long = "dataset_dir", value_name = "VALUE", global = true)]
    dataset_dir: Option<String>,
    #[arg(long = "out_dir", value_name = "VALUE", global = true)]
    out_dir: Option<String>,
    #[arg(long = "K", value_name = "VALUE", global = true)]
    key_k: Option<String>,
    #[arg(long = "M", value_name = "VALUE", global = true)]
    key_m: Option<String>,
    #[arg(long = "T", value_name = "VALUE", global = true)]
    key_t: Option<String>,
    #[arg(long = "beta1", value_name = "VALUE", global = true)]
    beta1: Option<String>,
    #[arg(long = "betaT", value_name = "VALUE", global = true)]
    beta_t_final: Option<String>,
    #[arg(long = "t_s", value_name = "VALUE", global = true)]
    t_s: Option<String>,
    #[arg(long = "epochs", value_name = "VALUE", global = true)]
    epochs: Option<String>,
    #[arg(long = "batch_size", value_name = "VALUE", global = true)]
    batch_size: Option<String>,
    #[arg(long = "lr_initial", value_name = "VALUE", global = true)]
    lr_initial: Option<String>,
    #[arg(long = "lr_final", value_name = "VALUE", global = true)]
    lr_final: Option<String>,
    #[arg(long = "hidden_widths", value_name = "VALUE", global = true)]
    hidden_widths: Option<String>,
    #[arg(long = "spiral_lengths", value_name = "VALUE", global = true)]
    spiral_lengths: Option<String>,
    #[arg(long = "d_idx", value_name = "VALUE", global = true)]
    d_idx: Option<String>,
    #[arg(long = "d_t", value_name = "VALUE", global = true)]
    d_t: Option<String>,
    #[arg(long = "d_id", value_name = "VALUE", global = true)]
    d_id: Option<String>,
    #[arg(long = "use_identity", value_name = "VALUE", global = true)]
    use_identity: Option<String>,
    #[arg(long = "noise_mode", value_name = "VALUE", global = true)]
    noise_mode: Option<String>,
    #[arg(long = "intensity_mode", value_name = "VALUE", global = true)]
    intensity_mode: Option<String>,
    #[arg(long = "intensity", value_name = "VALUE", global = true)]
    intensity: Option<String>,
    #[arg(long = "data_seed", value_name = "VALUE", global = true)]
    data_seed: Option<String>,
    #[arg(long = "init_seed", value_name = "VALUE", global = true)]
    init_seed: Option<String>,
    #[arg(long = "train_seed", value_name = "VALUE", global = true)]
    train_seed: Option<String>,
    #[arg(long = "noise_seed", value_name = "VALUE", global = true)]
    noise_seed: Option<String>,
    #[arg(long = "subjects", value_name = "VALUE", global = true)]
    subjects: Option<String>,
    #[arg(long = "vertices", value_name = "VALUE", global = true)]
    vertices: Option<String>,
    #[arg(long = "n_train", value_name = "VALUE", global = true)]
    n_train: Option<String>,
    #[arg(long = "landmarks", value_name = "VALUE", global = true)]
    landmarks: Option<String>,
    #[arg(long = "threads", value_name = "VALUE", global = true)]
    threads: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("dataset_dir", &self.dataset_dir),
            ("out_dir", &self.out_dir),
            ("K", &self.key_k),
            ("M", &self.key_m),
            ("T", &self.key_t),
            ("beta1", &self.beta1),
            ("betaT", &self.beta_t_final),
            ("t_s", &self.t_s),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("lr_initial", &self.lr_initial),
            ("lr_final", &self.lr_final),
            ("hidden_widths", &self.hidden_widths),
            ("spiral_lengths", &self.spiral_lengths),
            ("d_idx", &self.d_idx),
            ("d_t", &self.d_t),
            ("d_id", &self.d_id),
            ("use_identity", &self.use_identity),
            ("noise_mode", &self.noise_mode),
            ("intensity_mode", &self.intensity_mode),
            ("intensity", &self.intensity),
            ("data_seed", &self.data_seed),
            ("init_seed", &self.init_seed),
            ("train_seed", &self.train_seed),
            ("noise_seed", &self.noise_seed),
            ("subjects", &self.subjects),
            ("vertices", &self.vertices),
            ("n_train", &self.n_train),
            ("landmarks", &self.landmarks),
            ("threads", &self.threads),
        ]
    }
}

/// Exit status for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn resolve(cli: &Cli) -> crate::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for (key, value) in cli.overrides.pairs() {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> crate::Result<()> {
    let cfg = resolve(cli)?;
    match &cli.command {
        Command::Synth { force } => cmd_synth(&cfg, *force).map(drop),
        Command::Preprocess => cmd_preprocess(&cfg).map(drop),
        Command::Train { resume, stop_epoch } => cmd_train(&cfg, *resume, *stop_epoch).map(drop),
        Command::Generate {
            checkpoint,
            reference,
            neutral,
            class,
            subject,
            progression,
        } => {
            let req = GenerateRequest {
                checkpoint: checkpoint.clone(),
                reference: reference.clone(),
                neutral: neutral.clone(),
                class: *class,
                subject: subject.clone(),
                progression: progression.clone(),
            };
            cmd_generate(&cfg, &req).map(drop)
        }
        Command::Evaluate { generated } => cmd_evaluate(&cfg, generated).map(drop),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_code(&e);
            if code == EXIT_USAGE {
                eprintln!("{}", Cli::command().render_usage());
            }
            code
        }
    }
}
