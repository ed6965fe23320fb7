use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{IntensityMode, RunConfig};
use crate::datapipe::{
    corpus_max_by_class, extremeness_factor, load_landmarks, make_expression_signal, progression_signal,
    save_landmarks, split_subjectwise, standardize_frames, DatasetSplit, ExpressionSignal, ExtremenessFactor,
    SignalMode,
};
use crate::diffusion::{generate_animation, linear_schedule, sample_noise_bundle, NoiseSchedule, SamplerConfig};
use crate::error::{Error, Result};
use crate::evalkit::{
    classify, error_map, fit_pca_variance, save_error_map, specificity, train_classifier, ClassifierConfig,
    EvalReport, DEFAULT_VARIANCE_FRACTION,
};
use crate::mesh::{load_clip, load_clips, load_mesh, save_clip, save_mesh, synth_dataset, AnimationClip};
use crate::spiral::{DenoiserNetwork, IdentitySpec, NetworkSpec};
use crate::training::{load_checkpoint, save_checkpoint, train_epochs, TrainConfig, TrainState, TrainingSet};

pub const LANDMARKS_FILE: &str = "landmarks.txt";
pub const SPLIT_FILE: &str = "split.txt";
pub const SIGNAL_FILE: &str = "signal.txt";
pub const PROGRESSION_FILE: &str = "progression.txt";
pub const EXTREMENESS_FILE: &str = "extremeness.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.mdck";
pub const LOSS_FILE: &str = "loss.csv";

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::InvalidArgument(format!("{key} is required (config key or --{key})")))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn clip_dir_name(clip: &AnimationClip) -> String {
    format!("{}_class{}", clip.subject_id(), clip.expression_class())
}

pub fn schedule(cfg: &RunConfig) -> Result<NoiseSchedule> {
    linear_schedule(cfg.T, cfg.beta1, cfg.betaT)
}

pub fn network_spec(cfg: &RunConfig) -> NetworkSpec {
    NetworkSpec {
        expression_dim: cfg.M,
        timesteps: cfg.T,
        widths: cfg.hidden_widths.clone(),
        spiral_lengths: cfg.spiral_lengths.clone(),
        d_idx: cfg.d_idx,
        d_t: cfg.d_t,
        identity: cfg.use_identity.then(|| IdentitySpec {
            d_id: cfg.d_id,
            ..IdentitySpec::default()
        }),
        head_init_scale: 1e-2,
    }
}

pub fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        lr_initial: cfg.lr_initial,
        lr_final: cfg.lr_final,
        ..TrainConfig::new(cfg.epochs, cfg.batch_size, cfg.train_seed)
    }
}

/// Runs `f` on a pool capped at `cfg.threads` workers (rayon's default if
/// unset). Results never depend on the worker count.
fn with_threads<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

/// Writes a synthetic corpus into `out_dir`: one clip directory per
/// (subject, class), the landmark file and the resolved config.
pub fn cmd_synth(cfg: &RunConfig, force: bool) -> Result<PathBuf> {
    let out = required(&cfg.out_dir, "out_dir")?;
    if out.exists() {
        let non_empty = fs::read_dir(out).map_err(|e| Error::io(out, e))?.next().is_some();
        if non_empty && !force {
            return Err(Error::InvalidArgument(format!(
                "{} exists and is not empty; pass --force to overwrite",
                out.display()
            )));
        }
    }
    create_dir(out)?;
    let ds = synth_dataset(cfg.subjects, cfg.M, cfg.K, cfg.vertices, cfg.data_seed)?;
    for clip in &ds.clips {
        save_clip(clip, out.join(clip_dir_name(clip)))?;
    }
    save_landmarks(&out.join(LANDMARKS_FILE), &ds.landmarks())?;
    cfg.write_resolved(out, if force { "synth --force" } else { "synth" })?;
    eprintln!(
        "wrote {} clips ({} subjects x {} classes, {} frames, {} vertices) to {}",
        ds.clips.len(),
        cfg.subjects,
        cfg.M,
        cfg.K,
        ds.clips[0].neutral().num_vertices(),
        out.display()
    );
    Ok(out.to_path_buf())
}

fn signal_mode_for_training(mode: IntensityMode) -> SignalMode {
    match mode {
        IntensityMode::Local => SignalMode::Local,
        _ => SignalMode::Global,
    }
}

fn write_values(path: &Path, values: &[f64]) -> Result<()> {
    write(path, &values.iter().map(|v| format!("{v}\n")).collect::<String>())
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| l.trim().parse().map_err(|_| Error::parse(path, i + 1, format!("bad value {l:?}"))))
        .collect()
}

/// Standardizes every clip to `K` frames, computes progression signals and
/// extremeness factors, splits subjects, and writes the processed dataset.
/// Clips whose progression is undefined are skipped and reported.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<PathBuf> {
    let input = required(&cfg.dataset_dir, "dataset_dir")?;
    let out = required(&cfg.out_dir, "out_dir")?;
    let landmark_path = cfg.landmarks.clone().unwrap_or_else(|| input.join(LANDMARKS_FILE));
    let landmarks = load_landmarks(&landmark_path)?;
    let clips = load_clips(input)?;
    if clips.is_empty() {
        return Err(Error::Data(format!("no clips under {}", input.display())));
    }

    let mut kept: Vec<(String, AnimationClip, Vec<f64>)> = Vec::new();
    let mut skipped: Vec<String> = Vec::new();
    for (dir, clip) in clips {
        let name = dir.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        if clip.expression_class() >= cfg.M {
            return Err(Error::Data(format!(
                "{name}: class {} outside [0, {})",
                clip.expression_class(),
                cfg.M
            )));
        }
        let frames = standardize_frames(clip.frames(), cfg.K)?;
        let std_clip = AnimationClip::new_generated(
            clip.neutral().clone(),
            frames,
            clip.expression_class(),
            clip.subject_id(),
        )?;
        match progression_signal(&std_clip) {
            Ok(p) => kept.push((name, std_clip, p)),
            Err(e) => {
                eprintln!("warning: skipping {name}: {e}");
                skipped.push(format!("{name}: {e}"));
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::Data("every clip was skipped".into()));
    }

    let subjects: Vec<&str> = kept.iter().map(|(_, c, _)| c.subject_id()).collect();
    let n_subjects = {
        let mut s = subjects.clone();
        s.sort_unstable();
        s.dedup();
        s.len()
    };
    let split = split_subjectwise(&subjects, cfg.n_train_resolved(n_subjects), cfg.data_seed)?;
    let maxes = corpus_max_by_class(
        kept.iter().filter(|(_, c, _)| split.is_train(c.subject_id())).map(|(_, c, _)| c),
        &landmarks,
    )?;

    create_dir(out)?;
    let mode = signal_mode_for_training(cfg.intensity_mode);
    let mut table = String::from("# clip raw normalized\n");
    for (name, clip, p) in &kept {
        let g = extremeness_factor(clip, &landmarks, &maxes)?;
        let signal = make_expression_signal(clip.expression_class(), cfg.M, p, &g, mode)?;
        let dir = out.join(name);
        save_clip(clip, &dir)?;
        write(&dir.join(SIGNAL_FILE), &signal.to_text())?;
        write_values(&dir.join(PROGRESSION_FILE), p)?;
        write(&dir.join(EXTREMENESS_FILE), &format!("{} {}\n", g.raw, g.normalized))?;
        let _ = writeln!(table, "{name} {} {}", g.raw, g.normalized);
    }
    write(&out.join("extremeness.tsv"), &table)?;
    write(&out.join(SPLIT_FILE), &split.to_text())?;
    save_landmarks(&out.join(LANDMARKS_FILE), &landmarks)?;
    let mut report = format!("kept={}\nskipped={}\n", kept.len(), skipped.len());
    for s in &skipped {
        let _ = writeln!(report, "skip {s}");
    }
    write(&out.join("preprocess_report.txt"), &report)?;
    cfg.write_resolved(out, "preprocess")?;
    eprintln!(
        "preprocessed {} clips ({} skipped); split {} train / {} test subjects",
        kept.len(),
        skipped.len(),
        split.train.len(),
        split.test.len()
    );
    Ok(out.to_path_buf())
}

/// A processed clip directory with its conditioning signal.
pub struct ProcessedClip {
    pub dir: PathBuf,
    pub clip: AnimationClip,
    pub signal: ExpressionSignal,
}

/// Loads every processed clip of `root` whose subject satisfies `keep`.
pub fn load_processed(root: &Path, cfg: &RunConfig, keep: impl Fn(&str) -> bool) -> Result<Vec<ProcessedClip>> {
    let mode = signal_mode_for_training(cfg.intensity_mode);
    load_clips(root)?
        .into_iter()
        .filter(|(_, c)| keep(c.subject_id()))
        .map(|(dir, clip)| {
            let path = dir.join(SIGNAL_FILE);
            if !path.is_file() {
                return Err(Error::Data(format!("missing signal file {}", path.display())));
            }
            let signal = ExpressionSignal::from_text(&read(&path)?, mode)?;
            Ok(ProcessedClip { dir, clip, signal })
        })
        .collect()
}

/// Trains the denoiser on the training split of a processed dataset and
/// writes the checkpoint and per-epoch loss CSV. With `resume`, continues
/// from the checkpoint in `out_dir`; `stop_epoch` ends the run early.
pub fn cmd_train(cfg: &RunConfig, resume: bool, stop_epoch: Option<usize>) -> Result<PathBuf> {
    let data = required(&cfg.dataset_dir, "dataset_dir")?;
    let out = required(&cfg.out_dir, "out_dir")?;
    let split = DatasetSplit::load(&data.join(SPLIT_FILE))?;
    let clips = load_processed(data, cfg, |s| split.is_train(s))?;
    if clips.is_empty() {
        return Err(Error::Data("no training clips found".into()));
    }
    let mut set = TrainingSet::new();
    for c in &clips {
        set.push_clip(&c.clip, &c.signal)?;
    }
    let sched = schedule(cfg)?;
    let tcfg = train_config(cfg);
    let mut net = DenoiserNetwork::new(network_spec(cfg), clips[0].clip.neutral(), cfg.init_seed)?;
    let ckpt_path = out.join(CHECKPOINT_FILE);
    let mut state = if resume {
        let ck = load_checkpoint(&ckpt_path)?;
        net.set_params(ck.params)?;
        ck.state
            .ok_or_else(|| Error::Checkpoint("checkpoint has no optimizer state to resume from".into()))?
    } else {
        TrainState::new(net.params())
    };
    create_dir(out)?;
    let mut invocation = String::from("train");
    if resume {
        invocation.push_str(" --resume");
    }
    if let Some(e) = stop_epoch {
        let _ = write!(invocation, " --stop-epoch {e}");
    }
    cfg.write_resolved(out, &invocation)?;
    let until = stop_epoch.unwrap_or(cfg.epochs).min(cfg.epochs);
    eprintln!(
        "training on {} frames from {} clips, {} parameters, epochs {}..{}",
        set.num_frames(),
        clips.len(),
        net.params().num_elements(),
        state.epochs_done,
        until
    );
    with_threads(cfg, || {
        train_epochs(&set, &tcfg, &mut net, &sched, &mut state, until, |e, l| {
            if e % 10 == 0 || e + 1 == until {
                eprintln!("epoch {e} loss {l:.6}");
            }
        })
    })?;
    save_checkpoint(&ckpt_path, net.params(), Some(&state))?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in state.loss_history.iter().enumerate() {
        let _ = writeln!(csv, "{e},{l}");
    }
    write(&out.join(LOSS_FILE), &csv)?;
    Ok(ckpt_path)
}

/// Per-invocation generation inputs that are not part of the config.
#[derive(Debug, Clone, Default)]
pub struct GenerateRequest {
    pub checkpoint: Option<PathBuf>,
    /// A processed clip directory supplying neutral, subject, class,
    /// progression and extremeness.
    pub reference: Option<PathBuf>,
    pub neutral: Option<PathBuf>,
    pub class: Option<usize>,
    pub subject: Option<String>,
    /// Progression file (one value per line); linear ramp if absent.
    pub progression: Option<PathBuf>,
}

impl GenerateRequest {
    /// The request as `generate` command-line arguments.
    pub fn invocation(&self) -> String {
        let mut s = String::from("generate");
        let mut add = |flag: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = write!(s, " --{flag} {v}");
            }
        };
        add("checkpoint", self.checkpoint.as_ref().map(|p| p.display().to_string()));
        add("reference", self.reference.as_ref().map(|p| p.display().to_string()));
        add("neutral", self.neutral.as_ref().map(|p| p.display().to_string()));
        add("class", self.class.map(|c| c.to_string()));
        add("subject", self.subject.clone());
        add("progression", self.progression.as_ref().map(|p| p.display().to_string()));
        s
    }
}

/// Resolves the conditioning signal for a generation run.
pub fn generation_signal(cfg: &RunConfig, class: usize, p: &[f64], reference_g: Option<f64>) -> Result<ExpressionSignal> {
    let unit = ExtremenessFactor::new(1.0, 1.0)?;
    let intensity = |v: f64| SignalMode::Varying { intensity: v };
    let (g, mode) = match cfg.intensity_mode {
        IntensityMode::Local => (unit, SignalMode::Local),
        IntensityMode::Extreme => (unit, intensity(1.0)),
        IntensityMode::Varying => {
            let v = match cfg.intensity {
                Some(v) => v,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.noise_seed);
                    rng.set_stream(u64::MAX);
                    1.0 - rng.random::<f64>()
                }
            };
            (unit, intensity(v))
        }
        IntensityMode::Global => {
            let v = cfg.intensity.or(reference_g).unwrap_or(1.0);
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument(format!("intensity must lie in (0, 1], got {v}")));
            }
            (ExtremenessFactor::new(v, 1.0)?, SignalMode::Global)
        }
    };
    make_expression_signal(class, cfg.M, p, &g, mode)
}

/// Samples one animation with the late-start sampler and writes it as a
/// clip directory plus its signal and a log with the evaluation count.
pub fn cmd_generate(cfg: &RunConfig, req: &GenerateRequest) -> Result<PathBuf> {
    let out = required(&cfg.out_dir, "out_dir")?;
    let ckpt = req
        .checkpoint
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--checkpoint is required".into()))?;
    let reference = req.reference.as_deref().map(load_clip).transpose()?;
    let neutral = match (&req.neutral, &reference) {
        (Some(p), _) => load_mesh(p, 1.0)?,
        (None, Some(r)) => r.neutral().clone(),
        (None, None) => return Err(Error::InvalidArgument("--neutral or --reference is required".into())),
    };
    let class = req
        .class
        .or(reference.as_ref().map(AnimationClip::expression_class))
        .ok_or_else(|| Error::InvalidArgument("--class or --reference is required".into()))?;
    if class >= cfg.M {
        return Err(Error::InvalidArgument(format!("class {class} outside [0, {})", cfg.M)));
    }
    let subject = req
        .subject
        .clone()
        .or(reference.as_ref().map(|r| r.subject_id().to_string()))
        .unwrap_or_else(|| "generated".into());
    let progression_path = req
        .progression
        .clone()
        .or(req.reference.as_ref().map(|r| r.join(PROGRESSION_FILE)));
    let p = match progression_path {
        Some(path) => read_values(&path)?,
        None => (0..cfg.K).map(|i| i as f64 / (cfg.K - 1).max(1) as f64).collect(),
    };
    let reference_g = match &req.reference {
        Some(dir) if dir.join(EXTREMENESS_FILE).is_file() => read(&dir.join(EXTREMENESS_FILE))?
            .split_whitespace()
            .nth(1)
            .and_then(|s| s.parse::<f64>().ok()),
        _ => None,
    };
    let signal = generation_signal(cfg, class, &p, reference_g)?;

    let sched = schedule(cfg)?;
    let mut net = DenoiserNetwork::new(network_spec(cfg), &neutral, cfg.init_seed)?;
    net.set_params(load_checkpoint(ckpt)?.params)?;
    let bundle = sample_noise_bundle(neutral.num_vertices(), cfg.T, cfg.noise_seed)?;
    let sampler = SamplerConfig {
        t_s: cfg.t_s,
        noise_mode: cfg.noise_mode,
        concurrent: cfg.threads.is_some_and(|n| n > 1),
        threads: cfg.threads,
    };
    let gen = generate_animation(&neutral, &signal, &net, &sched, &sampler, &bundle)?;
    let clip = gen.clip.with_subject(subject);
    save_clip(&clip, out)?;
    write(&out.join(SIGNAL_FILE), &signal.to_text())?;
    let log = format!(
        "denoiser_evaluations={}\nT={}\nt_s={}\nK={}\nnoise_mode={}\nnoise_seed={}\n",
        gen.denoiser_evaluations,
        cfg.T,
        cfg.t_s,
        signal.num_frames(),
        cfg.noise_mode,
        cfg.noise_seed
    );
    write(&out.join("generation.log"), &log)?;
    cfg.write_resolved(out, &req.invocation())?;
    eprintln!("denoiser_evaluations={}", gen.denoiser_evaluations);
    Ok(out.to_path_buf())
}

/// Evaluates generated clips against the processed reference set: class
/// accuracy with an LSTM classifier trained on the reference clips,
/// specificity, per-frame curve, and apex error maps.
pub fn cmd_evaluate(cfg: &RunConfig, generated: &Path) -> Result<EvalReport> {
    let data = required(&cfg.dataset_dir, "dataset_dir")?;
    let out = required(&cfg.out_dir, "out_dir")?;
    let reference = load_clips(data)?;
    if reference.is_empty() {
        return Err(Error::Data(format!("no reference clips under {}", data.display())));
    }
    let generated_clips = if generated.join("clip.meta").is_file() {
        vec![(generated.to_path_buf(), load_clip(generated)?)]
    } else {
        load_clips(generated)?
    };
    if generated_clips.is_empty() {
        return Err(Error::Data(format!("no generated clips under {}", generated.display())));
    }
    let by_key: BTreeMap<(String, usize), &AnimationClip> = reference
        .iter()
        .map(|(_, c)| ((c.subject_id().to_string(), c.expression_class()), c))
        .collect();
    let missing: Vec<String> = generated_clips
        .iter()
        .filter(|(_, c)| !by_key.contains_key(&(c.subject_id().to_string(), c.expression_class())))
        .map(|(d, c)| format!("{} (subject {}, class {})", d.display(), c.subject_id(), c.expression_class()))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("no reference for: {}", missing.join("; "))));
    }

    let ref_clips: Vec<&AnimationClip> = reference.iter().map(|(_, c)| c).collect();
    let report = with_threads(cfg, || {
        let frames: Vec<Vec<f64>> = ref_clips.iter().flat_map(|c| c.frames().iter().map(|d| d.to_flat())).collect();
        let enc = fit_pca_variance(&frames, DEFAULT_VARIANCE_FRACTION)?;
        let clf = train_classifier(
            &ref_clips,
            &enc,
            &ClassifierConfig {
                seed: cfg.train_seed,
                ..ClassifierConfig::default()
            },
        )?;
        evaluate_pairs(&generated_clips, &by_key, &enc, &clf, out)
    })?;
    create_dir(out)?;
    write(&out.join("report.txt"), &report.to_text())?;
    write(&out.join("per_frame.csv"), &report.per_frame_csv())?;
    cfg.write_resolved(out, &format!("evaluate --generated {}", generated.display()))?;
    eprintln!(
        "accuracy={} specificity_avg_mm={}",
        report.accuracy, report.specificity_avg_mm
    );
    Ok(report)
}

fn evaluate_pairs(
    generated: &[(PathBuf, AnimationClip)],
    reference: &BTreeMap<(String, usize), &AnimationClip>,
    enc: &crate::evalkit::PcaEncoder,
    clf: &crate::evalkit::SequenceClassifier,
    out: &Path,
) -> Result<EvalReport> {
    let maps = out.join("errormaps");
    create_dir(&maps)?;
    let mut correct = 0usize;
    let mut per_frame: Vec<f64> = Vec::new();
    for (dir, clip) in generated {
        let r = reference[&(clip.subject_id().to_string(), clip.expression_class())];
        if classify(clip, enc, clf)?.class == clip.expression_class() {
            correct += 1;
        }
        let spec = specificity(clip, r)?;
        if per_frame.is_empty() {
            per_frame = vec![0.0; spec.per_frame.len()];
        } else if per_frame.len() != spec.per_frame.len() {
            return Err(Error::Shape("generated clips differ in frame count".into()));
        }
        per_frame.iter_mut().zip(&spec.per_frame).for_each(|(a, v)| *a += v);
        let apex = clip.num_frames() - 1;
        let gen_mesh = clip.frame_mesh(apex)?;
        let name = dir.file_name().map_or_else(|| "clip".to_string(), |n| n.to_string_lossy().into_owned());
        save_mesh(&gen_mesh, maps.join(format!("{name}_apex.obj")))?;
        save_error_map(&maps.join(format!("{name}_apex.err")), &error_map(&gen_mesh, &r.frame_mesh(apex)?)?)?;
    }
    let n = generated.len() as f64;
    per_frame.iter_mut().for_each(|v| *v /= n);
    let specificity_avg_mm = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
    Ok(EvalReport {
        accuracy: correct as f64 / n,
        specificity_avg_mm,
        per_frame_mm: per_frame,
    })
}
