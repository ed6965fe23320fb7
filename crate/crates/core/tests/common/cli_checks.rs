use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{bail, ensure, Context, Result};
use mesh_diffusion::cli::{
    cmd_evaluate, cmd_generate, cmd_preprocess, cmd_synth, cmd_train, GenerateRequest, RunConfig, CHECKPOINT_FILE,
    INVOCATION_PREFIX, SPLIT_FILE,
};
use mesh_diffusion::datapipe::DatasetSplit;

/// Config of a pipeline small enough to run in seconds.
pub const TINY_CONFIG: &str = "\
K = 6
M = 3
T = 20
beta1 = 0.001
betaT = 0.2
t_s = 8
epochs = 3
batch_size = 8
hidden_widths = 8,8
spiral_lengths = 9,9
d_idx = 4
d_t = 8
subjects = 4
vertices = 42
data_seed = 3
noise_seed = 5
";

pub fn meshdiff() -> Command {
    Command::new(env!("CARGO_BIN_EXE_meshdiff"))
}

/// Runs the binary and returns (exit code, stdout, stderr).
pub fn run_bin(args: &[&str]) -> Result<(i32, String, String)> {
    let out = meshdiff().args(args).output().context("spawning meshdiff")?;
    Ok((
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    ))
}

fn run_ok(args: &[String]) -> Result<()> {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, _, err) = run_bin(&refs)?;
    ensure!(code == 0, "meshdiff {args:?} exited {code}: {err}");
    Ok(())
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

pub struct Stages {
    pub raw: PathBuf,
    pub proc: PathBuf,
    pub model: PathBuf,
    pub gen: PathBuf,
    pub eval: PathBuf,
}

impl Stages {
    pub fn under(root: &Path) -> Self {
        Self {
            raw: root.join("raw"),
            proc: root.join("proc"),
            model: root.join("model"),
            gen: root.join("gen"),
            eval: root.join("eval"),
        }
    }
}

/// First test-split subject's class-0 clip of a processed dataset.
pub fn reference_clip(proc: &Path) -> Result<PathBuf> {
    let split = DatasetSplit::load(&proc.join(SPLIT_FILE))?;
    let subject = split.test.first().context("empty test split")?;
    Ok(proc.join(format!("{subject}_class0")))
}

fn tiny(extra: &[(&str, &str)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.apply_text(TINY_CONFIG, Path::new("<tiny>"))?;
    for (k, v) in extra {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

pub fn run_library(root: &Path) -> Result<Stages> {
    let s = Stages::under(root);
    cmd_synth(&tiny(&[("out_dir", &p(&s.raw))])?, false)?;
    cmd_preprocess(&tiny(&[("dataset_dir", &p(&s.raw)), ("out_dir", &p(&s.proc))])?)?;
    cmd_train(&tiny(&[("dataset_dir", &p(&s.proc)), ("out_dir", &p(&s.model))])?, false, None)?;
    let reference = reference_clip(&s.proc)?;
    let req = GenerateRequest {
        checkpoint: Some(s.model.join(CHECKPOINT_FILE)),
        reference: Some(reference.clone()),
        ..GenerateRequest::default()
    };
    let gen_dir = s.gen.join(reference.file_name().context("clip name")?);
    cmd_generate(&tiny(&[("out_dir", &p(&gen_dir))])?, &req)?;
    cmd_evaluate(&tiny(&[("dataset_dir", &p(&s.proc)), ("out_dir", &p(&s.eval))])?, &s.gen)?;
    Ok(s)
}

pub fn run_binary(root: &Path) -> Result<Stages> {
    let s = Stages::under(root);
    let cfg = root.join("tiny.cfg");
    std::fs::create_dir_all(root)?;
    std::fs::write(&cfg, TINY_CONFIG)?;
    let c = p(&cfg);
    let base = |cmd: &str| vec![cmd.to_string(), "--config".to_string(), c.clone()];
    let with = |mut v: Vec<String>, extra: &[(&str, String)]| {
        for (k, val) in extra {
            v.push(format!("--{k}"));
            v.push(val.clone());
        }
        v
    };
    run_ok(&with(base("synth"), &[("out_dir", p(&s.raw))]))?;
    run_ok(&with(base("preprocess"), &[("dataset_dir", p(&s.raw)), ("out_dir", p(&s.proc))]))?;
    run_ok(&with(base("train"), &[("dataset_dir", p(&s.proc)), ("out_dir", p(&s.model))]))?;
    let reference = reference_clip(&s.proc)?;
    let gen_dir = s.gen.join(reference.file_name().context("clip name")?);
    run_ok(&with(
        base("generate"),
        &[("checkpoint", p(&s.model.join(CHECKPOINT_FILE))), ("reference", p(&reference)), ("out_dir", p(&gen_dir))],
    ))?;
    run_ok(&with(
        base("evaluate"),
        &[("dataset_dir", p(&s.proc)), ("out_dir", p(&s.eval)), ("generated", p(&s.gen))],
    ))?;
    Ok(s)
}

/// Every file under `dir` by relative path. `config.resolved` files are
/// normalized: `root` becomes `<root>` and the `out_dir` line is dropped.
pub fn tree(dir: &Path, root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let mut bytes = std::fs::read(&path)?;
            if path.file_name().is_some_and(|n| n == "config.resolved") {
                let text = String::from_utf8(bytes)?.replace(&p(root), "<root>");
                bytes = text
                    .lines()
                    .filter(|l| !l.starts_with("out_dir ="))
                    .map(|l| format!("{l}\n"))
                    .collect::<String>()
                    .into_bytes();
            }
            out.insert(path.strip_prefix(dir)?.to_path_buf(), bytes);
        }
    }
    Ok(out)
}

pub fn ensure_same_tree(a: &Path, root_a: &Path, b: &Path, root_b: &Path) -> Result<()> {
    let ta = tree(a, root_a)?;
    let tb = tree(b, root_b)?;
    let ka: Vec<_> = ta.keys().collect();
    let kb: Vec<_> = tb.keys().collect();
    ensure!(ka == kb, "{}: file sets differ: {ka:?} vs {kb:?}", a.display());
    for (k, v) in &ta {
        if tb[k] != *v {
            bail!("{} differs between runs", a.join(k).display());
        }
    }
    Ok(())
}

fn compare_stages(a: &Stages, ra: &Path, b: &Stages, rb: &Path) -> Result<()> {
    for (x, y) in [(&a.raw, &b.raw), (&a.proc, &b.proc), (&a.model, &b.model), (&a.gen, &b.gen), (&a.eval, &b.eval)] {
        ensure_same_tree(x, ra, y, rb)?;
    }
    Ok(())
}

pub fn commands_deterministic() -> Result<()> {
    let d1 = tempfile::tempdir()?;
    let d2 = tempfile::tempdir()?;
    let a = run_library(d1.path())?;
    let b = run_library(d2.path())?;
    compare_stages(&a, d1.path(), &b, d2.path())
}

pub fn binary_equals_library() -> Result<()> {
    let d1 = tempfile::tempdir()?;
    let d2 = tempfile::tempdir()?;
    let a = run_library(d1.path())?;
    let b = run_binary(d2.path())?;
    compare_stages(&a, d1.path(), &b, d2.path())
}

/// Re-runs a stage from nothing but its `config.resolved`, into `dest`.
pub fn replay(resolved: &Path, dest: &Path) -> Result<()> {
    let text = std::fs::read_to_string(resolved)?;
    let first = text.lines().next().unwrap_or("");
    let invocation = first
        .strip_prefix(INVOCATION_PREFIX)
        .with_context(|| format!("{} has no invocation line", resolved.display()))?;
    let mut args: Vec<String> = invocation.split_whitespace().map(str::to_string).collect();
    args.extend(["--config".to_string(), p(resolved), "--out_dir".to_string(), p(dest)]);
    run_ok(&args)
}

pub fn resolved_config_reproduces() -> Result<()> {
    let d = tempfile::tempdir()?;
    let root = d.path();
    let s = run_library(root)?;
    let gen_clip = std::fs::read_dir(&s.gen)?.next().context("no generated clip")??.path();
    for stage in [&s.raw, &s.proc, &s.model, &gen_clip, &s.eval] {
        let again = root.join("again").join(stage.strip_prefix(root)?);
        replay(&stage.join("config.resolved"), &again)?;
        ensure_same_tree(stage, root, &again, root)?;
    }
    Ok(())
}
