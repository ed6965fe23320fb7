//! The full synth -> preprocess -> train -> generate -> evaluate pipeline via
//! the same library calls the `meshdiff` binary makes.

use anyhow::Result;
use mesh_diffusion::cli::{
    cmd_evaluate, cmd_generate, cmd_preprocess, cmd_synth, cmd_train, GenerateRequest, RunConfig, CHECKPOINT_FILE,
    SPLIT_FILE,
};
use mesh_diffusion::datapipe::DatasetSplit;

const CONFIG: &str = "\
K = 10
M = 3
T = 50
lr_initial = 0.003
lr_final = 0.0003
beta1 = 0.001
betaT = 0.2
t_s = 20
epochs = 150
batch_size = 16
hidden_widths = 16,16
spiral_lengths = 9,9
d_idx = 4
d_t = 8
subjects = 4
vertices = 42
";

fn config(pairs: &[(&str, &std::path::Path)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.apply_text(CONFIG, std::path::Path::new("<example>"))?;
    for (k, v) in pairs {
        cfg.set(k, &v.display().to_string())?;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    let root = tempfile::tempdir()?;
    let [raw, proc, model, gen, eval] = ["raw", "proc", "model", "gen", "eval"].map(|s| root.path().join(s));

    cmd_synth(&config(&[("out_dir", &raw)])?, false)?;
    cmd_preprocess(&config(&[("dataset_dir", &raw), ("out_dir", &proc)])?)?;
    cmd_train(&config(&[("dataset_dir", &proc), ("out_dir", &model)])?, false, None)?;

    let split = DatasetSplit::load(&proc.join(SPLIT_FILE))?;
    for subject in &split.test {
        for class in 0..3 {
            let name = format!("{subject}_class{class}");
            let req = GenerateRequest {
                checkpoint: Some(model.join(CHECKPOINT_FILE)),
                reference: Some(proc.join(&name)),
                ..GenerateRequest::default()
            };
            cmd_generate(&config(&[("out_dir", &gen.join(&name))])?, &req)?;
        }
    }
    let report = cmd_evaluate(&config(&[("dataset_dir", &proc), ("out_dir", &eval)])?, &gen)?;
    println!("{}", report.to_text());
    let csv = std::fs::read_to_string(eval.join("per_frame.csv"))?;
    println!("per_frame.csv: {} lines", csv.lines().count());
    println!("stage outputs: {}", std::fs::read_dir(root.path())?.count());
    Ok(())
}
