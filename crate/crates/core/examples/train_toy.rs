//! Train a small denoiser on the synthetic corpus and save a checkpoint.
//!
//! Usage: `cargo run --release --example train_toy -- [epochs] [out.mdck]`

use anyhow::Result;
use mesh_diffusion::datapipe::{corpus_max_by_class, extremeness_factor, make_expression_signal, progression_signal, SignalMode};
use mesh_diffusion::diffusion::linear_schedule;
use mesh_diffusion::mesh::synth_dataset;
use mesh_diffusion::spiral::{DenoiserNetwork, NetworkSpec};
use mesh_diffusion::training::{load_checkpoint, save_checkpoint, train_epochs, TrainConfig, TrainState, TrainingSet};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(40);
    let out = args.next().unwrap_or_else(|| std::env::temp_dir().join("toy.mdck").display().to_string());

    let ds = synth_dataset(4, 3, 40, 162, 1)?;
    let lm = ds.landmarks();
    let maxes = corpus_max_by_class(ds.clips.iter(), &lm)?;
    let mut set = TrainingSet::new();
    for c in &ds.clips {
        let g = extremeness_factor(c, &lm, &maxes)?;
        set.push_clip(c, &make_expression_signal(c.expression_class(), 3, &progression_signal(c)?, &g, SignalMode::Global)?)?;
    }

    let sched = linear_schedule(100, 1e-3, 0.2)?;
    let spec = NetworkSpec { widths: vec![16, 32, 32, 32], d_t: 16, ..NetworkSpec::desk_scale(3, 100) };
    let mut net = DenoiserNetwork::new(spec, ds.clips[0].neutral(), 0)?;
    let cfg = TrainConfig { lr_initial: 3e-3, lr_final: 3e-4, ..TrainConfig::new(epochs, 32, 5) };
    println!("{} frames, {} parameters, {epochs} epochs", set.num_frames(), net.params().num_elements());

    let mut state = TrainState::new(net.params());
    let every = (epochs / 10).max(1);
    train_epochs(&set, &cfg, &mut net, &sched, &mut state, epochs, |epoch, loss| {
        if epoch % every == 0 || epoch + 1 == epochs {
            println!("epoch {epoch:>4}  loss {loss:.3}");
        }
    })?;

    let path = std::path::Path::new(&out);
    save_checkpoint(path, net.params(), Some(&state))?;
    let ck = load_checkpoint(path)?;
    println!("saved {} ({} bytes); reload matches: {}", path.display(), std::fs::metadata(path)?.len(), &ck.params == net.params());
    Ok(())
}
