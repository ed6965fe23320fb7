//! Frame standardization, progression and extremeness signals, and a
//! subject-wise split.

use anyhow::Result;
use mesh_diffusion::datapipe::{
    corpus_max_by_class, extremeness_factor, make_expression_signal, progression_signal, split_subjectwise,
    standardize_frames, SignalMode,
};
use mesh_diffusion::mesh::{synth_dataset, AnimationClip};

fn main() -> Result<()> {
    let ds = synth_dataset(6, 3, 80, 162, 3)?;
    let clip = &ds.clips[4];
    let frames = standardize_frames(clip.frames(), 40)?;
    println!("standardized {} -> {} frames", clip.num_frames(), frames.len());
    let short = AnimationClip::new(clip.neutral().clone(), frames, clip.expression_class(), clip.subject_id())?;

    let p = progression_signal(&short)?;
    println!("progression: {}", p.iter().step_by(5).map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" "));

    let lm = ds.landmarks();
    let maxes = corpus_max_by_class(ds.clips.iter(), &lm)?;
    let g = extremeness_factor(&short, &lm, &maxes)?;
    println!("extremeness raw {:.3} mm, normalized {:.3} (class max {:.3})", g.raw, g.normalized, maxes[&short.expression_class()]);

    for mode in [SignalMode::Local, SignalMode::Global, SignalMode::Varying { intensity: 0.5 }] {
        let s = make_expression_signal(short.expression_class(), 3, &p, &g, mode)?;
        println!("{mode:?}: apex row {:?}", s.rows()[s.num_frames() - 1]);
    }

    let subjects: Vec<&str> = ds.clips.iter().map(|c| c.subject_id()).collect();
    let split = split_subjectwise(&subjects, 4, 0)?;
    println!("train {:?}\ntest  {:?}", split.train, split.test);
    Ok(())
}
