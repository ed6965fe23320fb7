use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;

use super::pca::{encode_pca, PcaEncoder};
use crate::error::{Error, Result};
use crate::mesh::AnimationClip;
use crate::params::{ParameterSet, Tensor};
use crate::training::{adam_step, Objective, OptimizerState};

const WX: usize = 0;
const WH: usize = 1;
const B: usize = 2;
const FC1_W: usize = 3;
const FC1_B: usize = 4;
const FC2_W: usize = 5;
const FC2_B: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 300,
            lr: 5e-3,
            seed: 0,
        }
    }
}

/// LSTM over per-frame codes, then `h -> h/2 -> classes` with an ELU between
/// the two dense layers and a softmax on top.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceClassifier {
    input_dim: usize,
    hidden: usize,
    classes: usize,
    params: ParameterSet,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
}

/// Predicted class and the full probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: usize,
    pub probabilities: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn uniform_init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let u = Uniform::new_inclusive(-a, a).expect("valid range");
    (0..len).map(|_| u.sample(rng)).collect()
}

struct Step {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

struct Trace {
    steps: Vec<Step>,
    h_last: Vec<f64>,
    fc1_pre: Vec<f64>,
    fc1_act: Vec<f64>,
    probs: Vec<f64>,
}

impl SequenceClassifier {
    pub fn new(input_dim: usize, hidden: usize, classes: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden < 2 || classes < 2 {
            return Err(Error::InvalidArgument(
                "classifier needs input_dim >= 1, hidden >= 2 and at least 2 classes".into(),
            ));
        }
        let h = hidden;
        let h2 = hidden / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        params.push(Tensor::new("lstm.wx", vec![input_dim, 4 * h], uniform_init(&mut rng, input_dim, h, input_dim * 4 * h))?)?;
        params.push(Tensor::new("lstm.wh", vec![h, 4 * h], uniform_init(&mut rng, h, h, h * 4 * h))?)?;
        let mut bias = vec![0.0; 4 * h];
        bias[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
        params.push(Tensor::new("lstm.b", vec![4 * h], bias)?)?;
        params.push(Tensor::new("fc1.weight", vec![h, h2], uniform_init(&mut rng, h, h2, h * h2))?)?;
        params.push(Tensor::zeros("fc1.bias", vec![h2]))?;
        params.push(Tensor::new("fc2.weight", vec![h2, classes], uniform_init(&mut rng, h2, classes, h2 * classes))?)?;
        params.push(Tensor::zeros("fc2.bias", vec![classes]))?;
        Ok(Self {
            input_dim,
            hidden,
            classes,
            params,
            input_mean: vec![0.0; input_dim],
            input_std: vec![1.0; input_dim],
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    /// Per-component input standardization applied before the LSTM.
    pub fn set_standardization(&mut self, mean: Vec<f64>, std: Vec<f64>) -> Result<()> {
        if mean.len() != self.input_dim || std.len() != self.input_dim || std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("standardization needs input_dim positive scales".into()));
        }
        self.input_mean = mean;
        self.input_std = std;
        Ok(())
    }

    fn standardize(&self, seq: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if seq.is_empty() {
            return Err(Error::InvalidArgument("empty sequence".into()));
        }
        seq.iter()
            .map(|x| {
                if x.len() != self.input_dim {
                    return Err(Error::Shape(format!(
                        "classifier expects {} inputs per frame, got {}",
                        self.input_dim,
                        x.len()
                    )));
                }
                Ok(x.iter()
                    .zip(&self.input_mean)
                    .zip(&self.input_std)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect())
            })
            .collect()
    }

    fn forward(&self, p: &ParameterSet, seq: &[Vec<f64>]) -> Trace {
        let h = self.hidden;
        let (wx, wh, b) = (p.slot(WX), p.slot(WH), p.slot(B));
        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        let mut steps = Vec::with_capacity(seq.len());
        for x in seq {
            let mut z = b.to_vec();
            for (i, xi) in x.iter().enumerate() {
                for (zj, w) in z.iter_mut().zip(&wx[i * 4 * h..(i + 1) * 4 * h]) {
                    *zj += xi * w;
                }
            }
            for (i, hi) in hs.iter().enumerate() {
                for (zj, w) in z.iter_mut().zip(&wh[i * 4 * h..(i + 1) * 4 * h]) {
                    *zj += hi * w;
                }
            }
            let mut gates = z;
            for j in 0..h {
                gates[j] = sigmoid(gates[j]);
                gates[h + j] = sigmoid(gates[h + j]);
                gates[2 * h + j] = gates[2 * h + j].tanh();
                gates[3 * h + j] = sigmoid(gates[3 * h + j]);
            }
            let c_new: Vec<f64> = (0..h)
                .map(|j| gates[h + j] * cs[j] + gates[j] * gates[2 * h + j])
                .collect();
            let tanh_c: Vec<f64> = c_new.iter().map(|c| c.tanh()).collect();
            let h_new: Vec<f64> = (0..h).map(|j| gates[3 * h + j] * tanh_c[j]).collect();
            steps.push(Step {
                x: x.clone(),
                h_prev: std::mem::replace(&mut hs, h_new),
                c_prev: std::mem::replace(&mut cs, c_new),
                gates,
                tanh_c,
            });
        }
        let h2 = h / 2;
        let mut fc1_pre = p.slot(FC1_B).to_vec();
        let w1 = p.slot(FC1_W);
        for (i, hi) in hs.iter().enumerate() {
            for (o, w) in fc1_pre.iter_mut().zip(&w1[i * h2..(i + 1) * h2]) {
                *o += hi * w;
            }
        }
        let fc1_act: Vec<f64> = fc1_pre.iter().map(|&v| if v > 0.0 { v } else { v.exp_m1() }).collect();
        let mut logits = p.slot(FC2_B).to_vec();
        let w2 = p.slot(FC2_W);
        for (i, a) in fc1_act.iter().enumerate() {
            for (o, w) in logits.iter_mut().zip(&w2[i * self.classes..(i + 1) * self.classes]) {
                *o += a * w;
            }
        }
        Trace {
            steps,
            h_last: hs,
            fc1_pre,
            fc1_act,
            probs: softmax(&logits),
        }
    }

    /// Cross-entropy of one standardized sequence; adds its gradient.
    fn loss_and_grad(&self, p: &ParameterSet, seq: &[Vec<f64>], label: usize, g: &mut ParameterSet) -> f64 {
        let h = self.hidden;
        let h2 = h / 2;
        let m = self.classes;
        let tr = self.forward(p, seq);
        let loss = -tr.probs[label].max(f64::MIN_POSITIVE).ln();

        let mut d_logits = tr.probs.clone();
        d_logits[label] -= 1.0;
        {
            let gw2 = g.slot_mut(FC2_W);
            for (i, a) in tr.fc1_act.iter().enumerate() {
                for (gv, d) in gw2[i * m..(i + 1) * m].iter_mut().zip(&d_logits) {
                    *gv += a * d;
                }
            }
        }
        g.slot_mut(FC2_B).iter_mut().zip(&d_logits).for_each(|(gv, d)| *gv += d);
        let w2 = p.slot(FC2_W);
        let d_pre1: Vec<f64> = (0..h2)
            .map(|i| {
                let da: f64 = w2[i * m..(i + 1) * m].iter().zip(&d_logits).map(|(w, d)| w * d).sum();
                let pre = tr.fc1_pre[i];
                da * if pre > 0.0 { 1.0 } else { pre.exp() }
            })
            .collect();
        {
            let gw1 = g.slot_mut(FC1_W);
            for (i, hv) in tr.h_last.iter().enumerate() {
                for (gv, d) in gw1[i * h2..(i + 1) * h2].iter_mut().zip(&d_pre1) {
                    *gv += hv * d;
                }
            }
        }
        g.slot_mut(FC1_B).iter_mut().zip(&d_pre1).for_each(|(gv, d)| *gv += d);
        let w1 = p.slot(FC1_W);
        let mut dh: Vec<f64> = (0..h)
            .map(|i| w1[i * h2..(i + 1) * h2].iter().zip(&d_pre1).map(|(w, d)| w * d).sum())
            .collect();

        let wh = p.slot(WH).to_vec();
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for st in tr.steps.iter().rev() {
            let gt = &st.gates;
            for j in 0..h {
                let (i_g, f_g, g_g, o_g) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                let tc = st.tanh_c[j];
                let d_o = dh[j] * tc;
                dc[j] += dh[j] * o_g * (1.0 - tc * tc);
                dz[j] = dc[j] * g_g * i_g * (1.0 - i_g);
                dz[h + j] = dc[j] * st.c_prev[j] * f_g * (1.0 - f_g);
                dz[2 * h + j] = dc[j] * i_g * (1.0 - g_g * g_g);
                dz[3 * h + j] = d_o * o_g * (1.0 - o_g);
                dc[j] *= f_g;
            }
            {
                let gwx = g.slot_mut(WX);
                for (i, xi) in st.x.iter().enumerate() {
                    for (gv, d) in gwx[i * 4 * h..(i + 1) * 4 * h].iter_mut().zip(&dz) {
                        *gv += xi * d;
                    }
                }
            }
            {
                let gwh = g.slot_mut(WH);
                for (i, hi) in st.h_prev.iter().enumerate() {
                    for (gv, d) in gwh[i * 4 * h..(i + 1) * 4 * h].iter_mut().zip(&dz) {
                        *gv += hi * d;
                    }
                }
            }
            g.slot_mut(B).iter_mut().zip(&dz).for_each(|(gv, d)| *gv += d);
            for (i, dhi) in dh.iter_mut().enumerate() {
                *dhi = wh[i * 4 * h..(i + 1) * 4 * h].iter().zip(&dz).map(|(w, d)| w * d).sum();
            }
        }
        loss
    }

    /// Class probabilities for a sequence of raw (unstandardized) codes.
    pub fn probabilities(&self, seq: &[Vec<f64>]) -> Result<Vec<f64>> {
        let seq = self.standardize(seq)?;
        Ok(self.forward(&self.params, &seq).probs)
    }

    pub fn classify_sequence(&self, seq: &[Vec<f64>]) -> Result<Classification> {
        let probabilities = self.probabilities(seq)?;
        let class = probabilities
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("at least two classes");
        Ok(Classification { class, probabilities })
    }
}

/// PCA codes of every frame's deformation.
pub fn clip_codes(clip: &AnimationClip, enc: &PcaEncoder) -> Result<Vec<Vec<f64>>> {
    clip.frames().iter().map(|d| encode_pca(d, enc)).collect()
}

/// Mean cross-entropy over labelled sequences, as an [`Objective`] of the
/// classifier parameters.
pub struct ClassifierObjective<'a> {
    pub classifier: &'a SequenceClassifier,
    /// Already standardized sequences.
    pub sequences: &'a [Vec<Vec<f64>>],
    pub labels: &'a [usize],
}

impl Objective for ClassifierObjective<'_> {
    fn loss(&self, params: &ParameterSet) -> Result<f64> {
        let mut g = params.zeros_like();
        self.loss_and_grad(params, &mut g)
    }

    fn loss_and_grad(&self, params: &ParameterSet, grads: &mut ParameterSet) -> Result<f64> {
        let per: Vec<(f64, ParameterSet)> = self
            .sequences
            .par_iter()
            .zip(self.labels.par_iter())
            .map(|(s, &y)| {
                let mut g = params.zeros_like();
                let l = self.classifier.loss_and_grad(params, s, y, &mut g);
                (l, g)
            })
            .collect();
        let inv = 1.0 / self.sequences.len() as f64;
        let mut total = 0.0;
        for (l, g) in &per {
            total += l;
            grads.axpy(inv, g)?;
        }
        Ok(total * inv)
    }
}

/// Fits a classifier to labelled code sequences with full-batch Adam.
pub fn train_on_sequences(sequences: &[Vec<Vec<f64>>], labels: &[usize], cfg: &ClassifierConfig) -> Result<SequenceClassifier> {
    if sequences.len() != labels.len() || sequences.is_empty() {
        return Err(Error::InvalidArgument("need one label per sequence".into()));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Data("classifier training needs at least two classes".into()));
    }
    let classes = distinct[distinct.len() - 1] + 1;
    let dim = sequences[0].first().map_or(0, Vec::len);
    let mut clf = SequenceClassifier::new(dim, cfg.hidden, classes, cfg.seed)?;

    let frames: Vec<&Vec<f64>> = sequences.iter().flatten().collect();
    let count = frames.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in &frames {
        if f.len() != dim {
            return Err(Error::Shape("all frames must have the same code length".into()));
        }
        mean.iter_mut().zip(f.iter()).for_each(|(m, v)| *m += v / count);
    }
    let std: Vec<f64> = (0..dim)
        .map(|j| {
            let var = frames.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / count;
            if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 }
        })
        .collect();
    clf.set_standardization(mean, std)?;
    let standardized: Vec<Vec<Vec<f64>>> = sequences.iter().map(|s| clf.standardize(s)).collect::<Result<_>>()?;

    let mut state = OptimizerState::new(&clf.params);
    for _ in 0..cfg.epochs {
        let mut grads = clf.params.zeros_like();
        let obj = ClassifierObjective {
            classifier: &clf,
            sequences: &standardized,
            labels,
        };
        let loss = obj.loss_and_grad(&clf.params, &mut grads)?;
        if !loss.is_finite() {
            return Err(Error::Numeric("classifier loss diverged".into()));
        }
        let mut params = std::mem::take(&mut clf.params);
        adam_step(&mut params, &grads, &mut state, cfg.lr)?;
        clf.params = params;
    }
    Ok(clf)
}

/// Trains on clips labelled by their expression class.
pub fn train_classifier(clips: &[&AnimationClip], enc: &PcaEncoder, cfg: &ClassifierConfig) -> Result<SequenceClassifier> {
    let seqs: Vec<Vec<Vec<f64>>> = clips.iter().map(|c| clip_codes(c, enc)).collect::<Result<_>>()?;
    let labels: Vec<usize> = clips.iter().map(|c| c.expression_class()).collect();
    train_on_sequences(&seqs, &labels, cfg)
}

pub fn classify(clip: &AnimationClip, enc: &PcaEncoder, clf: &SequenceClassifier) -> Result<Classification> {
    clf.classify_sequence(&clip_codes(clip, enc)?)
}
