use std::path::Path;

use super::adam::OptimizerState;
use super::trainer::TrainState;
use crate::error::{Error, Result};
use crate::params::{ParameterSet, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MDCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const OPT_M: &str = "optim/m/";
const OPT_V: &str = "optim/v/";
const OPT_STEP: &str = "optim/step";
const OPT_HYPER: &str = "optim/hyper";
const EPOCHS_DONE: &str = "train/epochs_done";
const LOSS_HISTORY: &str = "train/loss_history";

/// On-disk element type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 1,
    F64 = 2,
}

/// Serializes tensors into the checkpoint container: magic, `u32` version,
/// `u32` count, then per tensor a `u32`-length-prefixed UTF-8 name, `u8`
/// dtype, `u8` rank, `u64` dims and little-endian data.
pub fn encode_tensors(tensors: &[Tensor], dtype: Dtype) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&u32::try_from(tensors.len()).map_err(|_| Error::Checkpoint("too many tensors".into()))?.to_le_bytes());
    for t in tensors {
        let name = t.name.as_bytes();
        let name_len = u32::try_from(name.len()).map_err(|_| Error::Checkpoint("tensor name too long".into()))?;
        let rank = u8::try_from(t.shape.len()).map_err(|_| Error::Checkpoint(format!("tensor {} has rank > 255", t.name)))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name);
        out.push(dtype as u8);
        out.push(rank);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match dtype {
            Dtype::F64 => t.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Dtype::F32 => t.data.iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Checkpoint("unexpected end of tensor table".into())),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a checkpoint container; f32 payloads are widened to f64.
pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<Tensor>> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("magic mismatch".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let dtype = r.u8()?;
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        let mut len: usize = 1;
        for _ in 0..rank {
            let d = usize::try_from(r.u64()?).map_err(|_| Error::Checkpoint("dimension overflow".into()))?;
            len = len
                .checked_mul(d)
                .ok_or_else(|| Error::Checkpoint("dimension overflow".into()))?;
            shape.push(d);
        }
        let data: Vec<f64> = match dtype {
            1 => r
                .take(len.checked_mul(4).ok_or_else(|| Error::Checkpoint("dimension overflow".into()))?)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect(),
            2 => r
                .take(len.checked_mul(8).ok_or_else(|| Error::Checkpoint("dimension overflow".into()))?)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
            other => return Err(Error::Checkpoint(format!("unknown dtype code {other} for {name}"))),
        };
        tensors.push(Tensor { name, shape, data });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes after tensor table", bytes.len() - r.pos)));
    }
    Ok(tensors)
}

/// Parameters and, for resumable checkpoints, the training state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParameterSet,
    pub state: Option<TrainState>,
}

fn scalar(name: &str, v: f64) -> Tensor {
    Tensor { name: name.into(), shape: vec![1], data: vec![v] }
}

fn checkpoint_tensors(params: &ParameterSet, state: Option<&TrainState>) -> Result<Vec<Tensor>> {
    let mut out: Vec<Tensor> = params.tensors().to_vec();
    if let Some(st) = state {
        params.check_layout(&st.optimizer.m)?;
        for (prefix, set) in [(OPT_M, &st.optimizer.m), (OPT_V, &st.optimizer.v)] {
            out.extend(set.tensors().iter().map(|t| Tensor {
                name: format!("{prefix}{}", t.name),
                ..t.clone()
            }));
        }
        out.push(scalar(OPT_STEP, st.optimizer.step as f64));
        out.push(Tensor {
            name: OPT_HYPER.into(),
            shape: vec![3],
            data: vec![st.optimizer.beta1, st.optimizer.beta2, st.optimizer.eps],
        });
        out.push(scalar(EPOCHS_DONE, st.epochs_done as f64));
        out.push(Tensor {
            name: LOSS_HISTORY.into(),
            shape: vec![st.loss_history.len()],
            data: st.loss_history.clone(),
        });
    }
    Ok(out)
}

/// Writes a double-precision checkpoint.
pub fn save_checkpoint(path: &Path, params: &ParameterSet, state: Option<&TrainState>) -> Result<()> {
    save_checkpoint_as(path, params, state, Dtype::F64)
}

pub fn save_checkpoint_as(path: &Path, params: &ParameterSet, state: Option<&TrainState>, dtype: Dtype) -> Result<()> {
    let bytes = encode_tensors(&checkpoint_tensors(params, state)?, dtype)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let tensors = decode_tensors(&bytes).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    split_checkpoint(tensors)
}

fn split_checkpoint(tensors: Vec<Tensor>) -> Result<Checkpoint> {
    let mut params = ParameterSet::new();
    let mut m = ParameterSet::new();
    let mut v = ParameterSet::new();
    let mut meta: Vec<Tensor> = Vec::new();
    for t in tensors {
        if let Some(rest) = t.name.strip_prefix(OPT_M) {
            m.push(Tensor { name: rest.to_string(), ..t })?;
        } else if let Some(rest) = t.name.strip_prefix(OPT_V) {
            v.push(Tensor { name: rest.to_string(), ..t })?;
        } else if t.name.starts_with("optim/") || t.name.starts_with("train/") {
            meta.push(t);
        } else {
            params.push(t)?;
        }
    }
    let find = |name: &str| meta.iter().find(|t| t.name == name);
    let state = match (find(OPT_STEP), find(OPT_HYPER), find(EPOCHS_DONE), find(LOSS_HISTORY)) {
        (None, None, None, None) if m.tensors().is_empty() && v.tensors().is_empty() => None,
        (Some(step), Some(hyper), Some(epochs), Some(history)) if hyper.data.len() == 3 => {
            params.check_layout(&m)?;
            params.check_layout(&v)?;
            Some(TrainState {
                optimizer: OptimizerState {
                    m,
                    v,
                    step: step.data[0] as u64,
                    beta1: hyper.data[0],
                    beta2: hyper.data[1],
                    eps: hyper.data[2],
                },
                epochs_done: epochs.data[0] as usize,
                loss_history: history.data.clone(),
            })
        }
        _ => return Err(Error::Checkpoint("incomplete optimizer state".into())),
    };
    Ok(Checkpoint { params, state })
}
