use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::DeformationField;

/// Linear deformation encoder: `code = basis * (flatten(d) - mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaEncoder {
    mean: Vec<f64>,
    /// `m x D` row-major, rows orthonormal.
    basis: Vec<f64>,
    components: usize,
    /// Sample variance along each kept direction, descending.
    explained_variance: Vec<f64>,
    /// Total sample variance of the fitted data.
    total_variance: f64,
}

/// Default fraction of variance the component count must explain.
pub const DEFAULT_VARIANCE_FRACTION: f64 = 0.99;

impl PcaEncoder {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis_row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.basis[i * d..(i + 1) * d]
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "encoder expects {} values, got {}",
                self.dim(),
                x.len()
            )));
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok((0..self.components)
            .map(|i| self.basis_row(i).iter().zip(&centered).map(|(b, c)| b * c).sum())
            .collect())
    }

    pub fn decode(&self, code: &[f64]) -> Result<Vec<f64>> {
        if code.len() != self.components {
            return Err(Error::Shape(format!(
                "code has {} entries, encoder has {} components",
                code.len(),
                self.components
            )));
        }
        let mut out = self.mean.clone();
        for (i, c) in code.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.basis_row(i)) {
                *o += c * b;
            }
        }
        Ok(out)
    }

    /// Keeps only the first `m` components.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.components {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate {} components to {m}",
                self.components
            )));
        }
        Ok(Self {
            mean: self.mean.clone(),
            basis: self.basis[..m * self.dim()].to_vec(),
            components: m,
            explained_variance: self.explained_variance[..m].to_vec(),
            total_variance: self.total_variance,
        })
    }
}

pub fn encode_pca(d: &DeformationField, enc: &PcaEncoder) -> Result<Vec<f64>> {
    enc.encode(&d.to_flat())
}

/// Principal directions of `samples` (each of length `D`), top `m` by
/// singular value. Each basis row is signed so its largest-magnitude entry
/// (the first one, on ties) is positive.
pub fn fit_pca(samples: &[Vec<f64>], m: usize) -> Result<PcaEncoder> {
    let s = samples.len();
    if s < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 samples".into()));
    }
    let d = samples[0].len();
    if d == 0 || samples.iter().any(|x| x.len() != d) {
        return Err(Error::Shape("PCA samples must share one positive length".into()));
    }
    if m == 0 || m > s.min(d) {
        return Err(Error::InvalidArgument(format!(
            "component count {m} must lie in [1, {}]",
            s.min(d)
        )));
    }
    let mut mean = vec![0.0; d];
    for x in samples {
        for (a, v) in mean.iter_mut().zip(x) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= s as f64);
    let centered = DMatrix::from_fn(s, d, |i, j| samples[i][j] - mean[j]);
    let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / (s - 1) as f64;
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD did not produce right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if m > order.len() {
        return Err(Error::InvalidArgument(format!("only {} components available", order.len())));
    }
    let mut basis = Vec::with_capacity(m * d);
    let mut explained_variance = Vec::with_capacity(m);
    for &k in &order[..m] {
        let mut row: Vec<f64> = v_t.row(k).iter().copied().collect();
        let pivot = row.iter().fold(0.0f64, |best, &v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        basis.extend(row);
        let sv = svd.singular_values[k];
        explained_variance.push(sv * sv / (s - 1) as f64);
    }
    Ok(PcaEncoder {
        mean,
        basis,
        components: m,
        explained_variance,
        total_variance,
    })
}

/// Smallest component count whose explained variance reaches `fraction`
/// of the total.
pub fn fit_pca_variance(samples: &[Vec<f64>], fraction: f64) -> Result<PcaEncoder> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("variance fraction must lie in (0, 1], got {fraction}")));
    }
    let max_m = samples.len().min(samples.first().map_or(0, Vec::len));
    let full = fit_pca(samples, max_m.max(1))?;
    let target = fraction * full.total_variance;
    let mut acc = 0.0;
    let mut m = full.components;
    for (i, v) in full.explained_variance.iter().enumerate() {
        acc += v;
        if acc >= target * (1.0 - 1e-12) {
            m = i + 1;
            break;
        }
    }
    full.truncated(m)
}
