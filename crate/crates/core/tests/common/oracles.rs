//! Independent reference implementations used as test oracles.

use mesh_diffusion::mesh::AnimationClip;

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix (row-major,
/// `n x n`). Returns eigenvalues in descending order and the matching unit
/// eigenvectors.
pub fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y * n + y].total_cmp(&a[x * n + x]));
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let vectors = order.iter().map(|&k| (0..n).map(|i| v[i * n + k]).collect()).collect();
    (values, vectors)
}

/// Sample covariance (denominator `S - 1`) of row vectors.
pub fn covariance(samples: &[Vec<f64>]) -> Vec<f64> {
    let s = samples.len();
    let d = samples[0].len();
    let mut mean = vec![0.0; d];
    for x in samples {
        for j in 0..d {
            mean[j] += x[j] / s as f64;
        }
    }
    let mut c = vec![0.0; d * d];
    for x in samples {
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] += (x[i] - mean[i]) * (x[j] - mean[j]) / (s - 1) as f64;
            }
        }
    }
    c
}

/// Per-frame specificity by an explicit double loop over frames and vertices.
pub fn brute_force_specificity(a: &AnimationClip, b: &AnimationClip) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..a.num_frames() {
        let n = a.neutral().num_vertices();
        let mut total = 0.0;
        for v in 0..n {
            let mut sq = 0.0;
            for k in 0..3 {
                let pa = a.neutral().vertices()[v][k] + a.frames()[i].offsets()[v][k];
                let pb = b.neutral().vertices()[v][k] + b.frames()[i].offsets()[v][k];
                sq += (pa - pb) * (pa - pb);
            }
            total += sq.sqrt();
        }
        out.push(total / n as f64);
    }
    out
}
