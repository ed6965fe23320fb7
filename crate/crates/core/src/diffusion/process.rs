use super::NoiseSchedule;
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::spiral::DenoiserNetwork;

/// Anything that predicts the noise in a noisy deformation.
pub trait NoisePredictor: Sync {
    /// Predicted noise, same `N x 3` layout as `noisy`.
    fn predict(&self, noisy: &[f64], t: usize, expression: &[f64], identity: Option<&[f64]>) -> Result<Vec<f64>>;

    /// Identity latent for `neutral`, when the predictor is identity-aware.
    fn identity_latent(&self, _neutral: &TriangleMesh) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }
}

impl NoisePredictor for DenoiserNetwork {
    fn predict(&self, noisy: &[f64], t: usize, expression: &[f64], identity: Option<&[f64]>) -> Result<Vec<f64>> {
        self.denoise(noisy, t, expression, identity)
    }

    fn identity_latent(&self, neutral: &TriangleMesh) -> Result<Option<Vec<f64>>> {
        match self.identity_encoder() {
            Some(_) => self.encode_identity(neutral).map(Some),
            None => Ok(None),
        }
    }
}

/// `sqrt(alpha_bar_t) d0 + sqrt(1 - alpha_bar_t) eps`, elementwise.
pub fn forward_sample(d0: &[f64], t: usize, eps: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    sched.check_t(t)?;
    if d0.len() != eps.len() {
        return Err(Error::Shape(format!(
            "d0 has {} values, eps has {}",
            d0.len(),
            eps.len()
        )));
    }
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(d0.iter().zip(eps).map(|(d, e)| a * d + b * e).collect())
}

/// Noise-prediction loss of one frame: `sum_v ||eps - s(x_t, t, e)||^2`.
pub fn training_loss<P: NoisePredictor + ?Sized>(
    d0: &[f64],
    t: usize,
    eps: &[f64],
    expression: &[f64],
    identity: Option<&[f64]>,
    net: &P,
    sched: &NoiseSchedule,
) -> Result<f64> {
    let noisy = forward_sample(d0, t, eps, sched)?;
    let pred = net.predict(&noisy, t, expression, identity)?;
    if pred.len() != eps.len() {
        return Err(Error::Shape("prediction and noise differ in size".into()));
    }
    let loss: f64 = pred.iter().zip(eps).map(|(p, e)| (e - p) * (e - p)).sum();
    if !loss.is_finite() {
        return Err(Error::Numeric("non-finite training loss".into()));
    }
    Ok(loss)
}

/// One reverse step:
/// `d_{t-1} = (d_t - (1 - a_t) / sqrt(1 - abar_t) * eps_hat) / sqrt(a_t) + sigma_t z_t`.
///
/// At `t = 1` the added noise must be exactly zero.
pub fn ddpm_step(d_t: &[f64], t: usize, eps_hat: &[f64], z_t: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    sched.check_t(t)?;
    if d_t.len() != eps_hat.len() || d_t.len() != z_t.len() {
        return Err(Error::Shape("d_t, eps_hat and z_t must have equal length".into()));
    }
    if t == 1 && z_t.iter().any(|&z| z != 0.0) {
        return Err(Error::InvalidArgument("z_1 must be zero on the final step".into()));
    }
    let a = sched.alpha(t);
    let ab = sched.alpha_bar(t);
    let coef = (1.0 - a) / (1.0 - ab).sqrt();
    let inv = 1.0 / a.sqrt();
    let sigma = sched.sigma(t);
    let out: Vec<f64> = d_t
        .iter()
        .zip(eps_hat)
        .zip(z_t)
        .map(|((d, e), z)| inv * (d - coef * e) + sigma * z)
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite state after reverse step t={t}")));
    }
    Ok(out)
}
