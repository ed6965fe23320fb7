use crate::error::{Error, Result};

/// Per-timestep diffusion coefficients, indexed `t = 1..=T`.
///
/// `alpha_t = 1 - beta_t`, `alpha_bar_t = prod_{s<=t} alpha_s` and the
/// reverse-step noise scale `sigma_t = sqrt(beta_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    sigma: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds a schedule from explicit betas (`betas[0]` is `beta_1`).
    /// Each beta must lie in `[0, 1)` and `beta_1 > 0`.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::InvalidArgument("a schedule needs T >= 2".into()));
        }
        if betas.iter().any(|b| !(0.0..1.0).contains(b)) || betas[0] <= 0.0 {
            return Err(Error::InvalidArgument("betas must lie in [0, 1) with beta_1 > 0".into()));
        }
        let alpha: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(alpha.len());
        let mut acc = 1.0;
        for a in &alpha {
            acc *= a;
            alpha_bar.push(acc);
        }
        let sigma = betas.iter().map(|b| b.sqrt()).collect();
        Ok(Self {
            beta: betas,
            alpha,
            alpha_bar,
            sigma,
        })
    }

    pub fn num_steps(&self) -> usize {
        self.beta.len()
    }

    fn idx(&self, t: usize) -> usize {
        assert!(
            (1..=self.beta.len()).contains(&t),
            "timestep {t} outside [1, {}]",
            self.beta.len()
        );
        t - 1
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[self.idx(t)]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[self.idx(t)]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[self.idx(t)]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[self.idx(t)]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub(crate) fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.beta.len() {
            return Err(Error::InvalidArgument(format!(
                "timestep {t} outside [1, {}]",
                self.beta.len()
            )));
        }
        Ok(())
    }
}

/// Betas linearly spaced from `beta_1` to `beta_T`, both endpoints exact.
pub fn linear_schedule(steps: usize, beta_1: f64, beta_t: f64) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("T must be >= 2, got {steps}")));
    }
    if !(0.0 < beta_1 && beta_1 <= beta_t && beta_t < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < beta1 <= betaT < 1, got {beta_1} and {beta_t}"
        )));
    }
    let span = (steps - 1) as f64;
    let mut betas: Vec<f64> = (0..steps)
        .map(|i| beta_1 + (beta_t - beta_1) * (i as f64 / span))
        .collect();
    betas[0] = beta_1;
    betas[steps - 1] = beta_t;
    NoiseSchedule::from_betas(betas)
}
