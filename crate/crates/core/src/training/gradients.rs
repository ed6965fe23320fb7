use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::ParameterSet;

/// A scalar function of a parameter set with an exact gradient.
pub trait Objective {
    fn loss(&self, params: &ParameterSet) -> Result<f64>;

    /// Returns the loss and adds its gradient into `grads`.
    fn loss_and_grad(&self, params: &ParameterSet, grads: &mut ParameterSet) -> Result<f64>;
}

/// Loss and exact gradient at `params`; a non-finite loss or gradient is an
/// error.
pub fn compute_gradients<O: Objective + ?Sized>(objective: &O, params: &ParameterSet) -> Result<(f64, ParameterSet)> {
    let mut grads = params.zeros_like();
    let loss = objective.loss_and_grad(params, &mut grads)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss is not finite ({loss})")));
    }
    if !grads.all_finite() {
        return Err(Error::Numeric("gradient has non-finite entries".into()));
    }
    Ok((loss, grads))
}

/// One analytic-vs-numeric comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub tensor: String,
    pub element: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps coordinates whose true
/// gradient is at rounding level from dominating the comparison.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    if denom == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

/// Compares analytic gradients with central differences of step `h` at
/// `num_coords` coordinates drawn without replacement (all of them if there
/// are fewer).
pub fn gradient_check<O: Objective + ?Sized>(
    objective: &O,
    params: &ParameterSet,
    h: f64,
    num_coords: usize,
    floor: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let total = params.num_elements();
    let coords: Vec<(usize, usize)> = sample(&mut ChaCha8Rng::seed_from_u64(seed), total, num_coords.min(total))
        .into_iter()
        .map(|flat| params.locate(flat).expect("index within parameter count"))
        .collect();
    gradient_check_at(objective, params, h, &coords, floor)
}

/// Gradient check at explicit `(tensor slot, element)` coordinates.
pub fn gradient_check_at<O: Objective + ?Sized>(
    objective: &O,
    params: &ParameterSet,
    h: f64,
    coords: &[(usize, usize)],
    floor: f64,
) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let (_, grads) = compute_gradients(objective, params)?;
    let mut work = params.clone();
    let mut entries = Vec::with_capacity(coords.len());
    for &(slot, elem) in coords {
        if slot >= params.tensors().len() || elem >= params.tensors()[slot].data.len() {
            return Err(Error::InvalidArgument(format!("coordinate ({slot}, {elem}) out of range")));
        }
        let x = params.value(slot, elem);
        work.set_value(slot, elem, x + h);
        let up = objective.loss(&work)?;
        work.set_value(slot, elem, x - h);
        let down = objective.loss(&work)?;
        work.set_value(slot, elem, x);
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.value(slot, elem);
        entries.push(GradCheckEntry {
            tensor: params.tensors()[slot].name.clone(),
            element: elem,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric, floor),
        });
    }
    Ok(GradCheckReport { entries })
}
