use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::hessian::DEFAULT_ORACLE_CAP;
use crate::error::{Error, Result};
use crate::models::{Network, Objective, Target};
use crate::tensor::{Batch, ParamVector, Sample};

/// Largest training set the retraining oracle accepts.
pub const LOO_MAX_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Stop once the full-batch gradient norm is below this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iters: 100,
        }
    }
}

/// Minimizes the regularized mean loss of a convex model over `samples` by
/// damped Newton steps with backtracking.
pub fn fit_convex(
    model: &Network,
    samples: &[Sample],
    l2: f64,
    start: Option<&ParamVector>,
    cfg: NewtonConfig,
) -> Result<ParamVector> {
    if !model.spec().is_convex() {
        return Err(Error::InvalidArgument("exact refitting needs a convex model".into()));
    }
    let layout = Arc::clone(model.layout());
    let p = layout.total_len();
    if p > DEFAULT_ORACLE_CAP {
        return Err(Error::OracleCap {
            params: p,
            cap: DEFAULT_ORACLE_CAP,
        });
    }
    let batch = Batch::from_samples(samples)?;
    let mut theta = match start {
        Some(s) => ParamVector::new(Arc::clone(&layout), s.as_slice().to_vec())?,
        None => ParamVector::zeros(Arc::clone(&layout)),
    };
    let mut eval = model.evaluate(&theta, &batch, l2, None)?;
    for _ in 0..cfg.max_iters {
        let gnorm = eval.grad.norm();
        if gnorm < cfg.tolerance {
            return Ok(theta);
        }
        let target = Target::new(model, &theta, l2);
        let mut h = DMatrix::zeros(p, p);
        for j in 0..p {
            let col = target.hvp(&batch, &ParamVector::basis(Arc::clone(&layout), j))?;
            h.set_column(j, &DVector::from_column_slice(col.as_slice()));
        }
        // the bias slots are unpenalized, so keep a tiny ridge for the solve
        for i in 0..p {
            h[(i, i)] += 1e-12;
        }
        let step = h
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { damping: l2 })?
            .solve(&DVector::from_column_slice(eval.grad.as_slice()));
        let step = ParamVector::new(Arc::clone(&layout), step.as_slice().to_vec())?;
        let mut t = 1.0;
        loop {
            let candidate = theta.lincomb(1.0, &step, -t)?;
            let next = model.evaluate(&candidate, &batch, l2, None)?;
            // near the optimum the loss is flat to rounding; a smaller
            // gradient is then the better progress measure
            if next.loss <= eval.loss || next.grad.norm() < eval.grad.norm() || t < 1e-8 {
                theta = candidate;
                eval = next;
                break;
            }
            t *= 0.5;
        }
    }
    let grad_norm = eval.grad.norm();
    if grad_norm < cfg.tolerance {
        Ok(theta)
    } else {
        Err(Error::NotConverged { grad_norm })
    }
}

/// Ground-truth leave-one-out effect by refitting: with `theta` the minimizer
/// on `train` and `theta_minus` the minimizer without `train[removed]`,
/// returns `L(z_eval; theta_minus) - L(z_eval; theta)`.
pub fn loo_retrain_oracle(
    model: &Network,
    train: &[Sample],
    l2: f64,
    theta: &ParamVector,
    removed: usize,
    z_eval: &Sample,
    cfg: NewtonConfig,
) -> Result<f64> {
    if train.len() > LOO_MAX_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "retraining oracle is limited to {LOO_MAX_SAMPLES} samples, got {}",
            train.len()
        )));
    }
    if removed >= train.len() || train.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot remove index {removed} from {} samples",
            train.len()
        )));
    }
    let rest: Vec<Sample> = train
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != removed)
        .map(|(_, s)| s.clone())
        .collect();
    let theta_minus = fit_convex(model, &rest, l2, Some(theta), cfg)?;
    let before = Target::new(model, theta, l2).sample_loss(z_eval)?;
    let after = Target::new(model, &theta_minus, l2).sample_loss(z_eval)?;
    Ok(after - before)
}
