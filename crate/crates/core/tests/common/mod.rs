#![allow(dead_code)]

use sif_core::data::{synth_blobs, LabeledDataset};
use sif_core::influence::{fit_convex, NewtonConfig};
use sif_core::models::{ModelSpec, Network, Objective};
use sif_core::{Batch, ParamVector, Sample};

/// A converged L2-regularized softmax regression on standardized blobs.
pub struct LogregProblem {
    pub net: Network,
    pub train: Vec<Sample>,
    pub held_out: Vec<Sample>,
    pub theta: ParamVector,
    pub l2: f64,
}

pub fn logreg_problem(classes: usize, dim: usize, n_train: usize, spread: f64, l2: f64, seed: u64) -> LogregProblem {
    let per_class = (2 * n_train).div_ceil(classes);
    let raw = synth_blobs(classes, dim, per_class, spread, seed).unwrap();
    let fit_ids: Vec<usize> = (0..n_train).collect();
    let ds: LabeledDataset = raw.standardized(&fit_ids).unwrap();
    let train = ds.samples()[..n_train].to_vec();
    let held_out = ds.samples()[n_train..].to_vec();
    let net = Network::new(ModelSpec::logreg(dim, classes)).unwrap();
    let theta = fit_convex(&net, &train, l2, None, NewtonConfig::default()).unwrap();
    LogregProblem {
        net,
        train,
        held_out,
        theta,
        l2,
    }
}

/// Central-difference gradient of the full-batch regularized objective.
pub fn fd_gradient(model: &dyn Objective, theta: &ParamVector, batch: &Batch, l2: f64, h: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|j| {
            let mut plus = theta.clone();
            plus.as_mut_slice()[j] += h;
            let mut minus = theta.clone();
            minus.as_mut_slice()[j] -= h;
            (model.loss(&plus, batch, l2).unwrap() - model.loss(&minus, batch, l2).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Central difference of the gradient along `v`.
pub fn fd_hvp(model: &dyn Objective, theta: &ParamVector, batch: &Batch, l2: f64, v: &ParamVector, h: f64) -> Vec<f64> {
    let plus = theta.lincomb(1.0, v, h).unwrap();
    let minus = theta.lincomb(1.0, v, -h).unwrap();
    let gp = model.grad(&plus, batch, l2).unwrap();
    let gm = model.grad(&minus, batch, l2).unwrap();
    gp.as_slice()
        .iter()
        .zip(gm.as_slice())
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale
}
