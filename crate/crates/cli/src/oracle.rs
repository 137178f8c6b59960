//! Exact-oracle verification of the influence machinery on the configured
//! (convex) model.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sif_core::influence::{
    estimate_hessian_norm, exact_hessian, fit_convex, inverse_hvp_exact, inverse_hvp_lissa, loo_retrain_oracle,
    pairwise_influence, sif, FullBatchSampler, LissaConfig, NewtonConfig, Solver, DEFAULT_ORACLE_CAP,
};
use sif_core::models::{Network, Objective, Target};
use sif_core::stats::spearman;
use sif_core::{Batch, ParamVector, Sample};

use crate::config::Experiment;
use crate::error::CliError;

/// Training points used by the oracle problem.
pub const ORACLE_TRAIN: usize = 100;
const FD_STEP: f64 = 1e-5;
const FD_FLOOR: f64 = 1e-6;
const LISSA_SAMPLES: usize = 30;
const LOO_REMOVALS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    /// `"<="` for error bounds, `">"` for rank correlations.
    pub comparison: String,
    pub tolerance: f64,
    pub measured: f64,
    pub pass: bool,
}

impl OracleCheck {
    fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            comparison: "<=".into(),
            tolerance,
            measured,
            pass: measured <= tolerance,
        }
    }

    fn above(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            comparison: ">".into(),
            tolerance,
            measured,
            pass: measured > tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub params: usize,
    pub train_samples: usize,
    pub checks: Vec<OracleCheck>,
    pub pass: bool,
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

fn shifted(theta: &ParamVector, j: usize, h: f64) -> ParamVector {
    let mut t = theta.clone();
    t.as_mut_slice()[j] += h;
    t
}

fn fd_gradient(net: &Network, theta: &ParamVector, batch: &Batch, l2: f64) -> sif_core::Result<Vec<f64>> {
    (0..theta.len())
        .map(|j| {
            let up = net.loss(&shifted(theta, j, FD_STEP), batch, l2)?;
            let down = net.loss(&shifted(theta, j, -FD_STEP), batch, l2)?;
            Ok((up - down) / (2.0 * FD_STEP))
        })
        .collect()
}

fn fd_hvp(net: &Network, theta: &ParamVector, batch: &Batch, l2: f64, v: &ParamVector) -> sif_core::Result<Vec<f64>> {
    let up = net.grad(&theta.lincomb(1.0, v, FD_STEP)?, batch, l2)?;
    let down = net.grad(&theta.lincomb(1.0, v, -FD_STEP)?, batch, l2)?;
    Ok(up
        .as_slice()
        .iter()
        .zip(down.as_slice())
        .map(|(a, b)| (a - b) / (2.0 * FD_STEP))
        .collect())
}

pub fn run(exp: &Experiment, seed: u64, corrupt_gradient: bool, out: &Path) -> Result<OracleReport, CliError> {
    let spec = exp.model();
    if !spec.is_convex() {
        return Err(CliError::Config("the oracle needs a convex (logreg) model".into()));
    }
    let net = Network::new(spec.clone())?;
    if net.num_params() > DEFAULT_ORACLE_CAP {
        return Err(CliError::Config(format!(
            "model has {} parameters, oracle cap is {DEFAULT_ORACLE_CAP}",
            net.num_params()
        )));
    }
    let l2 = exp.config.train_config().l2;
    if l2 <= 0.0 {
        return Err(CliError::Config("the oracle needs l2 > 0".into()));
    }
    let members = exp.dataset.select(&exp.split.members())?;
    let train: Vec<Sample> = members.into_iter().take(ORACLE_TRAIN).collect();
    let held_out = exp.dataset.select(&exp.split.nonmembers())?;
    if train.len() < 2 || held_out.is_empty() {
        return Err(CliError::Config("the oracle needs at least two members and one non-member".into()));
    }
    let theta = fit_convex(&net, &train, l2, None, NewtonConfig::default())
        .map_err(|e| CliError::Oracle(format!("fitting the oracle model: {e}")))?;
    let mut checks = Vec::new();

    let batch = Batch::from_samples(train.iter().take(16))?;
    let mut g = net.grad(&theta, &batch, l2)?.into_vec();
    if corrupt_gradient {
        g[0] += 1e-2 * (1.0 + g[0].abs());
    }
    let fd = fd_gradient(&net, &theta, &batch, l2)?;
    let grad_err = g
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).abs() / a.abs().max(FD_FLOOR))
        .fold(0.0, f64::max);
    checks.push(OracleCheck::at_most("gradient_vs_finite_difference", grad_err, 1e-4));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hvp_err: f64 = 0.0;
    for _ in 0..3 {
        let raw: Vec<f64> = (0..theta.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut v = ParamVector::new(theta.layout().clone(), raw)?;
        let n = v.norm();
        v.scale(1.0 / n);
        let hv = net.hvp(&theta, &batch, &v, l2)?;
        hvp_err = hvp_err.max(rel_err(&fd_hvp(&net, &theta, &batch, l2, &v)?, hv.as_slice()));
    }
    checks.push(OracleCheck::at_most("hvp_vs_finite_difference", hvp_err, 1e-3));

    let target = Target::new(&net, &theta, l2);
    let mut lissa = LissaConfig::new(1, 1000).with_seed(seed);
    let damped = exact_hessian(&target, &train, lissa.damping, DEFAULT_ORACLE_CAP)?;
    let sampler = FullBatchSampler::new(&train)?;
    let norm = estimate_hessian_norm(&target, &sampler, 1, 1, 100, seed)?;
    lissa.scale = 1.05 * (norm + lissa.damping);
    let probes: Vec<&Sample> = train.iter().chain(&held_out).take(LISSA_SAMPLES).collect();
    let (mut worst, mut exact_scores, mut lissa_scores): (f64, Vec<f64>, Vec<f64>) = (0.0, vec![], vec![]);
    for z in &probes {
        let g = target.sample_grad(z)?;
        let exact = inverse_hvp_exact(&damped, &g)?;
        let approx = inverse_hvp_lissa(&target, &sampler, &g, &lissa, z.id as u64)?;
        worst = worst.max(rel_err(approx.as_slice(), exact.as_slice()));
        exact_scores.push(sif(&target, Solver::Exact(&damped), z)?.score);
        let solver = Solver::Lissa {
            sampler: &sampler,
            cfg: &lissa,
        };
        lissa_scores.push(sif(&target, solver, z)?.score);
    }
    checks.push(OracleCheck::at_most("lissa_vs_exact_inverse_hvp", worst, 1e-2));
    checks.push(OracleCheck::above(
        "lissa_vs_exact_sif_spearman",
        spearman(&exact_scores, &lissa_scores)?,
        0.99,
    ));

    let undamped = exact_hessian(&target, &train, 0.0, DEFAULT_ORACLE_CAP)?;
    let z_eval = &held_out[0];
    let n = train.len() as f64;
    let removals = LOO_REMOVALS.min(train.len());
    let (mut predicted, mut actual) = (Vec::new(), Vec::new());
    for i in 0..removals {
        predicted.push(-pairwise_influence(&target, Solver::Exact(&undamped), &train[i], z_eval)? / n);
        actual.push(
            loo_retrain_oracle(&net, &train, l2, &theta, i, z_eval, NewtonConfig::default())
                .map_err(|e| CliError::Oracle(format!("leave-one-out refit: {e}")))?,
        );
    }
    checks.push(OracleCheck::above(
        "influence_vs_leave_one_out_spearman",
        spearman(&predicted, &actual)?,
        0.9,
    ));

    let report = OracleReport {
        params: theta.len(),
        train_samples: train.len(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    };
    std::fs::create_dir_all(out)?;
    let text = serde_json::to_string_pretty(&report).map_err(sif_core::Error::from)?;
    std::fs::write(out.join("oracle.json"), text)?;
    Ok(report)
}
