use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, Checkpoint, ModelSpec, Network, Objective, TrainingMetadata};
use crate::data::{augment, AugmentationFamily, LabeledDataset, MiSplit};
use crate::error::{Error, Result};
use crate::tensor::{Batch, ParamVector, Sample};

/// Multiply the learning rate by `factor` once validation accuracy has not
/// improved for `patience` epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrDecay {
    #[serde(default = "default_factor")]
    pub factor: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_factor() -> f64 {
    0.1
}

fn default_patience() -> usize {
    20
}

impl Default for LrDecay {
    fn default() -> Self {
        Self {
            factor: default_factor(),
            patience: default_patience(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub momentum: f64,
    pub nesterov: bool,
    /// Initial learning rate. There is no universal default; pick one per
    /// architecture.
    pub lr: f64,
    pub lr_decay: Option<LrDecay>,
    pub augmentation: AugmentationFamily,
    pub seed: u64,
}

impl TrainConfig {
    /// The standard recipe (400 epochs, batch 100, l2 1e-4, Nesterov momentum
    /// 0.9, plateau decay) at the given learning rate.
    pub fn with_lr(lr: f64) -> Self {
        Self {
            epochs: 400,
            batch_size: 100,
            l2: 1e-4,
            momentum: 0.9,
            nesterov: true,
            lr,
            lr_decay: Some(LrDecay::default()),
            augmentation: AugmentationFamily::identity(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::InvalidArgument("l2 must be non-negative".into()));
        }
        if let Some(d) = &self.lr_decay {
            if !(d.factor > 0.0 && d.factor <= 1.0) {
                return Err(Error::InvalidArgument("lr decay factor must be in (0, 1]".into()));
            }
        }
        self.augmentation.validate()
    }
}

/// Fraction of `samples` the model classifies correctly.
pub fn evaluate_accuracy(model: &dyn Objective, params: &ParamVector, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty sample list".into()));
    }
    Ok(accuracy_and_loss(model, params, samples)?.0)
}

/// Accuracy and mean cross-entropy (no penalty) in one forward pass.
fn accuracy_and_loss(model: &dyn Objective, params: &ParamVector, samples: &[Sample]) -> Result<(f64, f64)> {
    let classes = model.num_classes();
    let mut correct = 0usize;
    let mut loss = 0.0;
    for chunk in samples.chunks(256) {
        let batch = Batch::from_samples(chunk)?;
        let probs = model.probabilities(params, &batch.inputs)?;
        for (row, s) in probs.data().chunks(classes).zip(chunk) {
            if argmax(row) == s.label {
                correct += 1;
            }
            loss -= row[s.label].max(f64::MIN_POSITIVE).ln();
        }
    }
    let n = samples.len() as f64;
    Ok((correct as f64 / n, loss / n))
}

/// Trains on the split's members with minibatch SGD (momentum, optionally
/// Nesterov) and returns the parameters from the epoch with the highest
/// validation accuracy (latest on ties). Without a validation set the
/// final epoch is kept.
pub fn train_target(spec: &ModelSpec, dataset: &LabeledDataset, split: &MiSplit, cfg: &TrainConfig) -> Result<Checkpoint> {
    cfg.validate()?;
    let net = Network::new(spec.clone())?;
    let members = dataset.select(&split.members())?;
    let validation = dataset.select(&split.validation)?;
    if members.is_empty() {
        return Err(Error::InvalidArgument("split has no members to train on".into()));
    }
    if cfg.lr_decay.is_some() && validation.is_empty() {
        return Err(Error::InvalidArgument("lr decay needs a nonempty validation set".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = net.init_params(cfg.seed);
    let mut velocity = vec![0.0; params.len()];
    let mut lr = cfg.lr;

    let mut meta = TrainingMetadata::new(cfg.augmentation.clone());
    let (acc0, loss0) = accuracy_and_loss(&net, &params, &members)?;
    let val0 = if validation.is_empty() {
        None
    } else {
        Some(evaluate_accuracy(&net, &params, &validation)?)
    };
    meta.record_epoch(loss0 + 0.5 * cfg.l2 * params.regularized_sq_norm(), acc0, val0, lr);
    let mut best_params = params.clone();
    let mut best_val = val0.unwrap_or(f64::NEG_INFINITY);
    let mut since_improvement = 0usize;

    let mut order: Vec<usize> = (0..members.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch_samples: Vec<Sample> = chunk
                .iter()
                .map(|&i| {
                    if cfg.augmentation.is_identity() {
                        Ok(members[i].clone())
                    } else {
                        augment(&cfg.augmentation, &members[i], &mut rng)
                    }
                })
                .collect::<Result<_>>()?;
            let batch = Batch::from_samples(&batch_samples)?;
            let eval = match net.evaluate(&params, &batch, cfg.l2, None) {
                Ok(e) if e.loss.is_finite() => e,
                Ok(_) | Err(Error::NumericOverflow(_)) => {
                    return Err(Error::TrainingDiverged {
                        last_finite_epoch: epoch - 1,
                    })
                }
                Err(e) => return Err(e),
            };
            sgd_step(&mut params, &mut velocity, &eval.grad, lr, cfg);
            if !params.is_finite() {
                return Err(Error::TrainingDiverged {
                    last_finite_epoch: epoch - 1,
                });
            }
        }

        let (train_acc, train_loss) = match accuracy_and_loss(&net, &params, &members) {
            Ok(v) if v.1.is_finite() => v,
            _ => {
                return Err(Error::TrainingDiverged {
                    last_finite_epoch: epoch - 1,
                })
            }
        };
        let val_acc = if validation.is_empty() {
            None
        } else {
            Some(evaluate_accuracy(&net, &params, &validation)?)
        };
        meta.record_epoch(train_loss + 0.5 * cfg.l2 * params.regularized_sq_norm(), train_acc, val_acc, lr);

        match val_acc {
            Some(v) if v > best_val => {
                best_val = v;
                best_params = params.clone();
                meta.best_epoch = epoch;
                since_improvement = 0;
            }
            Some(v) => {
                if v == best_val {
                    best_params = params.clone();
                    meta.best_epoch = epoch;
                }
                since_improvement += 1;
                if let Some(decay) = &cfg.lr_decay {
                    if since_improvement >= decay.patience {
                        lr *= decay.factor;
                        since_improvement = 0;
                    }
                }
            }
            None => {
                best_params = params.clone();
                meta.best_epoch = epoch;
            }
        }
    }

    meta.epochs_run = cfg.epochs;
    meta.train_accuracy = evaluate_accuracy(&net, &best_params, &members)?;
    meta.val_accuracy = if validation.is_empty() {
        None
    } else {
        Some(evaluate_accuracy(&net, &best_params, &validation)?)
    };
    Checkpoint::new(spec.clone(), best_params, cfg.l2, meta)
}

fn sgd_step(params: &mut ParamVector, velocity: &mut [f64], grad: &ParamVector, lr: f64, cfg: &TrainConfig) {
    for ((p, v), g) in params.as_mut_slice().iter_mut().zip(velocity.iter_mut()).zip(grad.as_slice()) {
        *v = cfg.momentum * *v + g;
        let step = if cfg.nesterov { g + cfg.momentum * *v } else { *v };
        *p -= lr * step;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_splits, synth_blobs, SplitConfig};
    use crate::tensor::Tensor;

    fn blobs_split() -> (LabeledDataset, MiSplit) {
        // two classes separated by a margin along the first axis
        let raw = synth_blobs(1, 2, 200, 1.0, 1).unwrap();
        let items = raw
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let label = i % 2;
                let x = s.input.data();
                let shift = if label == 0 { -4.0 } else { 4.0 };
                (Tensor::new(vec![2], vec![x[0].clamp(-2.5, 2.5) + shift, x[1]]).unwrap(), label)
            })
            .collect();
        let ds = LabeledDataset::new("margin", 2, items).unwrap();
        let split = make_splits(&ds, &SplitConfig::new(60, 0)).unwrap();
        (ds, split)
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (ds, split) = blobs_split();
        let spec = ModelSpec::logreg(2, 2);
        let mut cfg = TrainConfig::with_lr(0.1);
        cfg.epochs = 0;
        cfg.seed = 4;
        let ckpt = train_target(&spec, &ds, &split, &cfg).unwrap();
        let init = Network::new(spec).unwrap().init_params(4);
        assert_eq!(ckpt.params(), &init);
        assert_eq!(ckpt.metadata().best_epoch, 0);
    }

    #[test]
    fn separable_blobs_reach_full_train_accuracy() {
        let (ds, split) = blobs_split();
        let mut cfg = TrainConfig::with_lr(0.05);
        cfg.epochs = 50;
        let ckpt = train_target(&ModelSpec::logreg(2, 2), &ds, &split, &cfg).unwrap();
        assert_eq!(ckpt.metadata().train_accuracy, 1.0);
        let members = ds.select(&split.members()).unwrap();
        let net = ckpt.network();
        for s in &members {
            assert_eq!(net.predict(ckpt.params(), &s.input).unwrap().0, s.label);
        }
    }

    #[test]
    fn full_batch_convex_loss_is_non_increasing() {
        let ds = synth_blobs(3, 4, 60, 2.0, 8).unwrap();
        let mut split_cfg = SplitConfig::new(80, 2);
        split_cfg.validation_fraction = 0.0;
        let split = make_splits(&ds, &split_cfg).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 80,
            l2: 1e-3,
            momentum: 0.0,
            nesterov: false,
            lr: 0.05,
            lr_decay: None,
            augmentation: AugmentationFamily::identity(),
            seed: 1,
        };
        let ckpt = train_target(&ModelSpec::logreg(4, 3), &ds, &split, &cfg).unwrap();
        let losses = &ckpt.metadata().train_loss;
        assert_eq!(losses.len(), 61);
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn huge_learning_rate_diverges_with_epoch() {
        let (ds, split) = blobs_split();
        let mut cfg = TrainConfig::with_lr(1e300);
        cfg.epochs = 5;
        cfg.lr_decay = None;
        match train_target(&ModelSpec::mlp(2, vec![8], 2), &ds, &split, &cfg) {
            Err(Error::TrainingDiverged { last_finite_epoch }) => assert!(last_finite_epoch < 5),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn accuracy_fixtures() {
        let net = Network::new(ModelSpec::logreg(1, 2)).unwrap();
        // weight favours class 1 for positive inputs
        let params = ParamVector::new(net.layout().clone(), vec![-1.0, 1.0, 0.0, 0.0]).unwrap();
        let mk = |id, x: f64, label| Sample {
            id,
            input: Tensor::new(vec![1], vec![x]).unwrap(),
            label,
        };
        // hand count: inputs > 0 predict 1, < 0 predict 0; 7 of 10 correct
        let samples = vec![
            mk(0, 1.0, 1),
            mk(1, 2.0, 1),
            mk(2, -1.0, 0),
            mk(3, -3.0, 0),
            mk(4, 0.5, 1),
            mk(5, -0.5, 0),
            mk(6, 4.0, 1),
            mk(7, 1.0, 0),
            mk(8, -2.0, 1),
            mk(9, 3.0, 0),
        ];
        assert_eq!(evaluate_accuracy(&net, &params, &samples).unwrap(), 0.7);
        let doubled: Vec<Sample> = samples.iter().chain(&samples).cloned().collect();
        assert_eq!(evaluate_accuracy(&net, &params, &doubled).unwrap(), 0.7);
        let wrong: Vec<Sample> = samples[..7]
            .iter()
            .map(|s| Sample {
                label: 1 - net.predict(&params, &s.input).unwrap().0,
                ..s.clone()
            })
            .collect();
        assert_eq!(evaluate_accuracy(&net, &params, &wrong).unwrap(), 0.0);
    }
}
