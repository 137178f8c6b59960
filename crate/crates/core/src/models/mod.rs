//! Target-model architectures, the differentiable-objective interface used
//! by the influence engine, training, and checkpoints.

mod checkpoint;
mod train;

pub use checkpoint::{Checkpoint, TrainingMetadata, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{evaluate_accuracy, train_target, LrDecay, TrainConfig};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{softmax, Tape};
use crate::error::{Error, Result};
use crate::tensor::{Batch, Layout, ParamVector, Sample, Tensor};

pub const DEFAULT_PARAM_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum Architecture {
    Logreg {
        dim: usize,
        classes: usize,
    },
    Mlp {
        dim: usize,
        hidden: Vec<usize>,
        classes: usize,
    },
    /// conv3x3(c)-relu-pool2-conv3x3(2c)-relu-pool2-fc
    SmallCnn {
        in_channels: usize,
        height: usize,
        width: usize,
        channels: usize,
        classes: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub arch: Architecture,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "default_cap")]
    pub param_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_PARAM_CAP
}

impl ModelSpec {
    pub fn logreg(dim: usize, classes: usize) -> Self {
        Self::from_arch(Architecture::Logreg { dim, classes })
    }

    pub fn mlp(dim: usize, hidden: Vec<usize>, classes: usize) -> Self {
        Self::from_arch(Architecture::Mlp { dim, hidden, classes })
    }

    pub fn small_cnn(in_channels: usize, height: usize, width: usize, channels: usize, classes: usize) -> Self {
        Self::from_arch(Architecture::SmallCnn {
            in_channels,
            height,
            width,
            channels,
            classes,
        })
    }

    fn from_arch(arch: Architecture) -> Self {
        Self {
            arch,
            activation: Activation::Relu,
            param_cap: DEFAULT_PARAM_CAP,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self.arch {
            Architecture::Logreg { classes, .. }
            | Architecture::Mlp { classes, .. }
            | Architecture::SmallCnn { classes, .. } => classes,
        }
    }

    /// Convexity of the training objective (used by the retraining oracle).
    pub fn is_convex(&self) -> bool {
        matches!(self.arch, Architecture::Logreg { .. })
    }

    fn layout(&self) -> Layout {
        match &self.arch {
            Architecture::Logreg { dim, classes } => Layout::from_shapes([
                ("fc.weight", vec![*dim, *classes], true),
                ("fc.bias", vec![*classes], true),
            ]),
            Architecture::Mlp { dim, hidden, classes } => {
                let mut entries = Vec::new();
                let mut fan_in = *dim;
                for (i, &h) in hidden.iter().enumerate() {
                    entries.push((format!("fc{i}.weight"), vec![fan_in, h], true));
                    entries.push((format!("fc{i}.bias"), vec![h], true));
                    fan_in = h;
                }
                entries.push(("out.weight".into(), vec![fan_in, *classes], true));
                entries.push(("out.bias".into(), vec![*classes], true));
                Layout::from_shapes(entries)
            }
            Architecture::SmallCnn {
                in_channels,
                height,
                width,
                channels,
                classes,
            } => {
                let c = *channels;
                let flat = 2 * c * (height / 4) * (width / 4);
                Layout::from_shapes([
                    ("conv1.weight", vec![c, *in_channels, 3, 3], true),
                    ("conv1.bias", vec![c], true),
                    ("conv2.weight", vec![2 * c, c, 3, 3], true),
                    ("conv2.bias", vec![2 * c], true),
                    ("fc.weight", vec![flat, *classes], true),
                    ("fc.bias", vec![*classes], true),
                ])
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = match &self.arch {
            Architecture::Logreg { dim, classes } => *dim > 0 && *classes > 0,
            Architecture::Mlp { dim, hidden, classes } => *dim > 0 && *classes > 0 && hidden.iter().all(|&h| h > 0),
            Architecture::SmallCnn {
                in_channels,
                height,
                width,
                channels,
                classes,
            } => *in_channels > 0 && *height >= 4 && *width >= 4 && *channels > 0 && *classes > 0,
        };
        if !positive {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive (smallcnn inputs at least 4x4): {:?}",
                self.arch
            )));
        }
        let count = self.layout().total_len();
        if count > self.param_cap {
            return Err(Error::InvalidArgument(format!(
                "model has {count} parameters, above the cap of {}",
                self.param_cap
            )));
        }
        Ok(())
    }
}

/// Loss value plus its derivatives from one tape sweep.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub grad: ParamVector,
    pub hvp: Option<ParamVector>,
}

/// A twice-differentiable training objective over a parameter layout.
///
/// Implementors provide the data term (mean per-sample loss over a batch);
/// the provided methods add the `l2 / 2 * |theta_reg|^2` penalty.
pub trait Objective: Send + Sync {
    fn layout(&self) -> &Arc<Layout>;

    fn num_classes(&self) -> usize;

    /// Mean data loss, its gradient, and `H v` when `direction` is given.
    fn data_term(&self, params: &ParamVector, batch: &Batch, direction: Option<&ParamVector>) -> Result<Evaluation>;

    /// Forward pass only: class probabilities `[n, classes]`.
    fn probabilities(&self, params: &ParamVector, inputs: &Tensor) -> Result<Tensor>;

    fn evaluate(&self, params: &ParamVector, batch: &Batch, l2: f64, direction: Option<&ParamVector>) -> Result<Evaluation> {
        check_l2(l2)?;
        self.check_params(params)?;
        let mut eval = self.data_term(params, batch, direction)?;
        if l2 > 0.0 {
            eval.loss += 0.5 * l2 * params.regularized_sq_norm();
            eval.grad.add_regularized(l2, params);
            if let (Some(h), Some(v)) = (eval.hvp.as_mut(), direction) {
                h.add_regularized(l2, v);
            }
        }
        Ok(eval)
    }

    fn loss(&self, params: &ParamVector, batch: &Batch, l2: f64) -> Result<f64> {
        Ok(self.evaluate(params, batch, l2, None)?.loss)
    }

    fn grad(&self, params: &ParamVector, batch: &Batch, l2: f64) -> Result<ParamVector> {
        Ok(self.evaluate(params, batch, l2, None)?.grad)
    }

    fn hvp(&self, params: &ParamVector, batch: &Batch, v: &ParamVector, l2: f64) -> Result<ParamVector> {
        params.check_compatible(v)?;
        Ok(self
            .evaluate(params, batch, l2, Some(v))?
            .hvp
            .expect("direction given"))
    }

    /// `argmax` of the class probabilities, ties broken toward the smallest
    /// class id.
    fn predict(&self, params: &ParamVector, input: &Tensor) -> Result<(usize, Vec<f64>)> {
        let mut shape = vec![1];
        shape.extend_from_slice(input.shape());
        let probs = self
            .probabilities(params, &Tensor::from_parts(shape, input.data().to_vec()))?
            .into_data();
        Ok((argmax(&probs), probs))
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.layout().as_ref() != self.layout().as_ref() {
            return Err(Error::LayoutMismatch("parameters do not match the model layout".into()));
        }
        Ok(())
    }
}

fn check_l2(l2: f64) -> Result<()> {
    if l2 >= 0.0 && l2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("l2 must be non-negative, got {l2}")))
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A neural classifier built from a [`ModelSpec`].
#[derive(Debug, Clone)]
pub struct Network {
    spec: ModelSpec,
    layout: Arc<Layout>,
}

impl Network {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let layout = Arc::new(spec.layout());
        Ok(Self { spec, layout })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn num_params(&self) -> usize {
        self.layout.total_len()
    }

    /// Kaiming-uniform fan-in weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`),
    /// zero biases.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamVector::zeros(Arc::clone(&self.layout));
        for slot in self.layout.slots() {
            if slot.name.ends_with(".bias") {
                continue;
            }
            let fan_in: usize = match slot.shape.len() {
                2 => slot.shape[0],
                _ => slot.shape[1..].iter().product(),
            };
            let bound = (6.0 / fan_in as f64).sqrt();
            for x in &mut p.as_mut_slice()[slot.range()] {
                *x = rng.random_range(-bound..bound);
            }
        }
        p
    }

    /// Builds the forward graph up to the logits node.
    fn forward<'a>(&self, tape: &mut Tape<'a>, inputs: &Tensor) -> Result<usize> {
        let n = inputs.shape()[0];
        let example: usize = inputs.shape()[1..].iter().product();
        match &self.spec.arch {
            Architecture::Logreg { dim, .. } | Architecture::Mlp { dim, .. } => {
                if example != *dim {
                    return Err(Error::Shape {
                        context: "input layer".into(),
                        expected: vec![*dim],
                        actual: inputs.shape()[1..].to_vec(),
                    });
                }
                let mut h = tape.input(vec![n, *dim], inputs.data().to_vec())?;
                let hidden: &[usize] = match &self.spec.arch {
                    Architecture::Mlp { hidden, .. } => hidden,
                    _ => &[],
                };
                for i in 0..hidden.len() {
                    h = self.dense(tape, h, &format!("fc{i}"))?;
                    h = tape.relu(h)?;
                }
                let last = if hidden.is_empty() && matches!(self.spec.arch, Architecture::Logreg { .. }) {
                    "fc"
                } else {
                    "out"
                };
                self.dense(tape, h, last)
            }
            Architecture::SmallCnn {
                in_channels,
                height,
                width,
                channels,
                ..
            } => {
                let expected = [*in_channels, *height, *width];
                if inputs.shape()[1..] != expected {
                    return Err(Error::Shape {
                        context: "conv1 input".into(),
                        expected: expected.to_vec(),
                        actual: inputs.shape()[1..].to_vec(),
                    });
                }
                let x = tape.input(inputs.shape().to_vec(), inputs.data().to_vec())?;
                tape.scope("conv1");
                let k1 = tape.param("conv1.weight")?;
                let b1 = tape.param("conv1.bias")?;
                let h = tape.conv3x3(x, k1)?;
                let h = tape.add_bias(h, b1)?;
                let h = tape.relu(h)?;
                let h = tape.maxpool2(h)?;
                tape.scope("conv2");
                let k2 = tape.param("conv2.weight")?;
                let b2 = tape.param("conv2.bias")?;
                let h = tape.conv3x3(h, k2)?;
                let h = tape.add_bias(h, b2)?;
                let h = tape.relu(h)?;
                let h = tape.maxpool2(h)?;
                let flat = 2 * channels * (height / 4) * (width / 4);
                let h = tape.reshape(h, vec![n, flat])?;
                self.dense(tape, h, "fc")
            }
        }
    }

    fn dense(&self, tape: &mut Tape<'_>, x: usize, name: &str) -> Result<usize> {
        tape.scope(name);
        let w = tape.param(&format!("{name}.weight"))?;
        let b = tape.param(&format!("{name}.bias"))?;
        let z = tape.matmul(x, w)?;
        tape.add_bias(z, b)
    }
}

impl Objective for Network {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn num_classes(&self) -> usize {
        self.spec.num_classes()
    }

    fn data_term(&self, params: &ParamVector, batch: &Batch, direction: Option<&ParamVector>) -> Result<Evaluation> {
        let mut tape = Tape::new(params, direction)?;
        let logits = self.forward(&mut tape, &batch.inputs)?;
        tape.scope("loss");
        let loss = tape.softmax_xent(logits, &batch.labels)?;
        let value = tape.value(loss)[0];
        let sweep = tape.backward(loss, &self.layout);
        Ok(Evaluation {
            loss: value,
            grad: sweep.grad,
            hvp: sweep.hvp,
        })
    }

    fn probabilities(&self, params: &ParamVector, inputs: &Tensor) -> Result<Tensor> {
        self.check_params(params)?;
        let mut tape = Tape::new(params, None)?;
        let logits = self.forward(&mut tape, inputs)?;
        let shape = tape.shape(logits).to_vec();
        let probs = softmax(tape.value(logits), shape[0], shape[1]);
        Ok(Tensor::from_parts(shape, probs))
    }
}

/// Per-sample quadratic loss `L(z, theta) = 1/2 (theta - x)^T A (theta - x)`
/// with `x` the sample input. Its Hessian is the constant `A`, which makes it
/// the reference model for closed-form checks of the influence machinery.
#[derive(Debug, Clone)]
pub struct Quadratic {
    matrix: Vec<f64>,
    dim: usize,
    layout: Arc<Layout>,
}

impl Quadratic {
    /// `matrix` is row-major `dim x dim` and must be symmetric.
    pub fn new(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::Shape {
                context: "Quadratic matrix".into(),
                expected: vec![dim, dim],
                actual: vec![matrix.len()],
            });
        }
        for i in 0..dim {
            for j in 0..i {
                if (matrix[i * dim + j] - matrix[j * dim + i]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("quadratic matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self {
            matrix,
            dim,
            layout: Arc::new(Layout::from_shapes([("theta", vec![dim], true)])),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            m[i * dim + i] = *d;
        }
        Self::new(dim, m).expect("diagonal is symmetric")
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| crate::tensor::dot(&self.matrix[i * self.dim..(i + 1) * self.dim], v))
            .collect()
    }
}

impl Objective for Quadratic {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn num_classes(&self) -> usize {
        1
    }

    fn data_term(&self, params: &ParamVector, batch: &Batch, direction: Option<&ParamVector>) -> Result<Evaluation> {
        if batch.example_shape().iter().product::<usize>() != self.dim {
            return Err(Error::Shape {
                context: "quadratic input".into(),
                expected: vec![self.dim],
                actual: batch.example_shape().to_vec(),
            });
        }
        let n = batch.len() as f64;
        let theta = params.as_slice();
        let mut loss = 0.0;
        let mut mean_diff = vec![0.0; self.dim];
        for x in batch.inputs.data().chunks(self.dim) {
            let diff: Vec<f64> = theta.iter().zip(x).map(|(t, xi)| t - xi).collect();
            loss += 0.5 * crate::tensor::dot(&diff, &self.apply(&diff));
            for (m, d) in mean_diff.iter_mut().zip(&diff) {
                *m += d / n;
            }
        }
        let grad = ParamVector::new(Arc::clone(&self.layout), self.apply(&mean_diff))?;
        let hvp = direction
            .map(|v| ParamVector::new(Arc::clone(&self.layout), self.apply(v.as_slice())))
            .transpose()?;
        Ok(Evaluation {
            loss: loss / n,
            grad,
            hvp,
        })
    }

    fn probabilities(&self, _params: &ParamVector, inputs: &Tensor) -> Result<Tensor> {
        Ok(Tensor::from_parts(vec![inputs.shape()[0], 1], vec![1.0; inputs.shape()[0]]))
    }
}

/// A frozen parameter vector under attack, paired with its objective.
///
/// `l2` is the training penalty; it belongs to the empirical-risk Hessian.
/// Per-sample gradients are taken on the bare loss `L(z, theta)`.
#[derive(Clone, Copy)]
pub struct Target<'a> {
    pub model: &'a dyn Objective,
    pub params: &'a ParamVector,
    pub l2: f64,
}

impl<'a> Target<'a> {
    pub fn new(model: &'a dyn Objective, params: &'a ParamVector, l2: f64) -> Self {
        Self { model, params, l2 }
    }

    pub fn sample_grad(&self, sample: &Sample) -> Result<ParamVector> {
        self.model.grad(self.params, &Batch::single(sample), 0.0)
    }

    pub fn sample_loss(&self, sample: &Sample) -> Result<f64> {
        self.model.loss(self.params, &Batch::single(sample), 0.0)
    }

    /// Hessian-vector product of the regularized empirical risk on `batch`.
    pub fn hvp(&self, batch: &Batch, v: &ParamVector) -> Result<ParamVector> {
        self.model.hvp(self.params, batch, v, self.l2)
    }

    pub fn predict(&self, input: &Tensor) -> Result<(usize, Vec<f64>)> {
        self.model.predict(self.params, input)
    }

    pub fn label_match(&self, sample: &Sample) -> Result<bool> {
        Ok(self.predict(&sample.input)?.0 == sample.label)
    }
}
