use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{augment, AugmentationFamily};
use crate::error::{Error, Result};
use crate::models::Target;
use crate::rng::{derive_rng, stream};
use crate::tensor::{Batch, ParamVector, Sample};

/// Parameters of the stochastic inverse-HVP recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LissaConfig {
    /// Independent recursions averaged together (`r`).
    pub repeats: usize,
    /// Recursion steps per repeat (`d`).
    pub depth: usize,
    /// Damping `lambda` added to the Hessian.
    pub damping: f64,
    /// Scale `c`; the recursion contracts only when `c > ||H|| + lambda`.
    pub scale: f64,
    /// Samples per Hessian minibatch.
    #[serde(default = "one")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

pub const DEFAULT_DAMPING: f64 = 0.01;
pub const DEFAULT_SCALE: f64 = 25.0;
pub const SIF_MAX_DEPTH: usize = 1000;

impl LissaConfig {
    pub fn new(repeats: usize, depth: usize) -> Self {
        Self {
            repeats,
            depth,
            damping: DEFAULT_DAMPING,
            scale: DEFAULT_SCALE,
            batch_size: 1,
            seed: 0,
        }
    }

    /// One pass over the members: `r = 1`, `d = min(|members|, 1000)`.
    pub fn for_sif(num_members: usize) -> Self {
        Self::new(1, num_members.min(SIF_MAX_DEPTH))
    }

    /// Short recursions over augmented copies: `r = 8`, `d = 8`.
    pub fn for_ada_sif() -> Self {
        Self::new(8, 8)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("LiSSA repeats and batch size must be >= 1".into()));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::InvalidArgument(format!("damping must be >= 0, got {}", self.damping)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be > 0, got {}", self.scale)));
        }
        Ok(())
    }
}

/// Source of the minibatches whose Hessians drive the recursion.
pub trait HessianSampler: Sync {
    fn draw(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<Batch>;
}

/// Uniform draws (with replacement) from the training members.
pub struct TrainingSampler<'a> {
    samples: &'a [Sample],
}

impl<'a> TrainingSampler<'a> {
    pub fn new(samples: &'a [Sample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientSamples {
                what: "Hessian sampler".into(),
                required: 1,
                available: 0,
            });
        }
        Ok(Self { samples })
    }
}

impl HessianSampler for TrainingSampler<'_> {
    fn draw(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<Batch> {
        let picks: Vec<&Sample> = (0..batch_size)
            .map(|_| &self.samples[rng.random_range(0..self.samples.len())])
            .collect();
        Batch::from_samples(picks)
    }
}

/// Always the same batch; turns the recursion into a deterministic Neumann
/// series for a fixed Hessian.
pub struct FullBatchSampler {
    batch: Batch,
}

impl FullBatchSampler {
    pub fn new(samples: &[Sample]) -> Result<Self> {
        Ok(Self {
            batch: Batch::from_samples(samples)?,
        })
    }
}

impl HessianSampler for FullBatchSampler {
    fn draw(&self, _batch_size: usize, _rng: &mut ChaCha8Rng) -> Result<Batch> {
        Ok(self.batch.clone())
    }
}

/// Augmented copies of a single sample.
pub struct AugmentationSampler<'a> {
    sample: &'a Sample,
    family: &'a AugmentationFamily,
}

impl<'a> AugmentationSampler<'a> {
    pub fn new(sample: &'a Sample, family: &'a AugmentationFamily) -> Self {
        Self { sample, family }
    }
}

impl HessianSampler for AugmentationSampler<'_> {
    fn draw(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<Batch> {
        let copies = (0..batch_size)
            .map(|_| augment(self.family, self.sample, rng))
            .collect::<Result<Vec<_>>>()?;
        Batch::from_samples(&copies)
    }
}

/// Approximates `(H + lambda I)^{-1} g` by the damped, scaled Neumann
/// recursion
///
/// ```text
/// x_0 = g,   x_{t+1} = g + (I - (H_t + lambda I) / c) x_t,   result = x_d / c
/// ```
///
/// averaged over `repeats`. `stream` selects the random stream (normally the
/// id of the sample being scored).
pub fn inverse_hvp_lissa(
    target: &Target<'_>,
    sampler: &dyn HessianSampler,
    g: &ParamVector,
    cfg: &LissaConfig,
    stream_id: u64,
) -> Result<ParamVector> {
    cfg.validate()?;
    target.params.check_compatible(g)?;
    let keep = 1.0 - cfg.damping / cfg.scale;
    let inv_c = 1.0 / cfg.scale;
    let mut total = ParamVector::zeros(g.layout().clone());
    for rep in 0..cfg.repeats {
        let mut rng = derive_rng(cfg.seed, &[stream::LISSA, stream_id, rep as u64]);
        let mut x = g.clone();
        for step in 0..cfg.depth {
            let batch = sampler.draw(cfg.batch_size, &mut rng)?;
            let hx = target.hvp(&batch, &x)?;
            for ((xi, gi), hi) in x.as_mut_slice().iter_mut().zip(g.as_slice()).zip(hx.as_slice()) {
                *xi = gi + keep * *xi - inv_c * hi;
            }
            if !x.is_finite() {
                return Err(Error::LissaDiverged { step: step + 1 });
            }
        }
        total.axpy(inv_c, &x)?;
    }
    total.scale(1.0 / cfg.repeats as f64);
    Ok(total)
}

/// Power-iteration estimate of `||H||` for the mean Hessian of `batches`
/// sampled minibatches.
pub fn estimate_hessian_norm(
    target: &Target<'_>,
    sampler: &dyn HessianSampler,
    batches: usize,
    batch_size: usize,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = derive_rng(seed, &[stream::POWER]);
    let drawn = (0..batches.max(1))
        .map(|_| sampler.draw(batch_size, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let layout = target.params.layout().clone();
    let data: Vec<f64> = (0..layout.total_len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut v = ParamVector::new(layout.clone(), data)?;
    let n0 = v.norm();
    if n0 == 0.0 {
        return Ok(0.0);
    }
    v.scale(1.0 / n0);
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let mut hv = ParamVector::zeros(layout.clone());
        for b in &drawn {
            hv.axpy(1.0 / drawn.len() as f64, &target.hvp(b, &v)?)?;
        }
        estimate = hv.norm();
        if estimate == 0.0 || !estimate.is_finite() {
            break;
        }
        v = hv.scaled(1.0 / estimate);
    }
    Ok(estimate)
}

/// True when the recursion is expected to contract, i.e.
/// `(||H|| + lambda) / c < 1`.
pub fn scale_is_safe(hessian_norm: f64, cfg: &LissaConfig) -> bool {
    (hessian_norm + cfg.damping) / cfg.scale < 1.0
}
