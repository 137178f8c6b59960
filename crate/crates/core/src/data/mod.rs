//! Datasets, the member/non-member split protocol and training
//! augmentations.

mod augment;
mod io;
mod split;

pub use augment::{augment, crop_flip, AugmentationFamily, AugmentationKind};
pub use io::{load_csv, load_idx, parse_idx_images, parse_idx_labels};
pub use split::{make_splits, MiSplit, SplitConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::{Sample, Tensor};

/// An immutable labelled dataset. Sample ids equal their index.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub name: String,
    num_classes: usize,
    samples: Vec<Sample>,
}

impl LabeledDataset {
    /// Builds a dataset, renumbering sample ids to their positions.
    pub fn new(name: impl Into<String>, num_classes: usize, items: Vec<(Tensor, usize)>) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset must be nonempty".into()))?;
        let shape = first.0.shape().to_vec();
        let mut samples = Vec::with_capacity(items.len());
        for (id, (input, label)) in items.into_iter().enumerate() {
            if label >= num_classes {
                return Err(Error::InvalidArgument(format!(
                    "sample {id}: label {label} >= num_classes {num_classes}"
                )));
            }
            if input.shape() != shape.as_slice() {
                return Err(Error::Shape {
                    context: format!("dataset sample {id}"),
                    expected: shape,
                    actual: input.shape().to_vec(),
                });
            }
            samples.push(Sample { id, input, label });
        }
        Ok(Self {
            name: name.into(),
            num_classes,
            samples,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn get(&self, id: usize) -> Option<&Sample> {
        self.samples.get(id)
    }

    pub fn input_shape(&self) -> &[usize] {
        self.samples[0].input.shape()
    }

    /// Clones the samples at `ids`, preserving their ids.
    pub fn select(&self, ids: &[usize]) -> Result<Vec<Sample>> {
        ids.iter()
            .map(|&i| {
                self.samples.get(i).cloned().ok_or_else(|| {
                    Error::InvalidArgument(format!("sample id {i} out of range ({} samples)", self.len()))
                })
            })
            .collect()
    }

    /// Per-channel standardization with statistics taken from `fit_ids` only.
    /// Inputs are treated as `[channels, ...]`; rank-1 inputs have one channel.
    pub fn standardized(&self, fit_ids: &[usize]) -> Result<LabeledDataset> {
        if fit_ids.is_empty() {
            return Err(Error::InvalidArgument("standardization needs fit samples".into()));
        }
        let shape = self.input_shape();
        let channels = if shape.len() > 1 { shape[0] } else { 1 };
        let per_channel = self.samples[0].input.len() / channels;
        let mut sum = vec![0.0; channels];
        let mut sq = vec![0.0; channels];
        for s in self.select(fit_ids)? {
            for (idx, v) in s.input.data().iter().enumerate() {
                sum[idx / per_channel] += v;
                sq[idx / per_channel] += v * v;
            }
        }
        let count = (fit_ids.len() * per_channel) as f64;
        let stats: Vec<(f64, f64)> = sum
            .iter()
            .zip(&sq)
            .map(|(s, q)| {
                let mean = s / count;
                let var = (q / count - mean * mean).max(0.0);
                (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
            })
            .collect();
        let mut out = self.clone();
        for s in &mut out.samples {
            for (idx, v) in s.input.data_mut().iter_mut().enumerate() {
                let (mean, std) = stats[idx / per_channel];
                *v = (*v - mean) / std;
            }
        }
        Ok(out)
    }
}

/// Gaussian class clusters: each class mean is a random unit vector scaled
/// by `spread`, and samples add standard normal noise.
pub fn synth_blobs(num_classes: usize, dim: usize, per_class: usize, spread: f64, seed: u64) -> Result<LabeledDataset> {
    if num_classes == 0 || dim == 0 || per_class == 0 || !(spread > 0.0) {
        return Err(Error::InvalidArgument(
            "synth_blobs: num_classes, dim, per_class and spread must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| spread * x / norm).collect()
        })
        .collect();
    let mut items = Vec::with_capacity(num_classes * per_class);
    for _ in 0..per_class {
        for (label, mean) in means.iter().enumerate() {
            let x: Vec<f64> = mean
                .iter()
                .map(|m| m + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            items.push((Tensor::new(vec![dim], x)?, label));
        }
    }
    LabeledDataset::new(format!("blobs-{num_classes}x{dim}-s{seed}"), num_classes, items)
}

/// Single-channel `side x side` images. Each class has a smooth template
/// `cos(a*row + b*col + phase)` with random frequencies, scaled by `spread`;
/// samples add white noise smoothed by a 3x3 box filter, so small shifts
/// and flips keep an image recognisable.
pub fn synth_patterns(num_classes: usize, side: usize, per_class: usize, spread: f64, seed: u64) -> Result<LabeledDataset> {
    if num_classes == 0 || side == 0 || per_class == 0 || !(spread > 0.0) {
        return Err(Error::InvalidArgument(
            "synth_patterns: num_classes, side, per_class and spread must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    let templates: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| {
            let (a, b, phase) = (0.6 * normal(), 0.6 * normal(), normal());
            (0..side * side)
                .map(|k| spread * (a * (k / side) as f64 + b * (k % side) as f64 + phase).cos())
                .collect()
        })
        .collect();
    let mut items = Vec::with_capacity(num_classes * per_class);
    for _ in 0..per_class {
        for (label, template) in templates.iter().enumerate() {
            let noise: Vec<f64> = (0..side * side).map(|_| normal()).collect();
            let x: Vec<f64> = box_blur(&noise, side).iter().zip(template).map(|(e, t)| t + e).collect();
            items.push((Tensor::new(vec![1, side, side], x)?, label));
        }
    }
    LabeledDataset::new(format!("patterns-{num_classes}x{side}-s{seed}"), num_classes, items)
}

/// 3x3 mean filter with the window clipped at the border.
fn box_blur(x: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for r in 0..side {
        for c in 0..side {
            let (mut acc, mut count) = (0.0, 0.0);
            for rr in r.saturating_sub(1)..(r + 2).min(side) {
                for cc in c.saturating_sub(1)..(c + 2).min(side) {
                    acc += x[rr * side + cc];
                    count += 1.0;
                }
            }
            out[r * side + c] = acc / count;
        }
    }
    out
}
