use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Sample, Tensor};

/// The kind of label-preserving transformation drawn per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AugmentationKind {
    Identity,
    /// Reflect-pad by `pad`, random crop back to the original size, then
    /// horizontal flip with probability `flip_prob`. Inputs are `[c, h, w]`.
    ImageCropFlip { pad: usize, flip_prob: f64 },
    /// Additive isotropic Gaussian noise.
    VectorJitter { sigma: f64 },
}

/// A training augmentation distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationFamily {
    #[serde(flatten)]
    pub kind: AugmentationKind,
    #[serde(default)]
    pub rng_seed: u64,
}

impl AugmentationFamily {
    pub fn identity() -> Self {
        Self {
            kind: AugmentationKind::Identity,
            rng_seed: 0,
        }
    }

    pub fn new(kind: AugmentationKind, rng_seed: u64) -> Result<Self> {
        let family = Self { kind, rng_seed };
        family.validate()?;
        Ok(family)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, AugmentationKind::Identity)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AugmentationKind::Identity => Ok(()),
            AugmentationKind::ImageCropFlip { flip_prob, .. } if !(0.0..=1.0).contains(&flip_prob) => Err(
                Error::InvalidArgument(format!("flip_prob {flip_prob} outside [0, 1]")),
            ),
            AugmentationKind::VectorJitter { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::InvalidArgument(format!("jitter sigma {sigma} must be >= 0")))
            }
            _ => Ok(()),
        }
    }
}

/// Draws one transformation from `family` and applies it. The label is never
/// changed.
pub fn augment<R: Rng + ?Sized>(family: &AugmentationFamily, sample: &Sample, rng: &mut R) -> Result<Sample> {
    let input = match family.kind {
        AugmentationKind::Identity => sample.input.clone(),
        AugmentationKind::ImageCropFlip { pad, flip_prob } => {
            let span = 2 * pad + 1;
            let dy = rng.random_range(0..span);
            let dx = rng.random_range(0..span);
            let flip = rng.random::<f64>() < flip_prob;
            crop_flip(&sample.input, pad, dy, dx, flip)?
        }
        AugmentationKind::VectorJitter { sigma } => {
            if sigma == 0.0 {
                sample.input.clone()
            } else {
                let noise = Normal::new(0.0, sigma)
                    .map_err(|e| Error::InvalidArgument(format!("jitter sigma: {e}")))?;
                let data = sample.input.data().iter().map(|x| x + noise.sample(rng)).collect();
                Tensor::new(sample.input.shape().to_vec(), data)?
            }
        }
    };
    Ok(Sample {
        id: sample.id,
        input,
        label: sample.label,
    })
}

/// Deterministic crop/flip: reflect-pad `[c, h, w]` by `pad`, crop the
/// `h x w` window at offset `(dy, dx)` in the padded image (each in
/// `0..=2*pad`), then optionally mirror horizontally.
pub fn crop_flip(input: &Tensor, pad: usize, dy: usize, dx: usize, flip: bool) -> Result<Tensor> {
    let shape = input.shape();
    if shape.len() != 3 {
        return Err(Error::Shape {
            context: "image_crop_flip expects [c, h, w]".into(),
            expected: vec![0, 0, 0],
            actual: shape.to_vec(),
        });
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    if pad >= h || pad >= w {
        return Err(Error::InvalidArgument(format!(
            "reflect pad {pad} must be smaller than image size {h}x{w}"
        )));
    }
    if dy > 2 * pad || dx > 2 * pad {
        return Err(Error::InvalidArgument(format!(
            "crop offset ({dy}, {dx}) outside 0..={}",
            2 * pad
        )));
    }
    let reflect = |u: isize, len: usize| -> usize {
        let len = len as isize;
        let r = if u < 0 {
            -u
        } else if u >= len {
            2 * (len - 1) - u
        } else {
            u
        };
        r as usize
    };
    let src = input.data();
    let mut out = vec![0.0; src.len()];
    for ch in 0..c {
        for i in 0..h {
            let si = reflect(i as isize + dy as isize - pad as isize, h);
            for j in 0..w {
                let jj = if flip { w - 1 - j } else { j };
                let sj = reflect(jj as isize + dx as isize - pad as isize, w);
                out[(ch * h + i) * w + j] = src[(ch * h + si) * w + sj];
            }
        }
    }
    Ok(Tensor::from_parts(shape.to_vec(), out))
}
