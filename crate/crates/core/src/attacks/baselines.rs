use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, MiSplit};
use crate::error::{Error, Result};
use crate::models::{Checkpoint, Target};
use crate::tensor::Sample;

/// Label-match baseline: member iff the target classifies `z` correctly.
pub fn gap_attack(target: &Target<'_>, z: &Sample) -> Result<bool> {
    target.label_match(z)
}

pub fn gap_predictions(target: &Target<'_>, samples: &[Sample]) -> Result<Vec<bool>> {
    samples.iter().map(|z| gap_attack(target, z)).collect()
}

/// `[probabilities sorted descending..., cross-entropy, label-match bit]`.
pub fn blackbox_features(probs: &[f64], label: usize) -> Result<Vec<f64>> {
    let p_y = *probs
        .get(label)
        .ok_or_else(|| Error::InvalidArgument(format!("label {label} outside {} classes", probs.len())))?;
    let mut f = probs.to_vec();
    f.sort_by(|a, b| b.total_cmp(a));
    f.push(-p_y.max(f64::MIN_POSITIVE).ln());
    let predicted = crate::models::argmax(probs);
    f.push(if predicted == label { 1.0 } else { 0.0 });
    Ok(f)
}

/// L2-regularized logistic regression over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackboxAttack {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
}

impl BlackboxAttack {
    fn standardize(&self, f: &[f64]) -> Vec<f64> {
        f.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn member_probability(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::Shape {
                context: "blackbox features".into(),
                expected: vec![self.weights.len()],
                actual: vec![features.len()],
            });
        }
        let x = self.standardize(features);
        let z = self.bias + crate::tensor::dot(&self.weights, &x);
        Ok(sigmoid(z))
    }

    pub fn predict(&self, features: &[f64]) -> Result<bool> {
        Ok(self.member_probability(features)? > 0.5)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Newton (IRLS) fit of the membership classifier.
pub fn fit_blackbox(member_features: &[Vec<f64>], nonmember_features: &[Vec<f64>], l2: f64) -> Result<BlackboxAttack> {
    if member_features.is_empty() || nonmember_features.is_empty() {
        return Err(Error::Degenerate(
            "confidence attack needs both members and non-members in the fit data".into(),
        ));
    }
    let dim = member_features[0].len();
    let rows: Vec<(&Vec<f64>, f64)> = member_features
        .iter()
        .map(|f| (f, 1.0))
        .chain(nonmember_features.iter().map(|f| (f, 0.0)))
        .collect();
    if rows.iter().any(|(f, _)| f.len() != dim || f.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidArgument("feature vectors must be finite and equal length".into()));
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for (f, _) in &rows {
        for (m, x) in mean.iter_mut().zip(f.iter()) {
            *m += x / n;
        }
    }
    let mut scale = vec![0.0; dim];
    for (f, _) in &rows {
        for ((s, x), m) in scale.iter_mut().zip(f.iter()).zip(&mean) {
            *s += (x - m).powi(2) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    // design matrix with the bias in the last column
    let p = dim + 1;
    let x = DMatrix::from_fn(rows.len(), p, |i, j| {
        if j == dim {
            1.0
        } else {
            (rows[i].0[j] - mean[j]) / scale[j]
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let objective = |w: &DVector<f64>| {
        let z = &x * w;
        let data: f64 = z.iter().zip(y.iter()).map(|(z, y)| log1p_exp(*z) - y * z).sum::<f64>() / n;
        data + 0.5 * l2 * w.rows(0, dim).norm_squared()
    };
    let mut w = DVector::zeros(p);
    let mut f = objective(&w);
    for _ in 0..100 {
        let z = &x * &w;
        let probs = z.map(sigmoid);
        let mut grad = x.transpose() * (&probs - &y) / n;
        let mut weighted = x.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= probs[i] * (1.0 - probs[i]) / n;
        }
        let mut h = x.transpose() * weighted;
        for j in 0..dim {
            grad[j] += l2 * w[j];
            h[(j, j)] += l2;
        }
        for j in 0..p {
            h[(j, j)] += 1e-10;
        }
        if grad.norm() < 1e-9 {
            break;
        }
        let step = h
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { damping: l2 })?
            .solve(&grad);
        let mut t = 1.0;
        loop {
            let cand = &w - &step * t;
            let fc = objective(&cand);
            if fc <= f || t < 1e-10 {
                w = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(BlackboxAttack {
        weights: w.rows(0, dim).iter().copied().collect(),
        bias: w[dim],
        l2,
        feature_mean: mean,
        feature_scale: scale,
    })
}

pub const BLACKBOX_L2: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackboxOutcome {
    pub attack: BlackboxAttack,
    pub member_preds: Vec<bool>,
    pub nonmember_preds: Vec<bool>,
}

fn features_of(checkpoint: &Checkpoint, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
    let target = checkpoint.target();
    samples
        .iter()
        .map(|z| {
            let (_, probs) = target.predict(&z.input)?;
            blackbox_features(&probs, z.label)
        })
        .collect()
}

/// Fits the confidence-vector classifier on the fit subsets and predicts
/// membership on the evaluation subsets.
pub fn blackbox_confidence_attack(checkpoint: &Checkpoint, dataset: &LabeledDataset, split: &MiSplit) -> Result<BlackboxOutcome> {
    let fm = features_of(checkpoint, &dataset.select(&split.mem_train)?)?;
    let fn_ = features_of(checkpoint, &dataset.select(&split.nonmem_train)?)?;
    let attack = fit_blackbox(&fm, &fn_, BLACKBOX_L2)?;
    let predict = |ids: &[usize]| -> Result<Vec<bool>> {
        features_of(checkpoint, &dataset.select(ids)?)?
            .iter()
            .map(|f| attack.predict(f))
            .collect()
    };
    let member_preds = predict(&split.mem_test)?;
    let nonmember_preds = predict(&split.nonmem_test)?;
    Ok(BlackboxOutcome {
        attack,
        member_preds,
        nonmember_preds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::balanced_accuracy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_computed_features() {
        let f = blackbox_features(&[0.2, 0.5, 0.3], 2).unwrap();
        assert_eq!(&f[..3], &[0.5, 0.3, 0.2]);
        assert!((f[3] + 0.3f64.ln()).abs() < 1e-15);
        assert_eq!(f[4], 0.0);
        let g = blackbox_features(&[0.2, 0.5, 0.3], 1).unwrap();
        assert_eq!(g[4], 1.0);
        assert!(blackbox_features(&[1.0], 3).is_err());
    }

    #[test]
    fn separable_confidences() {
        let members: Vec<Vec<f64>> = (0..20).map(|_| blackbox_features(&[1.0, 0.0, 0.0], 0).unwrap()).collect();
        let third = 1.0 / 3.0;
        let non: Vec<Vec<f64>> = (0..20)
            .map(|i| blackbox_features(&[third, third, third], i % 3).unwrap())
            .collect();
        let a = fit_blackbox(&members, &non, BLACKBOX_L2).unwrap();
        let mp: Vec<bool> = members.iter().map(|f| a.predict(f).unwrap()).collect();
        let np: Vec<bool> = non.iter().map(|f| a.predict(f).unwrap()).collect();
        assert_eq!(balanced_accuracy(&mp, &np).unwrap(), 1.0);
    }

    #[test]
    fn identical_distributions_are_chance() {
        let draw = |rng: &mut ChaCha8Rng| {
            let a: f64 = rng.random_range(0.2..1.0);
            let b: f64 = rng.random_range(0.0..(1.0 - a));
            let probs = [a, b, 1.0 - a - b];
            blackbox_features(&probs, rng.random_range(0..3)).unwrap()
        };
        let mut accs = Vec::new();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fm: Vec<_> = (0..200).map(|_| draw(&mut rng)).collect();
            let fnm: Vec<_> = (0..200).map(|_| draw(&mut rng)).collect();
            let a = fit_blackbox(&fm, &fnm, BLACKBOX_L2).unwrap();
            let em: Vec<bool> = (0..200).map(|_| a.predict(&draw(&mut rng)).unwrap()).collect();
            let en: Vec<bool> = (0..200).map(|_| a.predict(&draw(&mut rng)).unwrap()).collect();
            accs.push(balanced_accuracy(&em, &en).unwrap());
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - 0.5).abs() <= 0.05, "{mean}");
    }

    #[test]
    fn single_class_rejected() {
        let f = vec![vec![1.0, 0.0]];
        assert!(matches!(fit_blackbox(&f, &[], 0.1), Err(Error::Degenerate(_))));
    }
}
