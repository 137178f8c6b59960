use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hessian::{inverse_hvp_exact, ExactHessian};
use super::lissa::{inverse_hvp_lissa, AugmentationSampler, HessianSampler, LissaConfig, TrainingSampler};
use super::SifRecord;
use crate::data::{augment, AugmentationFamily};
use crate::error::{Error, Result};
use crate::models::Target;
use crate::rng::{derive_rng, stream};
use crate::tensor::{ParamVector, Sample};

/// How `(H + lambda I)^{-1} g` is obtained.
#[derive(Clone, Copy)]
pub enum Solver<'a> {
    Exact(&'a ExactHessian),
    Lissa {
        sampler: &'a dyn HessianSampler,
        cfg: &'a LissaConfig,
    },
}

impl Solver<'_> {
    pub fn solve(&self, target: &Target<'_>, g: &ParamVector, stream_id: u64) -> Result<ParamVector> {
        match self {
            Solver::Exact(h) => inverse_hvp_exact(h, g),
            Solver::Lissa { sampler, cfg } => inverse_hvp_lissa(target, *sampler, g, cfg, stream_id),
        }
    }

    fn is_exact(&self) -> bool {
        matches!(self, Solver::Exact(_))
    }
}

/// `I(z_a, z_b) = -grad L(z_b)^T (H + lambda I)^{-1} grad L(z_a)`.
///
/// The inverse is applied to the gradient of `z_a` using `z_a`'s random
/// stream, so `pairwise_influence(z, z)` and `sif(z)` agree exactly.
pub fn pairwise_influence(target: &Target<'_>, solver: Solver<'_>, z_a: &Sample, z_b: &Sample) -> Result<f64> {
    let ga = target.sample_grad(z_a)?;
    let gb = if z_a == z_b { ga.clone() } else { target.sample_grad(z_b)? };
    let s = solver.solve(target, &ga, z_a.id as u64)?;
    Ok(-gb.dot(&s)?)
}

/// Self-influence `I(z, z)` with the model's label-match bit.
pub fn sif(target: &Target<'_>, solver: Solver<'_>, z: &Sample) -> Result<SifRecord> {
    let g = target.sample_grad(z)?;
    let s = solver.solve(target, &g, z.id as u64)?;
    let score = -g.dot(&s)?;
    if !score.is_finite() {
        return Err(Error::NonFinite(format!("self-influence of sample {}", z.id)));
    }
    if solver.is_exact() {
        // SPD inverse: the quadratic form is non-negative up to rounding
        let slack = 1e-9 * g.dot(&g)?.max(f64::MIN_POSITIVE) * s.norm().max(1.0);
        assert!(score <= slack, "exact self-influence {score} > 0 for sample {}", z.id);
    }
    Ok(SifRecord {
        sample_id: z.id,
        score,
        label_match: target.label_match(z)?,
        membership: None,
    })
}

/// Augmentation-aware self-influence: `-s_bar . g_bar`, where `g_bar` is the
/// mean gradient over `grad_samples` augmented copies of `z` and `s_bar`
/// the inverse-HVP of `g_bar` under Hessians of augmented copies of `z`.
pub fn ada_sif(
    target: &Target<'_>,
    z: &Sample,
    family: &AugmentationFamily,
    cfg: &LissaConfig,
    grad_samples: usize,
) -> Result<SifRecord> {
    if grad_samples == 0 {
        return Err(Error::InvalidArgument("grad_samples must be >= 1".into()));
    }
    let mut rng = derive_rng(cfg.seed ^ family.rng_seed, &[stream::GRAD_AUGMENT, z.id as u64]);
    let mut g_bar = ParamVector::zeros(target.params.layout().clone());
    for i in 0..grad_samples {
        let g = target.sample_grad(&augment(family, z, &mut rng)?)?;
        running_mean_update(g_bar.as_mut_slice(), g.as_slice(), i + 1);
    }
    let sampler = AugmentationSampler::new(z, family);
    let s_bar = inverse_hvp_lissa(target, &sampler, &g_bar, cfg, z.id as u64)?;
    let score = -s_bar.dot(&g_bar)?;
    if !score.is_finite() {
        return Err(Error::NonFinite(format!("adaSIF of sample {}", z.id)));
    }
    Ok(SifRecord {
        sample_id: z.id,
        score,
        label_match: target.label_match(z)?,
        membership: None,
    })
}

/// The `k` augmented copies of `z` that [`avg_sif`] scores.
pub fn ensemble_copies(z: &Sample, family: &AugmentationFamily, k: usize, seed: u64) -> Result<Vec<Sample>> {
    let mut rng = derive_rng(seed ^ family.rng_seed, &[stream::ENSEMBLE, z.id as u64]);
    (0..k).map(|_| augment(family, z, &mut rng)).collect()
}

/// Mean of plain self-influence over `k` augmented copies of `z`. Every copy
/// keeps `z`'s id and therefore shares its LiSSA streams.
pub fn avg_sif(
    target: &Target<'_>,
    solver: Solver<'_>,
    z: &Sample,
    family: &AugmentationFamily,
    k: usize,
    seed: u64,
) -> Result<SifRecord> {
    if k == 0 {
        return Err(Error::InvalidArgument("ensemble size must be >= 1".into()));
    }
    let copies = ensemble_copies(z, family, k, seed)?;
    let scores = copies
        .iter()
        .map(|c| sif(target, solver, c).map(|r| r.score))
        .collect::<Result<Vec<_>>>()?;
    Ok(SifRecord {
        sample_id: z.id,
        score: ensemble_mean(scores),
        label_match: target.label_match(z)?,
        membership: None,
    })
}

/// Running arithmetic mean; a constant sequence yields that constant exactly.
pub fn ensemble_mean<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut m = 0.0;
    for (i, x) in values.into_iter().enumerate() {
        m += (x - m) / (i + 1) as f64;
    }
    m
}

fn running_mean_update(mean: &mut [f64], x: &[f64], count: usize) {
    let w = 1.0 / count as f64;
    for (m, v) in mean.iter_mut().zip(x) {
        *m += (v - *m) * w;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Sif,
    AdaSif,
    AvgSif,
}

impl ScorerKind {
    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Sif => "sif",
            ScorerKind::AdaSif => "adasif",
            ScorerKind::AvgSif => "avgsif",
        }
    }
}

impl std::fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sif" => Ok(ScorerKind::Sif),
            "adasif" => Ok(ScorerKind::AdaSif),
            "avgsif" => Ok(ScorerKind::AvgSif),
            other => Err(Error::InvalidArgument(format!("unknown scorer `{other}`"))),
        }
    }
}

/// Where plain SIF draws its Hessian minibatches from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianSource {
    /// Uniform draws from the training members.
    #[default]
    Members,
    /// The scored sample itself.
    SelfSample,
}

/// Complete, serializable description of a membership scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    pub lissa: LissaConfig,
    #[serde(default = "AugmentationFamily::identity")]
    pub augmentation: AugmentationFamily,
    #[serde(default = "default_grad_samples")]
    pub grad_samples: usize,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    #[serde(default)]
    pub hessian_source: HessianSource,
}

fn default_grad_samples() -> usize {
    128
}

fn default_ensemble() -> usize {
    8
}

impl ScorerConfig {
    pub fn sif(num_members: usize, seed: u64) -> Self {
        Self {
            kind: ScorerKind::Sif,
            lissa: LissaConfig::for_sif(num_members).with_seed(seed),
            augmentation: AugmentationFamily::identity(),
            grad_samples: default_grad_samples(),
            ensemble: default_ensemble(),
            hessian_source: HessianSource::Members,
        }
    }

    pub fn ada_sif(family: AugmentationFamily, seed: u64) -> Self {
        Self {
            kind: ScorerKind::AdaSif,
            lissa: LissaConfig::for_ada_sif().with_seed(seed),
            augmentation: family,
            ..Self::sif(0, seed)
        }
    }

    pub fn avg_sif(family: AugmentationFamily, num_members: usize, seed: u64) -> Self {
        Self {
            kind: ScorerKind::AvgSif,
            augmentation: family,
            ..Self::sif(num_members, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lissa.validate()?;
        self.augmentation.validate()?;
        if self.grad_samples == 0 || self.ensemble == 0 {
            return Err(Error::InvalidArgument("grad_samples and ensemble must be >= 1".into()));
        }
        Ok(())
    }
}

/// A configured scorer bound to a target model and its training members.
pub struct Scorer<'a> {
    config: ScorerConfig,
    target: Target<'a>,
    members: TrainingSampler<'a>,
}

impl<'a> Scorer<'a> {
    pub fn new(config: ScorerConfig, target: Target<'a>, members: &'a [Sample]) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            target,
            members: TrainingSampler::new(members)?,
        })
    }

    pub fn config(&self) -> &ScorerConfig {
        &self.config
    }

    pub fn target(&self) -> &Target<'a> {
        &self.target
    }

    pub fn score(&self, z: &Sample) -> Result<SifRecord> {
        let cfg = &self.config;
        match cfg.kind {
            ScorerKind::Sif => match cfg.hessian_source {
                HessianSource::Members => sif(&self.target, self.lissa(&self.members), z),
                HessianSource::SelfSample => {
                    let identity = AugmentationFamily::identity();
                    let own = AugmentationSampler::new(z, &identity);
                    sif(&self.target, self.lissa(&own), z)
                }
            },
            ScorerKind::AdaSif => ada_sif(&self.target, z, &cfg.augmentation, &cfg.lissa, cfg.grad_samples),
            ScorerKind::AvgSif => avg_sif(
                &self.target,
                self.lissa(&self.members),
                z,
                &cfg.augmentation,
                cfg.ensemble,
                cfg.lissa.seed,
            ),
        }
    }

    /// Scores every sample in parallel; results keep the input order.
    pub fn score_all(&self, samples: &[Sample]) -> Vec<Result<SifRecord>> {
        samples.par_iter().map(|z| self.score(z)).collect()
    }

    fn lissa<'s>(&'s self, sampler: &'s dyn HessianSampler) -> Solver<'s> {
        Solver::Lissa {
            sampler,
            cfg: &self.config.lissa,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::exact_hessian;
    use crate::models::{Objective, Quadratic};
    use crate::tensor::Tensor;

    fn point(id: usize, x: Vec<f64>) -> Sample {
        Sample {
            id,
            input: Tensor::new(vec![x.len()], x).unwrap(),
            label: 0,
        }
    }

    #[test]
    fn zero_gradient_scores_zero() {
        let q = Quadratic::identity(2);
        let theta = ParamVector::new(q.layout().clone(), vec![1.0, 2.0]).unwrap();
        let target = Target::new(&q, &theta, 0.0);
        let z = point(0, vec![1.0, 2.0]);
        let h = exact_hessian(&target, std::slice::from_ref(&z), 0.0, 100).unwrap();
        assert_eq!(sif(&target, Solver::Exact(&h), &z).unwrap().score, 0.0);
    }

    #[test]
    fn identity_hessian_scores_negative_squared_gradient() {
        let q = Quadratic::identity(2);
        let theta = ParamVector::new(q.layout().clone(), vec![0.0, 0.0]).unwrap();
        let target = Target::new(&q, &theta, 0.0);
        // gradient at theta = 0 is -x = (0, 2)
        let z = point(0, vec![0.0, -2.0]);
        let h = exact_hessian(&target, std::slice::from_ref(&z), 0.0, 100).unwrap();
        let rec = sif(&target, Solver::Exact(&h), &z).unwrap();
        assert!((rec.score + 4.0).abs() < 1e-12);
        assert!(rec.label_match);
    }

    #[test]
    fn pairwise_on_self_equals_sif() {
        let q = Quadratic::diagonal(&[2.0, 0.5]);
        let theta = ParamVector::new(q.layout().clone(), vec![0.3, -0.7]).unwrap();
        let target = Target::new(&q, &theta, 0.0);
        let members = vec![point(0, vec![1.0, 0.0]), point(1, vec![0.0, 1.0])];
        let sampler = TrainingSampler::new(&members).unwrap();
        let cfg = LissaConfig::new(2, 50).with_seed(4);
        let solver = Solver::Lissa { sampler: &sampler, cfg: &cfg };
        let z = point(7, vec![0.5, 0.5]);
        assert_eq!(
            pairwise_influence(&target, solver, &z, &z).unwrap().to_bits(),
            sif(&target, solver, &z).unwrap().score.to_bits()
        );
    }

    #[test]
    fn ensemble_mean_of_handcrafted_scores() {
        let xs = [-1.5, -0.25, -3.0, -0.125, -2.0];
        let expected = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((ensemble_mean(xs) - expected).abs() < 1e-12);
        assert_eq!(ensemble_mean([-0.3; 8]), -0.3);
    }

    #[test]
    fn scorer_kind_names_round_trip() {
        for k in [ScorerKind::Sif, ScorerKind::AdaSif, ScorerKind::AvgSif] {
            assert_eq!(k.name().parse::<ScorerKind>().unwrap(), k);
        }
        assert!("foo".parse::<ScorerKind>().is_err());
    }
}
