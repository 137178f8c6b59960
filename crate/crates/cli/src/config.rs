//! Experiment configuration (TOML) and its resolution into concrete settings.
//!
//! Every optional field is filled in by [`ExperimentConfig::resolve`]; the
//! resolved copy is itself a valid config and is written next to the
//! outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sif_core::data::{
    load_csv, load_idx, make_splits, synth_blobs, synth_patterns, AugmentationFamily, AugmentationKind,
    LabeledDataset, MiSplit, SplitConfig,
};
use sif_core::influence::{HessianSource, LissaConfig, ScorerConfig, ScorerKind};
use sif_core::models::{LrDecay, ModelSpec, TrainConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every unset sub-seed defaults to it.
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub split: SplitSettings,
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub augmentation: Option<AugmentationFamily>,
    #[serde(default)]
    pub scorer: ScorerSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Blobs {
        classes: usize,
        dim: usize,
        per_class: usize,
        spread: f64,
        seed: Option<u64>,
    },
    Patterns {
        classes: usize,
        side: usize,
        per_class: usize,
        spread: f64,
        seed: Option<u64>,
    },
    Csv {
        path: PathBuf,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSettings {
    pub mem_size: usize,
    pub validation_fraction: Option<f64>,
    pub stratify: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub l2: Option<f64>,
    pub momentum: Option<f64>,
    pub nesterov: Option<bool>,
    pub lr_decay: Option<bool>,
    pub lr_decay_factor: Option<f64>,
    pub lr_decay_patience: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerSettings {
    pub kind: Option<ScorerKind>,
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub depth: Option<usize>,
    pub damping: Option<f64>,
    pub scale: Option<f64>,
    pub batch_size: Option<usize>,
    pub grad_samples: Option<usize>,
    pub ensemble: Option<usize>,
    pub hessian_source: Option<HessianSource>,
}

pub const DEFAULT_LR: f64 = 0.05;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.anchor_paths(base);
        cfg.check_paths()?;
        Ok(cfg)
    }

    /// Makes dataset paths relative to the config file absolute.
    fn anchor_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetConfig::Csv { path } => fix(path),
            DatasetConfig::Idx { images, labels } => {
                fix(images);
                fix(labels);
            }
            _ => {}
        }
    }

    fn check_paths(&self) -> Result<(), CliError> {
        let paths: Vec<&PathBuf> = match &self.dataset {
            DatasetConfig::Csv { path } => vec![path],
            DatasetConfig::Idx { images, labels } => vec![images, labels],
            _ => vec![],
        };
        for p in paths {
            if !p.exists() {
                return Err(config_err(format!("dataset file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Fills every defaulted field. `input_dim` and `classes` describe the
    /// loaded dataset and size the default model.
    pub fn resolve(&mut self, input_dim: usize, classes: usize) {
        let seed = self.seed;
        match &mut self.dataset {
            DatasetConfig::Blobs { seed: s, .. } | DatasetConfig::Patterns { seed: s, .. } => {
                s.get_or_insert(seed);
            }
            _ => {}
        }
        let defaults = SplitConfig::new(self.split.mem_size, seed);
        self.split.validation_fraction.get_or_insert(defaults.validation_fraction);
        self.split.stratify.get_or_insert(defaults.stratify);
        self.split.seed.get_or_insert(seed);
        self.model.get_or_insert_with(|| ModelSpec::logreg(input_dim, classes));
        self.augmentation.get_or_insert_with(AugmentationFamily::identity);

        let base = TrainConfig::with_lr(DEFAULT_LR);
        let decay = base.lr_decay.clone().unwrap_or_default();
        let t = &mut self.train;
        t.lr.get_or_insert(base.lr);
        t.epochs.get_or_insert(base.epochs);
        t.batch_size.get_or_insert(base.batch_size);
        t.l2.get_or_insert(base.l2);
        t.momentum.get_or_insert(base.momentum);
        t.nesterov.get_or_insert(base.nesterov);
        t.lr_decay.get_or_insert(true);
        t.lr_decay_factor.get_or_insert(decay.factor);
        t.lr_decay_patience.get_or_insert(decay.patience);
        t.seed.get_or_insert(seed);

        let s = &mut self.scorer;
        s.kind.get_or_insert(ScorerKind::Sif);
        s.seed.get_or_insert(seed);
        let preset = self.scorer_preset(self.split.mem_size);
        let s = &mut self.scorer;
        s.repeats.get_or_insert(preset.lissa.repeats);
        s.depth.get_or_insert(preset.lissa.depth);
        s.damping.get_or_insert(preset.lissa.damping);
        s.scale.get_or_insert(preset.lissa.scale);
        s.batch_size.get_or_insert(preset.lissa.batch_size);
        s.grad_samples.get_or_insert(preset.grad_samples);
        s.ensemble.get_or_insert(preset.ensemble);
        s.hessian_source.get_or_insert(preset.hessian_source);
    }

    fn family(&self) -> AugmentationFamily {
        self.augmentation.clone().unwrap_or_else(AugmentationFamily::identity)
    }

    fn scorer_preset(&self, num_members: usize) -> ScorerConfig {
        let seed = self.scorer.seed.unwrap_or(self.seed);
        match self.scorer.kind.unwrap_or(ScorerKind::Sif) {
            ScorerKind::Sif => ScorerConfig::sif(num_members, seed),
            ScorerKind::AdaSif => ScorerConfig::ada_sif(self.family(), seed),
            ScorerKind::AvgSif => ScorerConfig::avg_sif(self.family(), num_members, seed),
        }
    }

    /// Scorer of the given kind with its preset, overridden by any explicit
    /// settings in the config.
    pub fn scorer_config(&self, kind: ScorerKind) -> ScorerConfig {
        let mut probe = self.clone();
        if probe.scorer.kind != Some(kind) {
            // explicit LiSSA settings belong to the configured kind only
            probe.scorer = ScorerSettings {
                kind: Some(kind),
                seed: self.scorer.seed,
                ..Default::default()
            };
        }
        let preset = probe.scorer_preset(self.split.mem_size);
        let s = &probe.scorer;
        ScorerConfig {
            kind,
            lissa: LissaConfig {
                repeats: s.repeats.unwrap_or(preset.lissa.repeats),
                depth: s.depth.unwrap_or(preset.lissa.depth),
                damping: s.damping.unwrap_or(preset.lissa.damping),
                scale: s.scale.unwrap_or(preset.lissa.scale),
                batch_size: s.batch_size.unwrap_or(preset.lissa.batch_size),
                seed: preset.lissa.seed,
            },
            augmentation: preset.augmentation,
            grad_samples: s.grad_samples.unwrap_or(preset.grad_samples),
            ensemble: s.ensemble.unwrap_or(preset.ensemble),
            hessian_source: s.hessian_source.unwrap_or(preset.hessian_source),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        let mut cfg = TrainConfig::with_lr(t.lr.unwrap_or(DEFAULT_LR));
        let base = cfg.clone();
        cfg.epochs = t.epochs.unwrap_or(base.epochs);
        cfg.batch_size = t.batch_size.unwrap_or(base.batch_size);
        cfg.l2 = t.l2.unwrap_or(base.l2);
        cfg.momentum = t.momentum.unwrap_or(base.momentum);
        cfg.nesterov = t.nesterov.unwrap_or(base.nesterov);
        let decay = LrDecay::default();
        cfg.lr_decay = t.lr_decay.unwrap_or(true).then(|| LrDecay {
            factor: t.lr_decay_factor.unwrap_or(decay.factor),
            patience: t.lr_decay_patience.unwrap_or(decay.patience),
        });
        cfg.augmentation = self.family();
        cfg.seed = t.seed.unwrap_or(self.seed);
        cfg
    }

    pub fn split_config(&self) -> SplitConfig {
        let d = SplitConfig::new(self.split.mem_size, self.seed);
        SplitConfig {
            mem_size: self.split.mem_size,
            validation_fraction: self.split.validation_fraction.unwrap_or(d.validation_fraction),
            stratify: self.split.stratify.unwrap_or(d.stratify),
            seed: self.split.seed.unwrap_or(self.seed),
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| config_err(format!("serializing config: {e}")))
    }
}

fn load_raw(cfg: &DatasetConfig, master_seed: u64) -> sif_core::Result<LabeledDataset> {
    match cfg {
        DatasetConfig::Blobs {
            classes,
            dim,
            per_class,
            spread,
            seed,
        } => synth_blobs(*classes, *dim, *per_class, *spread, seed.unwrap_or(master_seed)),
        DatasetConfig::Patterns {
            classes,
            side,
            per_class,
            spread,
            seed,
        } => synth_patterns(*classes, *side, *per_class, *spread, seed.unwrap_or(master_seed)),
        DatasetConfig::Csv { path } => load_csv(path),
        DatasetConfig::Idx { images, labels } => load_idx(images, labels),
    }
}

/// A loaded experiment: the resolved config, the dataset standardized on the
/// members, and the membership split.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub dataset: LabeledDataset,
    pub split: MiSplit,
}

impl Experiment {
    pub fn prepare(mut config: ExperimentConfig) -> Result<Self, CliError> {
        let raw = load_raw(&config.dataset, config.seed).map_err(|e| config_err(format!("dataset: {e}")))?;
        let input_dim = raw.input_shape().iter().product();
        config.resolve(input_dim, raw.num_classes());
        let split = make_splits(&raw, &config.split_config()).map_err(|e| config_err(format!("split: {e}")))?;
        let dataset = raw.standardized(&split.members()).map_err(|e| config_err(format!("dataset: {e}")))?;
        let model = config.model.as_ref().expect("resolved");
        model.validate().map_err(|e| config_err(format!("model: {e}")))?;
        if model.num_classes() != dataset.num_classes() {
            return Err(config_err(format!(
                "model has {} classes, dataset has {}",
                model.num_classes(),
                dataset.num_classes()
            )));
        }
        config.train_config().validate().map_err(|e| config_err(format!("train: {e}")))?;
        let scorer_kind = config.scorer.kind.expect("resolved");
        config
            .scorer_config(scorer_kind)
            .validate()
            .map_err(|e| config_err(format!("scorer: {e}")))?;
        if let Some(AugmentationFamily {
            kind: AugmentationKind::ImageCropFlip { .. },
            ..
        }) = &config.augmentation
        {
            if dataset.input_shape().len() != 3 {
                return Err(config_err("crop/flip augmentation needs [c, h, w] image inputs"));
            }
        }
        Ok(Self { config, dataset, split })
    }

    pub fn model(&self) -> &ModelSpec {
        self.config.model.as_ref().expect("resolved")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.config.out.clone().unwrap_or_else(|| PathBuf::from("sif-out"))
    }
}
