use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Target training-set size `|D_mem|`; must be even.
    pub mem_size: usize,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default = "default_true")]
    pub stratify: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_validation_fraction() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

impl SplitConfig {
    pub fn new(mem_size: usize, seed: u64) -> Self {
        Self {
            mem_size,
            validation_fraction: default_validation_fraction(),
            stratify: true,
            seed,
        }
    }
}

/// The four-way attack partition plus the target model's validation set.
/// Persisted as the split manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiSplit {
    pub seed: u64,
    pub mem_size: usize,
    pub mem_train: Vec<usize>,
    pub mem_test: Vec<usize>,
    pub nonmem_train: Vec<usize>,
    pub nonmem_test: Vec<usize>,
    pub validation: Vec<usize>,
}

impl MiSplit {
    /// The target model's training set `D_mem`.
    pub fn members(&self) -> Vec<usize> {
        let mut m = self.mem_train.clone();
        m.extend_from_slice(&self.mem_test);
        m
    }

    pub fn nonmembers(&self) -> Vec<usize> {
        let mut m = self.nonmem_train.clone();
        m.extend_from_slice(&self.nonmem_test);
        m
    }

    /// Checks pairwise disjointness and the four-way size equality.
    pub fn validate(&self) -> Result<()> {
        let half = self.mem_train.len();
        if [self.mem_test.len(), self.nonmem_train.len(), self.nonmem_test.len()]
            .iter()
            .any(|&n| n != half)
        {
            return Err(Error::InvalidArgument("split subsets differ in size".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for id in self
            .mem_train
            .iter()
            .chain(&self.mem_test)
            .chain(&self.nonmem_train)
            .chain(&self.nonmem_test)
            .chain(&self.validation)
        {
            if !seen.insert(*id) {
                return Err(Error::InvalidArgument(format!("sample {id} appears in two split lists")));
            }
        }
        Ok(())
    }
}

/// Splits `dataset` into `D_mem` (the target training set, `mem_size`
/// samples), a validation set, and `D_non-mem` (`mem_size` samples outside
/// both). Each of `D_mem` / `D_non-mem` is halved into fit and eval subsets.
pub fn make_splits(dataset: &LabeledDataset, cfg: &SplitConfig) -> Result<MiSplit> {
    let mem = cfg.mem_size;
    if mem == 0 || !mem.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "mem_size must be a positive even number, got {mem}"
        )));
    }
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(Error::InvalidArgument("validation_fraction must be in [0, 1)".into()));
    }
    let validation = (cfg.validation_fraction * dataset.len() as f64).round() as usize;
    let required = 2 * mem + validation;
    if dataset.len() < required {
        return Err(Error::InsufficientSamples {
            what: format!("split with mem_size {mem} (+{mem} non-members, {validation} validation)"),
            required,
            available: dataset.len(),
        });
    }
    if cfg.stratify && mem < dataset.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "stratified split needs mem_size >= num_classes ({})",
            dataset.num_classes()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let order = if cfg.stratify {
        interleaved_by_class(dataset, &mut rng)
    } else {
        let mut all: Vec<usize> = (0..dataset.len()).collect();
        all.shuffle(&mut rng);
        all
    };

    let members = &order[..mem];
    let val = order[mem..mem + validation].to_vec();
    let nonmembers = &order[mem + validation..2 * mem + validation];

    let (mem_train, mem_test) = halve(dataset, members, cfg.stratify, &mut rng);
    let (nonmem_train, nonmem_test) = halve(dataset, nonmembers, cfg.stratify, &mut rng);

    let split = MiSplit {
        seed: cfg.seed,
        mem_size: mem,
        mem_train,
        mem_test,
        nonmem_train,
        nonmem_test,
        validation: val,
    };
    split.validate()?;
    Ok(split)
}

/// Round-robin over per-class shuffled queues so every prefix is as close to
/// class-balanced as the class sizes allow.
fn interleaved_by_class(dataset: &LabeledDataset, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for s in dataset.samples() {
        queues[s.label].push(s.id);
    }
    for q in &mut queues {
        q.shuffle(rng);
        q.reverse();
    }
    let mut class_order: Vec<usize> = (0..queues.len()).collect();
    class_order.shuffle(rng);
    let mut out = Vec::with_capacity(dataset.len());
    while out.len() < dataset.len() {
        for &c in &class_order {
            if let Some(id) = queues[c].pop() {
                out.push(id);
            }
        }
    }
    out
}

/// Splits `ids` into two equal halves. Stratified halving deals each class
/// alternately, with odd leftovers alternating sides so totals match.
fn halve(dataset: &LabeledDataset, ids: &[usize], stratify: bool, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let half = ids.len() / 2;
    if !stratify {
        let mut ids = ids.to_vec();
        ids.shuffle(rng);
        let test = ids.split_off(half);
        return (ids, test);
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &id in ids {
        by_class.entry(dataset.samples()[id].label).or_default().push(id);
    }
    let (mut a, mut b) = (Vec::with_capacity(half), Vec::with_capacity(half));
    let mut extra_to_a = rng.random_bool(0.5);
    for (_, mut members) in by_class {
        members.shuffle(rng);
        let odd = members.len() % 2 == 1;
        let leftover = if odd { members.pop() } else { None };
        for pair in members.chunks(2) {
            a.push(pair[0]);
            b.push(pair[1]);
        }
        if let Some(id) = leftover {
            if extra_to_a {
                a.push(id);
            } else {
                b.push(id);
            }
            extra_to_a = !extra_to_a;
        }
    }
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}
