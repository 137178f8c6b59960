//! Membership attacks: the two-threshold self-influence attack and the
//! label-match and confidence-vector baselines.

mod baselines;
mod thresholds;

use serde::{Deserialize, Serialize};

pub use baselines::{
    blackbox_confidence_attack, blackbox_features, fit_blackbox, gap_attack, gap_predictions, BlackboxAttack,
    BlackboxOutcome,
};
pub use thresholds::{
    linspace, set_thresholds, set_thresholds_reference, threshold_grids, FitRecords, ThresholdFit, Thresholds,
    GRID_SIZE,
};

use crate::data::{LabeledDataset, MiSplit};
use crate::error::{Error, Result};
use crate::influence::{Scorer, ScorerConfig, SifRecord};
use crate::metrics::EvalReport;
use crate::models::Checkpoint;
use crate::tensor::Sample;

/// Fraction of fit samples allowed to fail scoring before fitting aborts.
pub const FAILURE_BUDGET: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub train_balanced_accuracy: f64,
    pub grid_size: usize,
    pub n_members: usize,
    pub n_nonmembers: usize,
    /// Fit samples dropped because scoring failed.
    pub excluded_ids: Vec<usize>,
}

/// Fitted two-threshold attack, tied to the checkpoint it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    #[serde(with = "extended_float")]
    pub tau1: f64,
    #[serde(with = "extended_float")]
    pub tau2: f64,
    pub scorer: ScorerConfig,
    pub checkpoint: String,
    pub fit: FitSummary,
}

impl AttackModel {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            tau1: self.tau1,
            tau2: self.tau2,
        }
    }

    pub fn decide(&self, record: &SifRecord) -> bool {
        self.thresholds().predict(record.score, record.label_match)
    }

    pub fn check_checkpoint(&self, checkpoint: &Checkpoint) -> Result<()> {
        let actual = checkpoint.fingerprint();
        if actual != self.checkpoint {
            return Err(Error::CheckpointMismatch {
                expected: self.checkpoint.clone(),
                actual,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// JSON has no infinities; they are stored as the strings "inf"/"-inf".
mod extended_float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("invalid threshold `{t}`"))),
        }
    }
}

/// Scores `samples`, tagging each record with `member`. Failures within the
/// budget are dropped and logged; beyond it the whole call fails.
pub fn score_with_budget(scorer: &Scorer<'_>, samples: &[Sample], member: bool) -> Result<(Vec<SifRecord>, Vec<usize>)> {
    let (ok, failed) = score_tagged(scorer, samples, member);
    check_budget(&failed, samples.len())?;
    Ok((ok, failed))
}

fn score_tagged(scorer: &Scorer<'_>, samples: &[Sample], member: bool) -> (Vec<SifRecord>, Vec<usize>) {
    let results = scorer.score_all(samples);
    let mut ok = Vec::with_capacity(samples.len());
    let mut failed = Vec::new();
    for (z, r) in samples.iter().zip(results) {
        match r {
            Ok(mut rec) => {
                rec.membership = Some(member);
                ok.push(rec);
            }
            Err(e) => {
                log::warn!("scoring sample {} failed: {e}", z.id);
                failed.push(z.id);
            }
        }
    }
    (ok, failed)
}

pub(crate) fn check_budget(failed: &[usize], total: usize) -> Result<()> {
    if failed.len() as f64 > FAILURE_BUDGET * total as f64 {
        return Err(Error::ScoringBudget {
            failed: failed.len(),
            total,
            ids: failed.to_vec(),
        });
    }
    Ok(())
}

/// Scores the fit subsets, fits thresholds on them and returns the attack
/// with the fit records.
pub fn fit_sif_attack(
    checkpoint: &Checkpoint,
    dataset: &LabeledDataset,
    split: &MiSplit,
    scorer_cfg: &ScorerConfig,
) -> Result<(AttackModel, FitRecords)> {
    let members = dataset.select(&split.members())?;
    let scorer = Scorer::new(scorer_cfg.clone(), checkpoint.target(), &members)?;
    let mem_fit = dataset.select(&split.mem_train)?;
    let non_fit = dataset.select(&split.nonmem_train)?;
    let total = mem_fit.len() + non_fit.len();
    let (m_recs, mut failed) = score_tagged(&scorer, &mem_fit, true);
    let (n_recs, n_failed) = score_tagged(&scorer, &non_fit, false);
    failed.extend(n_failed);
    check_budget(&failed, total)?;
    let records = FitRecords::new(m_recs, n_recs);
    let attack = attack_from_records(&records, scorer_cfg.clone(), checkpoint.fingerprint(), failed)?;
    Ok((attack, records))
}

/// Fits thresholds on precomputed records.
pub fn attack_from_records(
    records: &FitRecords,
    scorer: ScorerConfig,
    checkpoint: String,
    excluded_ids: Vec<usize>,
) -> Result<AttackModel> {
    let fit = set_thresholds(records)?;
    Ok(AttackModel {
        tau1: fit.thresholds.tau1,
        tau2: fit.thresholds.tau2,
        scorer,
        checkpoint,
        fit: FitSummary {
            train_balanced_accuracy: fit.balanced_accuracy,
            grid_size: GRID_SIZE,
            n_members: records.members.len(),
            n_nonmembers: records.nonmembers.len(),
            excluded_ids,
        },
    })
}

/// Scores `z` with the attack's scorer and applies the two-threshold rule.
/// `members` are the target's training samples (the Hessian source).
pub fn infer_membership(attack: &AttackModel, checkpoint: &Checkpoint, members: &[Sample], z: &Sample) -> Result<bool> {
    attack.check_checkpoint(checkpoint)?;
    let scorer = Scorer::new(attack.scorer.clone(), checkpoint.target(), members)?;
    Ok(attack.decide(&scorer.score(z)?))
}

/// Membership predictions for many samples; records are returned alongside.
pub fn infer_many(
    attack: &AttackModel,
    checkpoint: &Checkpoint,
    members: &[Sample],
    samples: &[Sample],
) -> Result<Vec<(SifRecord, bool)>> {
    attack.check_checkpoint(checkpoint)?;
    let scorer = Scorer::new(attack.scorer.clone(), checkpoint.target(), members)?;
    scorer
        .score_all(samples)
        .into_iter()
        .map(|r| r.map(|rec| (rec, attack.decide(&rec))))
        .collect()
}

/// Predictions of a fitted attack on the evaluation subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackEvaluation {
    pub report: EvalReport,
    pub member_records: Vec<SifRecord>,
    pub nonmember_records: Vec<SifRecord>,
}

impl AttackEvaluation {
    pub fn member_preds(&self, attack: &AttackModel) -> Vec<bool> {
        self.member_records.iter().map(|r| attack.decide(r)).collect()
    }

    pub fn nonmember_preds(&self, attack: &AttackModel) -> Vec<bool> {
        self.nonmember_records.iter().map(|r| attack.decide(r)).collect()
    }
}

/// Runs the attack over the held-out member and non-member subsets.
pub fn eval_attack(
    attack: &AttackModel,
    checkpoint: &Checkpoint,
    dataset: &LabeledDataset,
    split: &MiSplit,
) -> Result<AttackEvaluation> {
    let members = dataset.select(&split.members())?;
    let tag = |recs: Vec<(SifRecord, bool)>, member: bool| -> Vec<SifRecord> {
        recs.into_iter()
            .map(|(mut r, _)| {
                r.membership = Some(member);
                r
            })
            .collect()
    };
    let m = tag(infer_many(attack, checkpoint, &members, &dataset.select(&split.mem_test)?)?, true);
    let n = tag(infer_many(attack, checkpoint, &members, &dataset.select(&split.nonmem_test)?)?, false);
    let mp: Vec<bool> = m.iter().map(|r| attack.decide(r)).collect();
    let np: Vec<bool> = n.iter().map(|r| attack.decide(r)).collect();
    Ok(AttackEvaluation {
        report: EvalReport::from_predictions(attack.scorer.kind.name(), &mp, &np)?,
        member_records: m,
        nonmember_records: n,
    })
}
