use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sif_core::attacks::{
    attack_from_records, blackbox_confidence_attack, gap_predictions, AttackModel, FitRecords, FAILURE_BUDGET,
};
use sif_core::data::MiSplit;
use sif_core::influence::{read_scores_csv, write_scores_csv, ScoreRow, Scorer, ScorerConfig, ScorerKind, SifRecord};
use sif_core::metrics::{histogram_export, write_histogram_csv, ComparisonReport, EvalReport};
use sif_core::models::{evaluate_accuracy, train_target, Checkpoint};
use sif_core::Sample;

use crate::config::Experiment;
use crate::error::CliError;

/// Rows scored between two flushes of a score file.
pub const PROGRESS_EVERY: usize = 100;
pub const DEFAULT_BINS: usize = 50;
const SCORE_HEADER: [&str; 9] = ["sample_id", "score", "label_match", "membership", "scorer", "r", "d", "lambda", "seed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subset {
    Fit,
    Eval,
    All,
}

impl Subset {
    fn name(self) -> &'static str {
        match self {
            Subset::Fit => "fit",
            Subset::Eval => "eval",
            Subset::All => "all",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub fingerprint: String,
    pub params: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: f64,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(sif_core::Error::from)?;
    write_atomic(path, text.as_bytes())
}

pub fn write_resolved(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    write_atomic(&out.join("resolved_config.toml"), exp.config.to_toml()?.as_bytes())
}

pub fn default_checkpoint(out: &Path) -> PathBuf {
    out.join("checkpoint.sifc")
}

pub fn train(exp: &Experiment, out: &Path) -> Result<TrainMetrics, CliError> {
    write_resolved(exp, out)?;
    let cfg = exp.config.train_config();
    let ckpt = match train_target(exp.model(), &exp.dataset, &exp.split, &cfg) {
        Ok(c) => c,
        Err(e @ sif_core::Error::TrainingDiverged { .. }) => return Err(CliError::Divergence(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    ckpt.save(&default_checkpoint(out))?;
    write_json(&out.join("split.json"), &exp.split)?;
    for entry in fs::read_dir(out)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("scores_") {
            log::info!("removing stale {}", path.display());
            fs::remove_file(&path)?;
        }
    }
    let nonmembers = exp.dataset.select(&exp.split.nonmembers())?;
    let meta = ckpt.metadata();
    let metrics = TrainMetrics {
        fingerprint: ckpt.fingerprint(),
        params: ckpt.params().len(),
        best_epoch: meta.best_epoch,
        epochs_run: meta.epochs_run,
        train_accuracy: meta.train_accuracy,
        val_accuracy: meta.val_accuracy,
        test_accuracy: evaluate_accuracy(ckpt.network(), ckpt.params(), &nonmembers)?,
    };
    write_json(&out.join("metrics.json"), &metrics)?;
    log::info!(
        "trained {} params: train acc {:.4}, test acc {:.4}, best epoch {}",
        metrics.params,
        metrics.train_accuracy,
        metrics.test_accuracy,
        metrics.best_epoch
    );
    Ok(metrics)
}

/// Loads a checkpoint and checks that it belongs to this experiment.
pub fn load_checkpoint(exp: &Experiment, path: &Path) -> Result<Checkpoint, CliError> {
    let ckpt = Checkpoint::load(path).map_err(|e| CliError::Config(format!("checkpoint {}: {e}", path.display())))?;
    if ckpt.spec() != exp.model() {
        return Err(CliError::Config(format!(
            "checkpoint {} was trained for a different model spec",
            path.display()
        )));
    }
    let manifest = path.with_file_name("split.json");
    if manifest.exists() {
        let stored: MiSplit = serde_json::from_reader(BufReader::new(File::open(&manifest)?)).map_err(sif_core::Error::from)?;
        if stored != exp.split {
            return Err(CliError::Config(format!(
                "split manifest {} does not match the configured split",
                manifest.display()
            )));
        }
    }
    Ok(ckpt)
}

/// Samples of a subset tagged with their ground-truth membership, sorted by
/// id; `limit` keeps the first ids only.
pub fn subset_samples(exp: &Experiment, subset: Subset, limit: Option<usize>) -> Result<Vec<(Sample, bool)>, CliError> {
    let s = &exp.split;
    let groups: Vec<(&[usize], bool)> = match subset {
        Subset::Fit => vec![(&s.mem_train, true), (&s.nonmem_train, false)],
        Subset::Eval => vec![(&s.mem_test, true), (&s.nonmem_test, false)],
        Subset::All => vec![
            (&s.mem_train, true),
            (&s.nonmem_train, false),
            (&s.mem_test, true),
            (&s.nonmem_test, false),
        ],
    };
    let mut tagged: Vec<(usize, bool)> = groups
        .into_iter()
        .flat_map(|(ids, m)| ids.iter().map(move |&id| (id, m)))
        .collect();
    tagged.sort_unstable();
    if let Some(n) = limit {
        tagged.truncate(n);
    }
    tagged
        .into_iter()
        .map(|(id, m)| Ok((exp.dataset.get(id).expect("split ids are valid").clone(), m)))
        .collect()
}

pub fn scores_path(out: &Path, kind: ScorerKind, subset: Subset) -> PathBuf {
    out.join(format!("scores_{}_{}.csv", kind.name(), subset.name()))
}

fn write_score_file(path: &Path, rows: &BTreeMap<usize, ScoreRow>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    if rows.is_empty() {
        writeln!(buf, "{}", SCORE_HEADER.join(","))?;
    } else {
        let rows: Vec<ScoreRow> = rows.values().cloned().collect();
        write_scores_csv(&mut buf, &rows)?;
    }
    write_atomic(path, &buf)
}

/// Identity of a score file's producer, stored beside it.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct ScoreProvenance {
    checkpoint: String,
    scorer: ScorerConfig,
}

fn provenance_path(scores: &Path) -> PathBuf {
    scores.with_extension("meta.json")
}

/// Scores `samples` into `path`, skipping ids the file already holds, and
/// returns the records of `samples` in id order. The file is rewritten,
/// sorted by id, after every [`PROGRESS_EVERY`] samples.
pub fn score_resumable(
    exp: &Experiment,
    ckpt: &Checkpoint,
    cfg: &ScorerConfig,
    samples: &[(Sample, bool)],
    path: &Path,
) -> Result<Vec<SifRecord>, CliError> {
    let provenance = ScoreProvenance {
        checkpoint: ckpt.fingerprint(),
        scorer: cfg.clone(),
    };
    let meta_path = provenance_path(path);
    let mut rows: BTreeMap<usize, ScoreRow> = BTreeMap::new();
    if path.exists() {
        let stored: Option<ScoreProvenance> = File::open(&meta_path)
            .ok()
            .and_then(|f| serde_json::from_reader(BufReader::new(f)).ok());
        if stored.as_ref() != Some(&provenance) {
            return Err(CliError::Config(format!(
                "{} holds scores from a different checkpoint or scorer configuration; remove it to rescore",
                path.display()
            )));
        }
        for row in read_scores_csv(BufReader::new(File::open(path)?))? {
            rows.insert(row.sample_id, row);
        }
        log::info!("resuming {}: {} rows already scored", path.display(), rows.len());
    } else {
        write_json(&meta_path, &provenance)?;
    }
    let pending: Vec<&(Sample, bool)> = samples.iter().filter(|(z, _)| !rows.contains_key(&z.id)).collect();
    let members = exp.dataset.select(&exp.split.members())?;
    let scorer = Scorer::new(cfg.clone(), ckpt.target(), &members)?;
    let mut failed = Vec::new();
    let total = samples.len();
    let mut done = total - pending.len();
    if pending.is_empty() {
        write_score_file(path, &rows)?;
    }
    for chunk in pending.chunks(PROGRESS_EVERY) {
        let batch: Vec<Sample> = chunk.iter().map(|(z, _)| z.clone()).collect();
        for ((z, member), result) in chunk.iter().zip(scorer.score_all(&batch)) {
            match result {
                Ok(mut rec) => {
                    rec.membership = Some(*member);
                    rows.insert(z.id, ScoreRow::new(&rec, cfg));
                }
                Err(e) => {
                    log::warn!("scoring sample {} failed: {e}", z.id);
                    failed.push(z.id);
                }
            }
        }
        done += chunk.len();
        write_score_file(path, &rows)?;
        log::info!("{}: {done}/{total} samples processed", path.display());
    }
    if failed.len() as f64 > FAILURE_BUDGET * total as f64 {
        return Err(CliError::ScorerBudget(format!(
            "{} of {total} samples failed (ids {failed:?})",
            failed.len()
        )));
    }
    Ok(samples
        .iter()
        .filter_map(|(z, _)| rows.get(&z.id).map(ScoreRow::record))
        .collect())
}

pub fn score(
    exp: &Experiment,
    ckpt: &Checkpoint,
    kind: ScorerKind,
    subset: Subset,
    limit: Option<usize>,
    out: &Path,
) -> Result<PathBuf, CliError> {
    write_resolved(exp, out)?;
    let cfg = exp.config.scorer_config(kind);
    let samples = subset_samples(exp, subset, limit)?;
    let path = scores_path(out, kind, subset);
    score_resumable(exp, ckpt, &cfg, &samples, &path)?;
    Ok(path)
}

fn split_by_membership(records: Vec<SifRecord>) -> FitRecords {
    let (members, nonmembers) = records.into_iter().partition(|r| r.membership == Some(true));
    FitRecords::new(members, nonmembers)
}

struct SifOutcome {
    attack: AttackModel,
    report: EvalReport,
    records: Vec<SifRecord>,
    predictions: Vec<(usize, bool, bool)>,
}

fn run_sif(exp: &Experiment, ckpt: &Checkpoint, kind: ScorerKind, out: &Path) -> Result<SifOutcome, CliError> {
    let cfg = exp.config.scorer_config(kind);
    let fit_samples = subset_samples(exp, Subset::Fit, None)?;
    let fit = score_resumable(exp, ckpt, &cfg, &fit_samples, &scores_path(out, kind, Subset::Fit))?;
    let excluded: Vec<usize> = fit_samples
        .iter()
        .map(|(z, _)| z.id)
        .filter(|id| !fit.iter().any(|r| r.sample_id == *id))
        .collect();
    let fit_records = split_by_membership(fit.clone());
    let attack = attack_from_records(&fit_records, cfg.clone(), ckpt.fingerprint(), excluded)
        .map_err(|e| CliError::Fit(e.to_string()))?;
    let eval_samples = subset_samples(exp, Subset::Eval, None)?;
    let eval = score_resumable(exp, ckpt, &cfg, &eval_samples, &scores_path(out, kind, Subset::Eval))?;
    let eval_records = split_by_membership(eval.clone());
    let mp: Vec<bool> = eval_records.members.iter().map(|r| attack.decide(r)).collect();
    let np: Vec<bool> = eval_records.nonmembers.iter().map(|r| attack.decide(r)).collect();
    let report = EvalReport::from_predictions(kind.name(), &mp, &np).map_err(|e| CliError::Fit(e.to_string()))?;
    let predictions = eval
        .iter()
        .map(|r| (r.sample_id, r.membership == Some(true), attack.decide(r)))
        .collect();
    let mut records = fit;
    records.extend(eval);
    Ok(SifOutcome {
        attack,
        report,
        records,
        predictions,
    })
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    attack: &'a str,
    sample_id: usize,
    member: bool,
    predicted_member: bool,
}

pub fn attack(exp: &Experiment, ckpt: &Checkpoint, kind: ScorerKind, bins: usize, out: &Path) -> Result<ComparisonReport, CliError> {
    write_resolved(exp, out)?;
    let primary = run_sif(exp, ckpt, kind, out)?;
    write_json(&out.join(format!("attack_{}.json", kind.name())), &primary.attack)?;
    let mut predictions: Vec<(String, usize, bool, bool)> = Vec::new();

    let target = ckpt.target();
    let mem_test = exp.dataset.select(&exp.split.mem_test)?;
    let non_test = exp.dataset.select(&exp.split.nonmem_test)?;
    let gm = gap_predictions(&target, &mem_test)?;
    let gn = gap_predictions(&target, &non_test)?;
    let gap = EvalReport::from_predictions("gap", &gm, &gn)?;
    for (z, p) in mem_test.iter().zip(&gm) {
        predictions.push(("gap".into(), z.id, true, *p));
    }
    for (z, p) in non_test.iter().zip(&gn) {
        predictions.push(("gap".into(), z.id, false, *p));
    }

    let bb = blackbox_confidence_attack(ckpt, &exp.dataset, &exp.split).map_err(|e| CliError::Fit(e.to_string()))?;
    let blackbox = EvalReport::from_predictions("blackbox", &bb.member_preds, &bb.nonmember_preds)?;
    for (z, p) in mem_test.iter().zip(&bb.member_preds) {
        predictions.push(("blackbox".into(), z.id, true, *p));
    }
    for (z, p) in non_test.iter().zip(&bb.nonmember_preds) {
        predictions.push(("blackbox".into(), z.id, false, *p));
    }

    let mut rows = vec![gap, blackbox, primary.report.clone()];
    for &(id, m, p) in &primary.predictions {
        predictions.push((kind.name().into(), id, m, p));
    }
    let family = &ckpt.metadata().augmentation;
    if !family.is_identity() && kind != ScorerKind::AdaSif {
        let ada = run_sif(exp, ckpt, ScorerKind::AdaSif, out)?;
        write_json(&out.join("attack_adasif.json"), &ada.attack)?;
        for &(id, m, p) in &ada.predictions {
            predictions.push(("adasif".into(), id, m, p));
        }
        rows.push(ada.report);
    }
    let report = ComparisonReport { rows };
    write_json(&out.join("comparison.json"), &report)?;
    write_atomic(&out.join("comparison.txt"), report.to_table().as_bytes())?;

    let hist = histogram_export(&primary.records, bins)?;
    let mut buf = Vec::new();
    write_histogram_csv(&mut buf, &hist)?;
    write_atomic(&out.join("histogram.csv"), &buf)?;

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(out.join("predictions.csv"))?));
    for (attack, sample_id, member, predicted_member) in &predictions {
        w.serialize(PredictionRow {
            attack,
            sample_id: *sample_id,
            member: *member,
            predicted_member: *predicted_member,
        })
        .map_err(sif_core::Error::from)?;
    }
    w.flush()?;
    Ok(report)
}

/// Re-renders the comparison table and histogram from stored artifacts.
pub fn report(out: &Path, kind: ScorerKind, bins: usize) -> Result<String, CliError> {
    let cmp_path = out.join("comparison.json");
    let report: ComparisonReport = serde_json::from_reader(BufReader::new(
        File::open(&cmp_path).map_err(|e| CliError::Config(format!("{}: {e}", cmp_path.display())))?,
    ))
    .map_err(sif_core::Error::from)?;
    let table = report.to_table();
    write_atomic(&out.join("report.txt"), table.as_bytes())?;
    let mut records = Vec::new();
    for subset in [Subset::Fit, Subset::Eval] {
        let p = scores_path(out, kind, subset);
        if p.exists() {
            records.extend(read_scores_csv(BufReader::new(File::open(&p)?))?.iter().map(ScoreRow::record));
        }
    }
    if !records.is_empty() {
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &histogram_export(&records, bins)?)?;
        write_atomic(&out.join("histogram.csv"), &buf)?;
    }
    Ok(table)
}
