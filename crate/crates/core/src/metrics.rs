//! Attack evaluation: balanced accuracy, per-class rates and score
//! histograms.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::SifRecord;

/// Pooled accuracy over both classes:
/// `(sum(member_preds) + sum(1 - nonmember_preds)) / (N1 + N2)`.
pub fn balanced_accuracy(member_preds: &[bool], nonmember_preds: &[bool]) -> Result<f64> {
    if member_preds.is_empty() || nonmember_preds.is_empty() {
        return Err(Error::InvalidArgument(
            "balanced accuracy needs nonempty member and non-member predictions".into(),
        ));
    }
    let hits = member_preds.iter().filter(|&&p| p).count() + nonmember_preds.iter().filter(|&&p| !p).count();
    Ok(hits as f64 / (member_preds.len() + nonmember_preds.len()) as f64)
}

/// Balanced accuracy of the label-match rule given model accuracy on members
/// and on non-members.
pub fn gap_balanced_accuracy(member_accuracy: f64, nonmember_accuracy: f64) -> f64 {
    0.5 + 0.5 * (member_accuracy - nonmember_accuracy)
}

/// Membership confusion matrix; "positive" means "member".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(member_preds: &[bool], nonmember_preds: &[bool]) -> Self {
        let tp = member_preds.iter().filter(|&&p| p).count();
        let fp = nonmember_preds.iter().filter(|&&p| p).count();
        Self {
            tp,
            fn_: member_preds.len() - tp,
            fp,
            tn: nonmember_preds.len() - fp,
        }
    }

    pub fn members(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn nonmembers(&self) -> usize {
        self.fp + self.tn
    }

    fn ratio(num: usize, den: usize) -> Option<f64> {
        (den > 0).then(|| num as f64 / den as f64)
    }
}

/// Per-class and pooled rates of one attack, all derived from a single
/// confusion matrix. Precision is `None` when the class is never predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub attack: String,
    pub n_members: usize,
    pub n_nonmembers: usize,
    pub confusion: Confusion,
    pub member_accuracy: f64,
    pub nonmember_accuracy: f64,
    pub member_precision: Option<f64>,
    pub member_recall: f64,
    pub nonmember_precision: Option<f64>,
    pub nonmember_recall: f64,
    pub balanced_accuracy: f64,
}

impl EvalReport {
    pub fn from_predictions(attack: impl Into<String>, member_preds: &[bool], nonmember_preds: &[bool]) -> Result<Self> {
        balanced_accuracy(member_preds, nonmember_preds)?;
        Ok(Self::from_confusion(
            attack,
            Confusion::from_predictions(member_preds, nonmember_preds),
        ))
    }

    pub fn from_confusion(attack: impl Into<String>, c: Confusion) -> Self {
        let n1 = c.members();
        let n2 = c.nonmembers();
        let member_recall = Confusion::ratio(c.tp, n1).unwrap_or(0.0);
        let nonmember_recall = Confusion::ratio(c.tn, n2).unwrap_or(0.0);
        Self {
            attack: attack.into(),
            n_members: n1,
            n_nonmembers: n2,
            confusion: c,
            member_accuracy: member_recall,
            nonmember_accuracy: nonmember_recall,
            member_precision: Confusion::ratio(c.tp, c.tp + c.fp),
            member_recall,
            nonmember_precision: Confusion::ratio(c.tn, c.tn + c.fn_),
            nonmember_recall,
            balanced_accuracy: Confusion::ratio(c.tp + c.tn, n1 + n2).unwrap_or(0.0),
        }
    }

    /// Recomputes every rate from the stored confusion matrix.
    pub fn recomputed(&self) -> Self {
        Self::from_confusion(self.attack.clone(), self.confusion)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Table of several attacks evaluated on the same split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<EvalReport>,
}

impl ComparisonReport {
    pub fn row(&self, attack: &str) -> Option<&EvalReport> {
        self.rows.iter().find(|r| r.attack == attack)
    }

    /// Fixed-width text table with rates rounded to three decimals.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<10} {:>8} {:>8} {:>8}\n", "attack", "member", "non-mem", "balanced");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<10} {:>8.3} {:>8.3} {:>8.3}\n",
                r.attack, r.member_accuracy, r.nonmember_accuracy, r.balanced_accuracy
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub member_count: usize,
    pub nonmember_count: usize,
}

/// Member and non-member score histograms over one shared range. Records
/// without ground truth are ignored. The last bin is closed on the right.
pub fn histogram_export(records: &[SifRecord], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let labelled: Vec<(f64, bool)> = records
        .iter()
        .filter_map(|r| r.membership.map(|m| (r.score, m)))
        .collect();
    if labelled.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::NonFinite("histogram score".into()));
    }
    if labelled.is_empty() {
        return Ok(Vec::new());
    }
    let mut lo = labelled.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut hi = labelled.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            bin_left: lo + b as f64 * width,
            bin_right: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width },
            member_count: 0,
            nonmember_count: 0,
        })
        .collect();
    for (s, member) in labelled {
        let b = (((s - lo) / width) as usize).min(bins - 1);
        if member {
            out[b].member_count += 1;
        } else {
            out[b].nonmember_count += 1;
        }
    }
    Ok(out)
}

pub fn write_histogram_csv<W: Write>(w: W, bins: &[HistogramBin]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for b in bins {
        out.serialize(b)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn preds(ones: usize, total: usize) -> Vec<bool> {
        (0..total).map(|i| i < ones).collect()
    }

    #[test]
    fn extreme_predictors() {
        assert_eq!(balanced_accuracy(&[true; 5], &[false; 5]).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[true; 5], &[true; 5]).unwrap(), 0.5);
        assert!(balanced_accuracy(&[], &[true]).is_err());
    }

    #[test]
    fn hand_confusion_matrix() {
        let r = EvalReport::from_predictions("x", &[true, true, false, true], &[false, true, false, false]).unwrap();
        assert_eq!(r.member_precision, Some(0.75));
        assert_eq!(r.member_recall, 0.75);
        assert_eq!(r.balanced_accuracy, 6.0 / 8.0);
        assert_eq!(r.nonmember_precision, Some(0.75));
    }

    #[test]
    fn perfect_predictor_rates() {
        let r = EvalReport::from_predictions("p", &[true; 3], &[false; 3]).unwrap();
        for v in [
            r.member_accuracy,
            r.nonmember_accuracy,
            r.member_precision.unwrap(),
            r.member_recall,
            r.nonmember_precision.unwrap(),
            r.nonmember_recall,
        ] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn undefined_precision_is_null() {
        let r = EvalReport::from_predictions("none", &[false; 4], &[false; 4]).unwrap();
        assert_eq!(r.member_precision, None);
        assert!(r.to_json().unwrap().contains("\"member_precision\": null"));
    }

    #[test]
    fn precision_from_table_style_rates() {
        let r = EvalReport::from_predictions("sif", &preds(1000, 1000), &preds(20, 1000)).unwrap();
        assert!((r.member_precision.unwrap() - 0.98).abs() < 0.005);
        assert!((r.balanced_accuracy - 0.990).abs() < 1e-12);
    }

    #[test]
    fn histogram_single_record_and_conservation() {
        let one = [SifRecord {
            sample_id: 0,
            score: -2.0,
            label_match: true,
            membership: Some(true),
        }];
        let h = histogram_export(&one, 4).unwrap();
        assert_eq!(h.iter().map(|b| b.member_count).sum::<usize>(), 1);
        assert_eq!(h.iter().filter(|b| b.member_count == 1).count(), 1);

        let recs: Vec<SifRecord> = (0..37)
            .map(|i| SifRecord {
                sample_id: i,
                score: (i as f64 * 0.37).sin(),
                label_match: true,
                membership: Some(i % 3 == 0),
            })
            .collect();
        let h = histogram_export(&recs, 7).unwrap();
        assert_eq!(h.iter().map(|b| b.member_count).sum::<usize>(), 13);
        assert_eq!(h.iter().map(|b| b.nonmember_count).sum::<usize>(), 24);
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &h).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("bin_left,bin_right,member_count,nonmember_count"));
    }

    proptest! {
        #[test]
        fn pooled_equals_mean_of_class_accuracies(
            n in 1usize..200, m in proptest::collection::vec(any::<bool>(), 200), k in proptest::collection::vec(any::<bool>(), 200),
        ) {
            let mp = &m[..n];
            let np = &k[..n];
            let pooled = balanced_accuracy(mp, np).unwrap();
            let r = EvalReport::from_predictions("p", mp, np).unwrap();
            let mean = 0.5 * (r.member_accuracy + r.nonmember_accuracy);
            prop_assert!((pooled - mean).abs() < 1e-12);
        }

        #[test]
        fn report_survives_json_and_recomputation(
            m in proptest::collection::vec(any::<bool>(), 1..50), k in proptest::collection::vec(any::<bool>(), 1..50),
        ) {
            let r = EvalReport::from_predictions("p", &m, &k).unwrap();
            let back: EvalReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert_eq!(back.recomputed(), r);
        }

        #[test]
        fn swapped_roles_are_symmetric_about_half(
            m in proptest::collection::vec(any::<bool>(), 30), k in proptest::collection::vec(any::<bool>(), 30),
        ) {
            let a = balanced_accuracy(&m, &k).unwrap();
            let flip = |v: &[bool]| v.iter().map(|b| !b).collect::<Vec<_>>();
            let b = balanced_accuracy(&flip(&k), &flip(&m)).unwrap();
            // the complementary attack scores 1 - a on the swapped roles
            let c = balanced_accuracy(&k, &m).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((a + c - 1.0).abs() < 1e-12);
        }
    }
}
