use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::SifRecord;

/// Candidate values per threshold.
pub const GRID_SIZE: usize = 1000;

/// Scores of the fit subsets, split by ground-truth membership.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitRecords {
    pub members: Vec<SifRecord>,
    pub nonmembers: Vec<SifRecord>,
}

impl FitRecords {
    pub fn new(members: Vec<SifRecord>, nonmembers: Vec<SifRecord>) -> Self {
        Self { members, nonmembers }
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InsufficientSamples {
                what: "threshold fitting (members)".into(),
                required: 1,
                available: 0,
            });
        }
        if self.nonmembers.is_empty() {
            return Err(Error::InsufficientSamples {
                what: "threshold fitting (non-members)".into(),
                required: 1,
                available: 0,
            });
        }
        for r in self.members.iter().chain(&self.nonmembers) {
            if !r.score.is_finite() {
                return Err(Error::NonFinite(format!("score of sample {}", r.sample_id)));
            }
        }
        Ok(())
    }
}

/// Two-sided membership rule: member iff `tau1 < score < tau2` and the
/// target predicts the true label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub tau1: f64,
    pub tau2: f64,
}

impl Thresholds {
    pub fn predict(&self, score: f64, label_match: bool) -> bool {
        label_match && self.tau1 < score && score < self.tau2
    }
}

/// Result of the grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdFit {
    pub thresholds: Thresholds,
    /// Balanced accuracy of the chosen pair on the fit records.
    pub balanced_accuracy: f64,
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|k| start + k as f64 * step).collect();
            v[n - 1] = stop;
            v
        }
    }
}

/// Candidate grids for `tau1` and `tau2`, each `GRID_SIZE` values wide and
/// centred on the smallest and largest member score.
///
/// When all member scores equal `v`, the spread is widened to
/// `eps = max(|v| * 1e-6, 1e-12)` and the grids become `[v - 1.5 eps,
/// v - 0.5 eps]` and `[v + 0.5 eps, v + 1.5 eps]`, so every pair brackets `v`.
pub fn threshold_grids(member_scores: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if member_scores.is_empty() {
        return Err(Error::InsufficientSamples {
            what: "threshold grid (members)".into(),
            required: 1,
            available: 0,
        });
    }
    let lo = member_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = member_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let delta = hi - lo;
    if delta > 0.0 {
        Ok((
            linspace(lo - delta / 2.0, lo + delta / 2.0, GRID_SIZE),
            linspace(hi - delta / 2.0, hi + delta / 2.0, GRID_SIZE),
        ))
    } else {
        let eps = (lo.abs() * 1e-6).max(1e-12);
        Ok((
            linspace(lo - 1.5 * eps, lo - 0.5 * eps, GRID_SIZE),
            linspace(lo + 0.5 * eps, lo + 1.5 * eps, GRID_SIZE),
        ))
    }
}

fn accuracy(correct: usize, total: usize) -> f64 {
    correct as f64 / total as f64
}

/// Grid search for the pair maximizing balanced accuracy on the fit records.
///
/// Pairs are visited with `tau1` ascending in the outer loop and `tau2`
/// ascending in the inner loop; a pair replaces the incumbent only on a
/// strictly higher accuracy, so the earliest maximum wins. Pairs with
/// `tau1 >= tau2` are skipped. The incumbent starts at accuracy 0 with
/// `(-inf, +inf)`.
///
/// Each pair is evaluated from prefix counts over sorted scores.
pub fn set_thresholds(fit: &FitRecords) -> Result<ThresholdFit> {
    fit.validate()?;
    let member_scores: Vec<f64> = fit.members.iter().map(|r| r.score).collect();
    let (grid1, grid2) = threshold_grids(&member_scores)?;
    let sorted = |recs: &[SifRecord]| {
        let mut v: Vec<f64> = recs.iter().filter(|r| r.label_match).map(|r| r.score).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let mem = sorted(&fit.members);
    let non = sorted(&fit.nonmembers);
    let n1 = fit.members.len();
    let n2 = fit.nonmembers.len();
    // #{s <= t} and #{s < t}
    let at_or_below = |v: &[f64], t: f64| v.partition_point(|&s| s <= t);
    let below = |v: &[f64], t: f64| v.partition_point(|&s| s < t);
    let mem_hi: Vec<usize> = grid2.iter().map(|&t| below(&mem, t)).collect();
    let non_hi: Vec<usize> = grid2.iter().map(|&t| below(&non, t)).collect();

    let rows: Vec<(f64, usize)> = grid1
        .par_iter()
        .map(|&t1| {
            let mem_lo = at_or_below(&mem, t1);
            let non_lo = at_or_below(&non, t1);
            let mut best = (0.0, usize::MAX);
            for (j, &t2) in grid2.iter().enumerate() {
                if t1 >= t2 {
                    continue;
                }
                let tp = mem_hi[j].saturating_sub(mem_lo);
                let fp = non_hi[j].saturating_sub(non_lo);
                let acc = accuracy(tp + (n2 - fp), n1 + n2);
                if acc > best.0 {
                    best = (acc, j);
                }
            }
            best
        })
        .collect();

    let mut fit_out = ThresholdFit {
        thresholds: Thresholds {
            tau1: f64::NEG_INFINITY,
            tau2: f64::INFINITY,
        },
        balanced_accuracy: 0.0,
    };
    for (i, &(acc, j)) in rows.iter().enumerate() {
        if j != usize::MAX && acc > fit_out.balanced_accuracy {
            fit_out = ThresholdFit {
                thresholds: Thresholds {
                    tau1: grid1[i],
                    tau2: grid2[j],
                },
                balanced_accuracy: acc,
            };
        }
    }
    Ok(fit_out)
}

/// Direct scan of all grid pairs, re-evaluating the rule on every record.
/// Same grids, visiting order and tie-breaking as [`set_thresholds`];
/// `O(GRID_SIZE^2 * n)`, so only suitable as a reference.
pub fn set_thresholds_reference(fit: &FitRecords) -> Result<ThresholdFit> {
    fit.validate()?;
    let member_scores: Vec<f64> = fit.members.iter().map(|r| r.score).collect();
    let (grid1, grid2) = threshold_grids(&member_scores)?;
    let ms: Vec<f64> = fit.members.iter().map(|r| r.score).collect();
    let mm: Vec<bool> = fit.members.iter().map(|r| r.label_match).collect();
    let ns: Vec<f64> = fit.nonmembers.iter().map(|r| r.score).collect();
    let nm: Vec<bool> = fit.nonmembers.iter().map(|r| r.label_match).collect();
    let total = ms.len() + ns.len();
    let mut best = ThresholdFit {
        thresholds: Thresholds {
            tau1: f64::NEG_INFINITY,
            tau2: f64::INFINITY,
        },
        balanced_accuracy: 0.0,
    };
    for &t1 in &grid1 {
        for &t2 in &grid2 {
            if t1 >= t2 {
                continue;
            }
            let mut correct = 0usize;
            for (&s, &m) in ms.iter().zip(&mm) {
                correct += usize::from((t1 < s) & (s < t2) & m);
            }
            for (&s, &m) in ns.iter().zip(&nm) {
                correct += usize::from(!((t1 < s) & (s < t2) & m));
            }
            let acc = accuracy(correct, total);
            if acc > best.balanced_accuracy {
                best = ThresholdFit {
                    thresholds: Thresholds { tau1: t1, tau2: t2 },
                    balanced_accuracy: acc,
                };
            }
        }
    }
    Ok(best)
}
