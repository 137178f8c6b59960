use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ScorerConfig;
use crate::error::Result;

/// One scored sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SifRecord {
    pub sample_id: usize,
    pub score: f64,
    /// Whether the target model predicts the sample's label.
    pub label_match: bool,
    /// Ground truth when known.
    pub membership: Option<bool>,
}

/// A score-dump row: the record plus the scorer settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub sample_id: usize,
    pub score: f64,
    pub label_match: bool,
    pub membership: Option<bool>,
    pub scorer: String,
    pub r: usize,
    pub d: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl ScoreRow {
    pub fn new(record: &SifRecord, cfg: &ScorerConfig) -> Self {
        Self {
            sample_id: record.sample_id,
            score: record.score,
            label_match: record.label_match,
            membership: record.membership,
            scorer: cfg.kind.name().to_string(),
            r: cfg.lissa.repeats,
            d: cfg.lissa.depth,
            lambda: cfg.lissa.damping,
            seed: cfg.lissa.seed,
        }
    }

    pub fn record(&self) -> SifRecord {
        SifRecord {
            sample_id: self.sample_id,
            score: self.score,
            label_match: self.label_match,
            membership: self.membership,
        }
    }
}

pub fn write_scores_csv<W: Write>(w: W, rows: &[ScoreRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_scores_csv<R: Read>(r: R) -> Result<Vec<ScoreRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let rows = rd.deserialize().collect::<std::result::Result<Vec<ScoreRow>, _>>()?;
    Ok(rows)
}
