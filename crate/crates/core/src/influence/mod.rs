//! Influence functions: exact and stochastic inverse-HVP solvers, the
//! self-influence scorers, pairwise influence and a retraining oracle.

mod hessian;
mod lissa;
mod loo;
mod records;
mod scores;

pub use hessian::{exact_hessian, inverse_hvp_exact, ExactHessian, DEFAULT_ORACLE_CAP};
pub use lissa::{
    estimate_hessian_norm, inverse_hvp_lissa, scale_is_safe, AugmentationSampler, FullBatchSampler, HessianSampler,
    LissaConfig, TrainingSampler, DEFAULT_DAMPING, DEFAULT_SCALE, SIF_MAX_DEPTH,
};
pub use loo::{fit_convex, loo_retrain_oracle, NewtonConfig, LOO_MAX_SAMPLES};
pub use records::{read_scores_csv, write_scores_csv, ScoreRow, SifRecord};
pub use scores::{
    ada_sif, avg_sif, ensemble_copies, ensemble_mean, pairwise_influence, sif, HessianSource, Scorer, ScorerConfig,
    ScorerKind, Solver,
};
