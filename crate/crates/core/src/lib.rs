//! Membership inference via self-influence functions.
//!
//! The crate covers the whole pipeline: datasets and membership splits,
//! small differentiable target models with exact Hessian-vector products,
//! influence estimation (exact and LiSSA), the SIF / adaSIF / avgSIF
//! scorers, threshold attacks with baselines, and evaluation metrics.

mod autodiff;
pub mod attacks;
pub mod data;
pub mod error;
pub mod influence;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Batch, Layout, ParamVector, Sample, Tensor};
