//! Experiment pipeline around `sparsewave-core`: configuration, file formats
//! and the simulate / train / reconstruct / compare / render stages.

// `!(x > 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::{PipelineError, Stage};
pub use sparsewave_core as core;
