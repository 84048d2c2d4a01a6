//! Attention encoder-decoder from sparse sensor readings to a full wave field.
//!
//! Sensor values paired with encoded positions are cross-attended by a learned
//! latent array, refined by self-attention blocks, and the resulting latent
//! state is queried at arbitrary encoded positions by a cross-attention decoder.

mod encoding;
mod net;
pub mod ops;
mod train;

use core::fmt::Debug;

use num_traits::{Float, FromPrimitive};
use thiserror::Error;

pub use encoding::{encode_positions, EncodedPositions};
pub use net::{BlockInfo, DecoderQueries, LatentState, Model, ParamLayout};
pub use train::{
    adam_step, loss, reconstruct_field, sample_queries, split_frames, train, AdamState, FrameBatch, Reconstructor,
    TrainData, TrainOutcome, TrainSchedule,
};

/// Floating-point type the network is evaluated in.
pub trait Scalar: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {}
impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    BadConfig(&'static str),
    #[error("no-observations: at least one sensor reading is required")]
    NoObservations,
    #[error("empty input")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("point ({lon}, {lat}) is outside the grid")]
    OffGrid { lon: f64, lat: f64 },
    #[error("non-finite gradient in parameter block {0}")]
    NonFiniteGradient(alloc::string::String),
    #[error("training diverged at step {0}")]
    Diverged(usize),
    #[error("no training frames")]
    NoFrames,
    #[error("no ocean cells")]
    NoOcean,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ModelConfig {
    pub num_freq_bands: usize,
    /// Highest frequency in cycles per normalized half-domain.
    pub max_freq: u32,
    pub latent_rows: usize,
    pub latent_dim: usize,
    pub num_encoder_blocks: usize,
    pub num_heads: usize,
    pub mlp_hidden: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_freq_bands: 32,
            max_freq: 64,
            latent_rows: 32,
            latent_dim: 64,
            num_encoder_blocks: 2,
            num_heads: 4,
            mlp_hidden: 128,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_freq_bands == 0
            || self.max_freq == 0
            || self.latent_rows == 0
            || self.latent_dim == 0
            || self.num_heads == 0
            || self.mlp_hidden == 0
        {
            return Err(ModelError::BadConfig("counts must be >= 1"));
        }
        if !self.latent_dim.is_multiple_of(self.num_heads) {
            return Err(ModelError::BadConfig("latent_dim must be divisible by num_heads"));
        }
        Ok(())
    }

    /// Width of one encoded position: 3 coordinates × (raw, sin, cos per band).
    pub fn encoding_dim(&self) -> usize {
        3 * (2 * self.num_freq_bands + 1)
    }
}
