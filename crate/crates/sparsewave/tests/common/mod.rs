#![allow(dead_code)]

use std::path::Path;

use sparsewave::config::{Epicenter, EvalSettings};
use sparsewave::core::geo::GridSpec;
use sparsewave::core::model::{ModelConfig, TrainSchedule};
use sparsewave::ExperimentConfig;

/// Coarse, short version of the desk config that runs every stage in seconds.
pub fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::desk();
    c.grid = GridSpec::new(130.0, 160.0, 20.0, 50.0, 40, 40).unwrap();
    c.out_interval_s = 300.0;
    c.train_epicenters = vec![Epicenter::new("T1", 140.0, 30.0), Epicenter::new("T4", 150.0, 40.0)];
    c.test_epicenters = vec![Epicenter::new("E1", 141.0, 31.0)];
    c.virtual_pairs = vec![("S01".into(), "S05".into()), ("S04".into(), "S06".into())];
    c.model = ModelConfig {
        num_freq_bands: 6,
        max_freq: 16,
        latent_rows: 8,
        latent_dim: 16,
        num_encoder_blocks: 1,
        num_heads: 2,
        mlp_hidden: 32,
        seed: 0,
    };
    c.schedule = TrainSchedule { steps: 20, batch_frames: 2, queries_per_frame: 64, ..c.schedule };
    c.eval = EvalSettings { median_kernel: 3, render_frames: vec![0, 24, 48], ..EvalSettings::default() };
    c
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
