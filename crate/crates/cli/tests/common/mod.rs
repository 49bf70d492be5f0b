//! Small synthetic datasets for fast pipeline tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cellnet::config::PipelineConfig;
use cellnet::synth::{generate, write_dataset};
use cellnet_core::ml::{SfsConfig, SvmParams};

/// Six images per grade, one patch each, short selection and a 2x2 grid.
pub fn small_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default().with_seed(seed);
    cfg.synth.images_per_class = 6;
    cfg.synth.patch_grid = [1, 1];
    cfg.cv.grid = SvmParams::grid(&[1.0, 10.0], &[0.01, 0.1]);
    cfg.cv.sfs = Some(SfsConfig {
        max_features: 4,
        patience: 2,
        ..SfsConfig::default()
    });
    cfg
}

/// Writes the dataset of `cfg` under `root/data`; returns the manifest path.
pub fn write_small_dataset(root: &Path, cfg: &PipelineConfig) -> PathBuf {
    let ds = generate(&cfg.synth).unwrap();
    let data = root.join("data");
    write_dataset(&ds, &data).unwrap();
    data.join("manifest.json")
}
