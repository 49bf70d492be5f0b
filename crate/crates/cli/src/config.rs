//! Pipeline configuration file (TOML or JSON, chosen by extension).

use std::path::Path;

use anyhow::{Context, Result};
use cellnet_core::aggregation::Scenario;
use cellnet_core::ml::CvConfig;
use cellnet_core::{BuildConfig, FeatureConfig, MeasureConfig};
use serde::{Deserialize, Serialize};

use crate::synth::SynthConfig;

/// Unit of the grade-wise t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestUnit {
    /// One mean value per image.
    #[default]
    ImageMeans,
    /// Every node of every image of a grade.
    PooledNodes,
}

/// Everything the pipeline and the subcommands need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Graph construction.
    pub build: BuildConfig,
    /// Per-node measures.
    pub measures: MeasureConfig,
    /// Histogram binning.
    pub features: FeatureConfig,
    /// Model selection and cross-validation.
    pub cv: CvConfig,
    /// Synthetic data generator.
    pub synth: SynthConfig,
    /// Scenarios evaluated by `run`.
    pub scenarios: Vec<Scenario>,
    /// Unit of the t-test.
    pub ttest_unit: TTestUnit,
    /// Patch extent used when reading point files; `None` uses each file's
    /// bounding box.
    pub patch_extent: Option<[f64; 2]>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        Self {
            build: BuildConfig::default(),
            measures: MeasureConfig::default(),
            features: FeatureConfig::default(),
            cv: CvConfig::default(),
            patch_extent: Some(synth.patch_extent),
            synth,
            scenarios: Scenario::ALL.to_vec(),
            ttest_unit: TTestUnit::default(),
        }
    }
}

impl PipelineConfig {
    /// Loads `.toml` or `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            _ => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        };
        Ok(cfg)
    }

    /// Sets every seed (pivots, inner splits, generator and folds).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.measures.rng_seed = seed;
        self.cv.seed = seed;
        self.synth.rng_seed = seed;
        self
    }

    /// Validates the sub-configurations.
    pub fn validate(&self) -> Result<()> {
        self.build.validate()?;
        self.measures.validate()?;
        self.features.validate()?;
        anyhow::ensure!(!self.scenarios.is_empty(), "no scenarios configured");
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_round_trip() {
        let cfg = PipelineConfig::default().with_seed(9);
        let dir = std::env::temp_dir().join(format!("cellnet-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for (name, text) in [
            ("c.toml", toml::to_string(&cfg).unwrap()),
            ("c.json", serde_json::to_string(&cfg).unwrap()),
        ] {
            std::fs::write(dir.join(name), text).unwrap();
            assert_eq!(PipelineConfig::load(&dir.join(name)).unwrap(), cfg);
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: PipelineConfig = toml::from_str("[build]\nk = 7\n[measures]\nbetweenness_mode = { pivots = 64 }\n").unwrap();
        assert_eq!(cfg.build.k, 7);
        assert_eq!(cfg.build.radius, BuildConfig::default().radius);
        assert_eq!(cfg.measures.betweenness_mode, cellnet_core::measures::PathMode::Pivots(64));
        assert_eq!(cfg.scenarios, Scenario::ALL.to_vec());
    }
}
