//! Synthetic tissue: homogeneous Poisson patches for grade 1 and Thomas
//! cluster patches for grades 2 and 3 (grade 3 denser and tighter).

use std::path::Path;

use anyhow::{ensure, Result};
use cellnet_core::folds::split_folds;
use cellnet_core::model::{ImageEntry, PatchRef, N_FOLDS};
use cellnet_core::{DatasetManifest, Grade, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io;

/// Thomas process: Poisson parents, Poisson(`mean_cluster_size`) offspring
/// per parent with isotropic Gaussian spread `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThomasRecipe {
    /// Parents per px².
    pub parent_intensity: f64,
    /// Mean offspring per parent.
    pub mean_cluster_size: f64,
    /// Offspring displacement standard deviation, px.
    pub sigma: f64,
}

impl ThomasRecipe {
    /// Expected points per px².
    pub fn intensity(&self) -> f64 {
        self.parent_intensity * self.mean_cluster_size
    }
}

/// Point process of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "lowercase")]
pub enum Recipe {
    /// Homogeneous Poisson with the given intensity (points per px²).
    Poisson {
        /// Points per px².
        intensity: f64,
    },
    /// Thomas cluster process.
    Thomas(ThomasRecipe),
}

impl Recipe {
    /// Expected points per px².
    pub fn intensity(&self) -> f64 {
        match self {
            Recipe::Poisson { intensity } => *intensity,
            Recipe::Thomas(t) => t.intensity(),
        }
    }
}

/// Dataset generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Images per grade.
    pub images_per_class: usize,
    /// Patch width and height, px.
    pub patch_extent: [f64; 2],
    /// Patch grid per image (rows, cols).
    pub patch_grid: [u32; 2],
    /// Grade 1 (evenly spread).
    pub class_a: Recipe,
    /// Grade 2 (clustered).
    pub class_b: Recipe,
    /// Grade 3 (denser, tighter clusters).
    pub class_c: Recipe,
    /// Seed for points and folds.
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let area = 1792.0 * 1792.0;
        Self {
            images_per_class: 20,
            patch_extent: [1792.0, 1792.0],
            patch_grid: [2, 2],
            class_a: Recipe::Poisson { intensity: 1000.0 / area },
            class_b: Recipe::Thomas(ThomasRecipe {
                parent_intensity: 40.0 / area,
                mean_cluster_size: 25.0,
                sigma: 60.0,
            }),
            class_c: Recipe::Thomas(ThomasRecipe {
                parent_intensity: 20.0 / area,
                mean_cluster_size: 60.0,
                sigma: 35.0,
            }),
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    /// Recipe of a grade.
    pub fn recipe(&self, grade: Grade) -> Recipe {
        match grade {
            1 => self.class_a,
            2 => self.class_b,
            _ => self.class_c,
        }
    }

    /// Checks intensities and the 50..=50000 expected points guard.
    pub fn validate(&self) -> Result<()> {
        ensure!(self.images_per_class >= 1, "images_per_class must be >= 1");
        ensure!(self.patch_extent.iter().all(|&e| e > 0.0), "patch extent must be > 0");
        ensure!(self.patch_grid.iter().all(|&g| g >= 1), "patch grid must be at least 1x1");
        let area = self.patch_extent[0] * self.patch_extent[1];
        for (name, r) in [("class_a", self.class_a), ("class_b", self.class_b), ("class_c", self.class_c)] {
            if let Recipe::Thomas(t) = r {
                ensure!(
                    t.parent_intensity > 0.0 && t.mean_cluster_size > 0.0,
                    "{name}: intensities must be > 0"
                );
                ensure!(t.sigma > 0.0, "{name}: sigma must be > 0");
            }
            let expected = r.intensity() * area;
            ensure!(r.intensity() > 0.0, "{name}: intensity must be > 0");
            ensure!(
                (50.0..=50000.0).contains(&expected),
                "{name}: expected {expected:.1} points per patch, outside 50..=50000"
            );
        }
        Ok(())
    }
}

/// Seed of one patch, derived from the dataset seed and the patch position.
pub fn patch_seed(seed: u64, image: usize, patch: usize) -> u64 {
    // SplitMix64 finaliser over the packed indices.
    let mut z = seed ^ ((image as u64) << 20 | patch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0)
}

/// Points of a process in `[0, w) x [0, h)`. Thomas parents are drawn in a
/// window enlarged by `4 sigma` so clusters straddle the border naturally.
pub fn sample_points(recipe: &Recipe, extent: [f64; 2], rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let [w, h] = extent;
    match *recipe {
        Recipe::Poisson { intensity } => {
            let n = poisson_count(rng, intensity * w * h);
            (0..n).map(|_| [rng.random_range(0.0..w), rng.random_range(0.0..h)]).collect()
        }
        Recipe::Thomas(t) => {
            let m = 4.0 * t.sigma;
            let n_parents = poisson_count(rng, t.parent_intensity * (w + 2.0 * m) * (h + 2.0 * m));
            let spread = Normal::new(0.0, t.sigma).expect("sigma > 0");
            let mut pts = Vec::new();
            for _ in 0..n_parents {
                let c = [rng.random_range(-m..w + m), rng.random_range(-m..h + m)];
                for _ in 0..poisson_count(rng, t.mean_cluster_size) {
                    let p = [c[0] + spread.sample(rng), c[1] + spread.sample(rng)];
                    if (0.0..w).contains(&p[0]) && (0.0..h).contains(&p[1]) {
                        pts.push(p);
                    }
                }
            }
            pts
        }
    }
}

/// Patch id of image `image_id`, grid position `(row, col)`.
pub fn patch_id(image_id: &str, row: u32, col: u32) -> String {
    format!("{image_id}_r{row}c{col}")
}

/// Generated dataset: manifest plus one point set per patch, in manifest order.
pub struct SynthDataset {
    /// Manifest with stratified folds.
    pub manifest: DatasetManifest,
    /// Point sets keyed by their `patch_id`.
    pub patches: Vec<PointSet>,
}

/// Generates the dataset in memory.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut manifest = DatasetManifest {
        provenance: format!(
            "synthetic point processes: {} images per grade, {}x{} patches of {}x{} px, seed {}",
            cfg.images_per_class, cfg.patch_grid[0], cfg.patch_grid[1], cfg.patch_extent[0], cfg.patch_extent[1], cfg.rng_seed
        ),
        ..DatasetManifest::default()
    };
    let mut jobs = Vec::new();
    for grade in 1..=3u8 {
        for i in 0..cfg.images_per_class {
            let image_id = format!("g{grade}_img{i:03}");
            let mut patches = Vec::new();
            for r in 0..cfg.patch_grid[0] {
                for c in 0..cfg.patch_grid[1] {
                    let pid = patch_id(&image_id, r, c);
                    let k = (r * cfg.patch_grid[1] + c) as usize;
                    jobs.push((pid.clone(), grade, manifest.images.len(), k));
                    patches.push(PatchRef { patch_id: pid, row: r, col: c });
                }
            }
            manifest.images.push(ImageEntry { image_id, grade, patches });
        }
    }
    let patches = jobs
        .par_iter()
        .map(|(pid, grade, image, k)| {
            let mut rng = ChaCha8Rng::seed_from_u64(patch_seed(cfg.rng_seed, *image, *k));
            let pts = sample_points(&cfg.recipe(*grade), cfg.patch_extent, &mut rng);
            Ok(PointSet::new(pid.clone(), pts, cfg.patch_extent)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = split_folds(&manifest, N_FOLDS, cfg.rng_seed)?;
    Ok(SynthDataset { manifest, patches })
}

/// Writes `points/<patch_id>.csv` and `manifest.json` under `out`.
pub fn write_dataset(ds: &SynthDataset, out: &Path) -> Result<()> {
    ds.patches
        .par_iter()
        .try_for_each(|p| io::write_points(&out.join("points").join(format!("{}.csv", p.patch_id)), p))?;
    io::write_manifest(&out.join("manifest.json"), &ds.manifest)
}

/// A single image whose left half is clustered (grade 3 recipe) and right
/// half evenly spread (grade 1 recipe), cut into overlapping patches.
pub struct MixedImage {
    /// Manifest holding the one image (grade 3 nominally) and its patches.
    pub manifest: DatasetManifest,
    /// Patch point sets in local coordinates.
    pub patches: Vec<PointSet>,
    /// Image width and height, px.
    pub extent: [f64; 2],
    /// Whether a given x coordinate lies in the clustered region.
    pub clustered_below_x: f64,
}

/// Builds the left-clustered / right-uniform test image. Patches of
/// `cfg.patch_extent` are placed every `stride` px on a `rows x cols` grid.
pub fn generate_mixed_image(cfg: &SynthConfig, rows: u32, cols: u32, stride: f64, seed: u64) -> Result<MixedImage> {
    cfg.validate()?;
    ensure!(stride > 0.0, "stride must be > 0");
    let [pw, ph] = cfg.patch_extent;
    let extent = [stride * (cols - 1) as f64 + pw, stride * (rows - 1) as f64 + ph];
    let half = extent[0] / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<[f64; 2]> = sample_points(&cfg.class_c, [half, extent[1]], &mut rng);
    pts.extend(
        sample_points(&cfg.class_a, [extent[0] - half, extent[1]], &mut rng)
            .into_iter()
            .map(|p| [p[0] + half, p[1]]),
    );
    let image_id = "mixed".to_string();
    let mut refs = Vec::new();
    let mut patches = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let (x0, y0) = (c as f64 * stride, r as f64 * stride);
            let local: Vec<[f64; 2]> = pts
                .iter()
                .filter(|p| p[0] >= x0 && p[0] < x0 + pw && p[1] >= y0 && p[1] < y0 + ph)
                .map(|p| [p[0] - x0, p[1] - y0])
                .collect();
            let pid = patch_id(&image_id, r, c);
            patches.push(PointSet::new(pid.clone(), local, cfg.patch_extent)?);
            refs.push(PatchRef { patch_id: pid, row: r, col: c });
        }
    }
    let manifest = DatasetManifest {
        images: vec![ImageEntry {
            image_id: image_id.clone(),
            grade: 3,
            patches: refs,
        }],
        folds: [(image_id, 0)].into_iter().collect(),
        provenance: format!("mixed clustered-left/uniform-right image, stride {stride}"),
    };
    Ok(MixedImage {
        manifest,
        patches,
        extent,
        clustered_below_x: half,
    })
}
