//! Shared data types: point sets, feature vectors and dataset bookkeeping.
//!
//! Node ids are dense 0-based indices in point order. Index `i` of a
//! [`PointSet`] is node `i` of the [`CellGraph`](crate::CellGraph) built from
//! it and row `i` of its [`MeasureTable`](crate::MeasureTable).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LayoutEntry;

/// Tissue grade label. Only 1, 2 and 3 are in the domain.
pub type Grade = u8;

/// Grades accepted by the manifest.
pub const GRADES: [Grade; 3] = [1, 2, 3];

/// Nuclei centroids of one patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    /// Opaque patch identifier.
    pub patch_id: String,
    /// `(x, y)` centroids in pixels; index is the node id.
    pub points: Vec<[f64; 2]>,
    /// `(width, height)` of the patch in pixels.
    pub extent: [f64; 2],
}

impl PointSet {
    /// Builds a point set, checking every coordinate is finite and inside the extent.
    pub fn new(patch_id: impl Into<String>, points: Vec<[f64; 2]>, extent: [f64; 2]) -> Result<Self> {
        let set = Self {
            patch_id: patch_id.into(),
            points,
            extent,
        };
        set.validate()?;
        Ok(set)
    }

    /// Checks the coordinate invariants.
    pub fn validate(&self) -> Result<()> {
        let [w, h] = self.extent;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(Error::InvalidConfig(format!("patch extent {w}x{h}")));
        }
        for (index, &[x, y]) in self.points.iter().enumerate() {
            if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 || x >= w || y >= h {
                return Err(Error::InvalidCoordinate { index });
            }
        }
        Ok(())
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True when there are no points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Whether a feature vector describes one patch or a whole image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// One cell graph.
    Patch,
    /// Aggregated over the patches of an image.
    Image,
}

/// Fixed-length statistical descriptor of one graph or image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Feature values, positionally aligned with `layout`.
    pub values: Vec<f64>,
    /// Name of each position.
    pub layout: Vec<LayoutEntry>,
    /// Patch or image.
    pub level: Level,
}

impl FeatureVector {
    /// Number of features.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True for a zero-length vector.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Position of a patch inside its source image, in tile-grid units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchRef {
    /// Patch identifier; names the point file.
    pub patch_id: String,
    /// Grid row.
    pub row: u32,
    /// Grid column.
    pub col: u32,
}

/// One labelled image and its patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    /// Image identifier.
    pub image_id: String,
    /// Grade label.
    pub grade: Grade,
    /// Patches tiled from this image.
    pub patches: Vec<PatchRef>,
}

/// Images, patch membership, labels and fold assignment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Labelled images.
    pub images: Vec<ImageEntry>,
    /// image_id -> fold index.
    #[serde(default)]
    pub folds: BTreeMap<String, usize>,
    /// Free-text note on where the data came from.
    #[serde(default)]
    pub provenance: String,
}

impl DatasetManifest {
    /// Image by id.
    pub fn image(&self, image_id: &str) -> Option<&ImageEntry> {
        self.images.iter().find(|im| im.image_id == image_id)
    }

    /// Fold of an image, if assigned.
    pub fn fold_of(&self, image_id: &str) -> Option<usize> {
        self.folds.get(image_id).copied()
    }

    /// Number of distinct folds referenced.
    pub fn n_folds(&self) -> usize {
        self.folds.values().max().map_or(0, |m| m + 1)
    }

    /// All patch ids in image order.
    pub fn patch_ids(&self) -> impl Iterator<Item = &str> {
        self.images
            .iter()
            .flat_map(|im| im.patches.iter().map(|p| p.patch_id.as_str()))
    }
}

/// A single problem found by [`validate_manifest`].
#[allow(missing_docs)]
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Two images share an id.
    DuplicateImage(String),
    /// A patch listed under more than one image (or twice under one).
    DuplicatePatch(String),
    /// Grade outside {1, 2, 3}.
    GradeOutOfDomain { image_id: String, grade: Grade },
    /// Image without a fold entry.
    MissingFold(String),
    /// Fold entry for an unknown image.
    UnknownFoldImage(String),
    /// Fold index outside `0..3`.
    FoldOutOfRange { image_id: String, fold: usize },
    /// Per-grade fold sizes differ by more than one image.
    NotStratified { grade: Grade },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateImage(id) => write!(f, "duplicate image {id}"),
            Violation::DuplicatePatch(id) => write!(f, "duplicate patch {id}"),
            Violation::GradeOutOfDomain { image_id, grade } => {
                write!(f, "grade out of domain: image {image_id} has grade {grade}")
            }
            Violation::MissingFold(id) => write!(f, "image {id} has no fold"),
            Violation::UnknownFoldImage(id) => write!(f, "fold assigned to unknown image {id}"),
            Violation::FoldOutOfRange { image_id, fold } => {
                write!(f, "fold {fold} of image {image_id} is outside 0..{N_FOLDS}")
            }
            Violation::NotStratified { grade } => {
                write!(f, "grade {grade} is not stratified across folds")
            }
        }
    }
}

/// Number of cross-validation folds used throughout.
pub const N_FOLDS: usize = 3;

/// Checks fold partition, label domain and patch uniqueness. An empty result
/// means the manifest is valid.
pub fn validate_manifest(manifest: &DatasetManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut image_ids = BTreeSet::new();
    let mut patch_ids = BTreeSet::new();
    for image in &manifest.images {
        if !image_ids.insert(image.image_id.as_str()) {
            out.push(Violation::DuplicateImage(image.image_id.clone()));
        }
        if !GRADES.contains(&image.grade) {
            out.push(Violation::GradeOutOfDomain {
                image_id: image.image_id.clone(),
                grade: image.grade,
            });
        }
        for patch in &image.patches {
            if !patch_ids.insert(patch.patch_id.as_str()) {
                out.push(Violation::DuplicatePatch(patch.patch_id.clone()));
            }
        }
    }
    for image in &manifest.images {
        match manifest.folds.get(&image.image_id) {
            None => out.push(Violation::MissingFold(image.image_id.clone())),
            Some(&fold) if fold >= N_FOLDS => out.push(Violation::FoldOutOfRange {
                image_id: image.image_id.clone(),
                fold,
            }),
            Some(_) => {}
        }
    }
    for id in manifest.folds.keys() {
        if !image_ids.contains(id.as_str()) {
            out.push(Violation::UnknownFoldImage(id.clone()));
        }
    }
    let mut per_grade: BTreeMap<Grade, [usize; N_FOLDS]> = BTreeMap::new();
    for image in &manifest.images {
        if let Some(&fold) = manifest.folds.get(&image.image_id) {
            if fold < N_FOLDS {
                per_grade.entry(image.grade).or_default()[fold] += 1;
            }
        }
    }
    for (grade, counts) in per_grade {
        let lo = counts.iter().min().copied().unwrap_or(0);
        let hi = counts.iter().max().copied().unwrap_or(0);
        if hi - lo > 1 {
            out.push(Violation::NotStratified { grade });
        }
    }
    out
}
