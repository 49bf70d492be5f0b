//! Image-level cross-validation with nested feature selection and grid search.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sfs::{forward_select, SfsConfig};
use super::svm::{train_svm_columns, SvmModel, SvmParams};
use crate::aggregation::majority_vote;
use crate::error::{Error, Result};
use crate::folds::stratified_assignment;
use crate::model::Grade;

/// Feature rows grouped by image. Labels and folds are per image; every row
/// of an image inherits them. Image-level scenarios have one row per image;
/// the prediction scenario has one row per patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    /// Feature rows.
    pub rows: Vec<Vec<f64>>,
    /// Owning image of each row.
    pub row_image: Vec<usize>,
    /// Image identifiers.
    pub image_ids: Vec<String>,
    /// Grade per image.
    pub grades: Vec<Grade>,
    /// Outer fold per image.
    pub folds: Vec<usize>,
    /// Column names.
    pub columns: Vec<String>,
}

impl SampleSet {
    /// One row per image, unnamed columns.
    pub fn from_rows(rows: Vec<Vec<f64>>, grades: Vec<Grade>, folds: Vec<usize>) -> Result<Self> {
        let n = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let set = SampleSet {
            rows,
            row_image: (0..n).collect(),
            image_ids: (0..n).map(|i| format!("{i}")).collect(),
            grades,
            folds,
            columns: (0..width).map(|i| format!("f{i}")).collect(),
        };
        set.validate()?;
        Ok(set)
    }

    /// Number of images.
    pub fn n_images(&self) -> usize {
        self.grades.len()
    }

    /// Row width.
    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// Number of outer folds (largest index + 1).
    pub fn n_folds(&self) -> usize {
        self.folds.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Checks shapes and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::EmptyInput("samples"));
        }
        let n_img = self.grades.len();
        if self.folds.len() != n_img || self.image_ids.len() != n_img {
            return Err(Error::DimensionMismatch(format!(
                "{} grades, {} folds, {} image ids",
                n_img,
                self.folds.len(),
                self.image_ids.len()
            )));
        }
        if self.row_image.len() != self.rows.len() {
            return Err(Error::DimensionMismatch("row_image length differs from rows".into()));
        }
        let width = self.columns.len();
        for (row, r) in self.rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::LayoutMismatch {
                    expected: width,
                    found: r.len(),
                });
            }
            if let Some(col) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row, col });
            }
            if self.row_image[row] >= n_img {
                return Err(Error::DimensionMismatch(format!("row {row} refers to a missing image")));
            }
        }
        Ok(())
    }

    fn rows_of(&self, images: &[usize]) -> (Vec<Vec<f64>>, Vec<Grade>) {
        let wanted: BTreeSet<usize> = images.iter().copied().collect();
        self.rows
            .iter()
            .zip(&self.row_image)
            .filter(|(_, im)| wanted.contains(im))
            .map(|(r, &im)| (r.clone(), self.grades[im]))
            .unzip()
    }
}

/// A classifier over rows, or a constant when training saw a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fitted {
    /// Trained SVM.
    Svm(SvmModel),
    /// Only one class was present in training.
    Constant(Grade),
}

impl Fitted {
    /// Trains on the rows of `images`.
    pub fn train(set: &SampleSet, images: &[usize], columns: &[usize], params: SvmParams) -> Result<Self> {
        let (x, y) = set.rows_of(images);
        let first = *y.first().ok_or(Error::EmptyInput("training images"))?;
        if y.iter().all(|&g| g == first) {
            return Ok(Fitted::Constant(first));
        }
        Ok(Fitted::Svm(train_svm_columns(&x, &y, columns, params)?))
    }

    /// Image-level prediction: row predictions voted, ties broken by summed scores.
    pub fn predict_image(&self, set: &SampleSet, image: usize) -> Result<Grade> {
        let model = match self {
            Fitted::Constant(g) => return Ok(*g),
            Fitted::Svm(m) => m,
        };
        let mut labels = Vec::new();
        let mut scores: BTreeMap<Grade, f64> = BTreeMap::new();
        for (r, _) in set.rows.iter().zip(&set.row_image).filter(|(_, &im)| im == image) {
            let p = model.predict(r)?;
            labels.push(p.grade);
            for (g, s) in p.scores {
                *scores.entry(g).or_default() += s;
            }
        }
        majority_vote(&labels, Some(&scores))
    }
}

/// Correctly predicted fraction of all held-out images, pooled over the
/// `n_folds` splits given by `folds` (aligned with `images`).
pub fn pooled_cv_accuracy(
    set: &SampleSet,
    images: &[usize],
    folds: &[usize],
    n_folds: usize,
    columns: &[usize],
    params: SvmParams,
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for f in 0..n_folds {
        let train: Vec<usize> = images.iter().zip(folds).filter(|(_, &k)| k != f).map(|(&i, _)| i).collect();
        let test: Vec<usize> = images.iter().zip(folds).filter(|(_, &k)| k == f).map(|(&i, _)| i).collect();
        if train.is_empty() || test.is_empty() {
            continue;
        }
        let model = Fitted::train(set, &train, columns, params)?;
        for &im in &test {
            total += 1;
            if model.predict_image(set, im)? == set.grades[im] {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::TooFewImages("no held-out images in inner folds".into()));
    }
    Ok(correct as f64 / total as f64)
}

/// Model selection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    /// Candidate `(C, gamma)` pairs, searched in order; the first best wins.
    pub grid: Vec<SvmParams>,
    /// Forward selection inside each training split; `None` uses every column.
    pub sfs: Option<SfsConfig>,
    /// Inner split count for selection and grid search.
    pub inner_folds: usize,
    /// Seed for the inner stratified splits.
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            grid: SvmParams::default_grid(),
            sfs: Some(SfsConfig::default()),
            inner_folds: 2,
            seed: 0,
        }
    }
}

/// A model chosen and trained on a set of images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Column indices used.
    pub columns: Vec<usize>,
    /// Chosen parameters.
    pub params: SvmParams,
    /// Inner accuracy of the chosen parameters.
    pub inner_accuracy: f64,
    /// Forward-selection curve (empty without selection).
    pub sfs_curve: Vec<f64>,
    /// Model trained on all given images.
    pub model: Fitted,
}

/// Runs selection and grid search with inner stratified splits of `images`,
/// then trains on all of them.
pub fn select_and_fit(set: &SampleSet, images: &[usize], cfg: &CvConfig, seed: u64) -> Result<Selection> {
    if cfg.grid.is_empty() {
        return Err(Error::InvalidConfig("empty parameter grid".into()));
    }
    if cfg.inner_folds < 2 {
        return Err(Error::InvalidConfig("inner_folds must be >= 2".into()));
    }
    let labels: Vec<Grade> = images.iter().map(|&i| set.grades[i]).collect();
    let inner = stratified_assignment(&labels, cfg.inner_folds, seed);
    let all: Vec<usize> = (0..set.n_features()).collect();
    let (columns, sfs_curve) = match &cfg.sfs {
        Some(sfs) => {
            let r = forward_select(set.n_features(), sfs, |cols| {
                pooled_cv_accuracy(set, images, &inner, cfg.inner_folds, cols, sfs.params)
            })?;
            (r.selected, r.curve)
        }
        None => (all, Vec::new()),
    };
    let mut best: Option<(SvmParams, f64)> = None;
    for &p in &cfg.grid {
        let acc = pooled_cv_accuracy(set, images, &inner, cfg.inner_folds, &columns, p)?;
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((p, acc));
        }
    }
    let (params, inner_accuracy) = best.ok_or(Error::InvalidConfig("empty parameter grid".into()))?;
    let model = Fitted::train(set, images, &columns, params)?;
    Ok(Selection {
        columns,
        params,
        inner_accuracy,
        sfs_curve,
        model,
    })
}

/// Held-out result of one outer fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    /// Outer fold index.
    pub fold: usize,
    /// Held-out accuracy.
    pub accuracy: f64,
    /// Held-out image count.
    pub n_test: usize,
    /// Chosen parameters.
    pub params: SvmParams,
    /// Inner accuracy of the chosen parameters.
    pub inner_accuracy: f64,
    /// Names of the selected columns.
    pub selected_features: Vec<String>,
    /// Forward-selection curve.
    pub sfs_curve: Vec<f64>,
}

/// One held-out image prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePrediction {
    /// Image identifier.
    pub image_id: String,
    /// Outer fold.
    pub fold: usize,
    /// True grade.
    pub truth: Grade,
    /// Predicted grade.
    pub predicted: Grade,
}

/// Cross-validation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Evaluated folds.
    pub folds: Vec<FoldReport>,
    /// Mean fold accuracy.
    pub mean_accuracy: f64,
    /// Sample standard deviation of fold accuracies (0 for one fold).
    pub std_accuracy: f64,
    /// Sorted grades indexing the confusion matrix.
    pub classes: Vec<Grade>,
    /// `confusion[true][predicted]`, summed over folds.
    pub confusion: Vec<Vec<usize>>,
    /// Held-out predictions.
    pub predictions: Vec<ImagePrediction>,
    /// Skipped folds and similar notes.
    pub warnings: Vec<String>,
}

/// Outer cross-validation over the set's image folds. A fold whose training
/// part lacks a class is skipped with a warning.
pub fn cross_validate(set: &SampleSet, cfg: &CvConfig) -> Result<CvReport> {
    set.validate()?;
    let classes: Vec<Grade> = set.grades.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let class_index = |g: Grade| classes.iter().position(|&c| c == g).unwrap_or(0);
    let mut confusion = alloc::vec![alloc::vec![0usize; classes.len()]; classes.len()];
    let mut folds = Vec::new();
    let mut predictions = Vec::new();
    let mut warnings = Vec::new();
    for f in 0..set.n_folds() {
        let train: Vec<usize> = (0..set.n_images()).filter(|&i| set.folds[i] != f).collect();
        let test: Vec<usize> = (0..set.n_images()).filter(|&i| set.folds[i] == f).collect();
        if test.is_empty() {
            warnings.push(format!("fold {f}: no test images, skipped"));
            continue;
        }
        let present: BTreeSet<Grade> = train.iter().map(|&i| set.grades[i]).collect();
        if present.len() < classes.len() {
            warnings.push(format!("fold {f}: training split lacks a class, skipped"));
            continue;
        }
        let sel = select_and_fit(set, &train, cfg, cfg.seed.wrapping_add(f as u64))?;
        let mut correct = 0;
        for &im in &test {
            let predicted = sel.model.predict_image(set, im)?;
            let truth = set.grades[im];
            confusion[class_index(truth)][class_index(predicted)] += 1;
            correct += usize::from(predicted == truth);
            predictions.push(ImagePrediction {
                image_id: set.image_ids[im].clone(),
                fold: f,
                truth,
                predicted,
            });
        }
        folds.push(FoldReport {
            fold: f,
            accuracy: correct as f64 / test.len() as f64,
            n_test: test.len(),
            params: sel.params,
            inner_accuracy: sel.inner_accuracy,
            selected_features: sel.columns.iter().map(|&c| set.columns[c].clone()).collect(),
            sfs_curve: sel.sfs_curve,
        });
    }
    if folds.is_empty() {
        return Err(Error::TooFewImages("no fold could be evaluated".into()));
    }
    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let k = accs.len() as f64;
    let mean_accuracy = accs.iter().sum::<f64>() / k;
    let std_accuracy = if accs.len() > 1 {
        libm::sqrt(accs.iter().map(|a| (a - mean_accuracy) * (a - mean_accuracy)).sum::<f64>() / (k - 1.0))
    } else {
        0.0
    };
    Ok(CvReport {
        folds,
        mean_accuracy,
        std_accuracy,
        classes,
        confusion,
        predictions,
        warnings,
    })
}
