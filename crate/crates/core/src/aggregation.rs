//! Patch-to-image aggregation: prediction voting, measure concatenation,
//! feature averaging, and the overlapping-patch score grid.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::MeasureTable;
use crate::model::{FeatureVector, Grade, Level};

/// How patch information becomes an image-level decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Classify patches, then majority-vote.
    Predictions,
    /// Concatenate patch measures, then featurize per image.
    Measures,
    /// Average patch feature vectors per image.
    Features,
}

impl Scenario {
    /// All scenarios.
    pub const ALL: [Scenario; 3] = [Scenario::Predictions, Scenario::Measures, Scenario::Features];

    /// Lowercase name.
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Predictions => "predictions",
            Scenario::Measures => "measures",
            Scenario::Features => "features",
        }
    }
}

impl core::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown scenario {s}")))
    }
}

/// Most frequent label. Ties go to the class with the larger summed decision
/// score (when `scores` is given), then to the lower grade.
pub fn majority_vote(labels: &[Grade], scores: Option<&BTreeMap<Grade, f64>>) -> Result<Grade> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    let mut counts: BTreeMap<Grade, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let score = |g: Grade| scores.and_then(|s| s.get(&g)).copied().unwrap_or(0.0);
    let mut best: Option<Grade> = None;
    // Ascending grade order: strict `>` keeps the lower grade on equal scores.
    for (&g, &c) in &counts {
        if c != top {
            continue;
        }
        best = match best {
            Some(b) if score(g) > score(b) => Some(g),
            Some(b) => Some(b),
            None => Some(g),
        };
    }
    best.ok_or(Error::EmptyInput("labels"))
}

/// Concatenates patch tables row-wise in the given order. Spectral metadata of
/// every source is kept.
pub fn aggregate_measures(tables: &[MeasureTable]) -> Result<MeasureTable> {
    let (first, rest) = tables.split_first().ok_or(Error::EmptyInput("measure tables"))?;
    let mut out = first.clone();
    for t in rest {
        out.degree.extend_from_slice(&t.degree);
        out.clustering.extend_from_slice(&t.clustering);
        out.closeness.extend_from_slice(&t.closeness);
        out.degree_centrality.extend_from_slice(&t.degree_centrality);
        out.betweenness.extend_from_slice(&t.betweenness);
        out.eigenvector.extend_from_slice(&t.eigenvector);
        out.katz.extend_from_slice(&t.katz);
        out.spectral.extend(t.spectral.iter().cloned());
    }
    out.check_invariants()?;
    Ok(out)
}

/// Element-wise mean of feature vectors sharing one layout; result is image level.
pub fn aggregate_features(vectors: &[FeatureVector]) -> Result<FeatureVector> {
    let first = vectors.first().ok_or(Error::EmptyInput("feature vectors"))?;
    let len = first.len();
    let mut sum = alloc::vec![0.0; len];
    for v in vectors {
        if v.layout != first.layout || v.len() != len {
            return Err(Error::LayoutMismatch {
                expected: len,
                found: v.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(&v.values) {
            *s += x;
        }
    }
    let k = vectors.len() as f64;
    Ok(FeatureVector {
        values: sum.into_iter().map(|s| s / k).collect(),
        layout: first.layout.clone(),
        level: Level::Image,
    })
}

/// A scored patch at tile-grid position `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPatch {
    /// Grid row (origin at `row * stride` pixels).
    pub row: u32,
    /// Grid column.
    pub col: u32,
    /// One score per class, in the grid's class order.
    pub scores: Vec<f64>,
}

/// Per-class score maps with `stride`-sized cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyGrid {
    /// Cell rows.
    pub rows: usize,
    /// Cell columns.
    pub cols: usize,
    /// Cell edge length in pixels.
    pub cell_size: f64,
    /// `cells[class][row * cols + col]`; `None` where no patch covers the cell.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl SaliencyGrid {
    /// Score of one cell.
    pub fn get(&self, class: usize, row: usize, col: usize) -> Option<f64> {
        self.cells[class][row * self.cols + col]
    }
}

/// Averages the class scores of all patches covering each `stride x stride`
/// cell. A patch of `patch_size` pixels at grid `(row, col)` spans
/// `ceil(patch_size / stride)` cells in each direction.
pub fn saliency_grid(patches: &[ScoredPatch], patch_size: f64, stride: f64, n_classes: usize) -> Result<SaliencyGrid> {
    if !(stride > 0.0 && patch_size > 0.0) {
        return Err(Error::InvalidConfig("stride and patch size must be > 0".into()));
    }
    if patches.is_empty() {
        return Err(Error::EmptyInput("patches"));
    }
    let span = libm::ceil(patch_size / stride) as usize;
    let rows = patches.iter().map(|p| p.row as usize + span).max().unwrap_or(0);
    let cols = patches.iter().map(|p| p.col as usize + span).max().unwrap_or(0);
    let mut sums = alloc::vec![alloc::vec![0.0; rows * cols]; n_classes];
    let mut hits = alloc::vec![0usize; rows * cols];
    for p in patches {
        if p.scores.len() != n_classes {
            return Err(Error::DimensionMismatch(alloc::format!(
                "patch has {} scores, expected {n_classes}",
                p.scores.len()
            )));
        }
        for r in p.row as usize..p.row as usize + span {
            for c in p.col as usize..p.col as usize + span {
                let cell = r * cols + c;
                hits[cell] += 1;
                for (class, s) in p.scores.iter().enumerate() {
                    sums[class][cell] += s;
                }
            }
        }
    }
    let cells = sums
        .into_iter()
        .map(|class| {
            class
                .into_iter()
                .zip(&hits)
                .map(|(s, &h)| (h > 0).then(|| s / h as f64))
                .collect()
        })
        .collect();
    Ok(SaliencyGrid {
        rows,
        cols,
        cell_size: stride,
        cells,
    })
}
