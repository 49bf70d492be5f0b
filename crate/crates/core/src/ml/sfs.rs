//! Greedy sequential forward feature selection.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::cv::{pooled_cv_accuracy, SampleSet};
use super::svm::SvmParams;
use crate::error::{Error, Result};
use crate::model::Grade;

/// Selection limits and the fixed SVM parameters used to score subsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfsConfig {
    /// Hard cap on selected features.
    pub max_features: usize,
    /// Stop after this many additions without a strict improvement.
    pub patience: usize,
    /// Classifier used to score candidate subsets.
    pub params: SvmParams,
}

impl Default for SfsConfig {
    fn default() -> Self {
        Self {
            max_features: 30,
            patience: 5,
            params: SvmParams::default(),
        }
    }
}

/// Outcome of a forward selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfsResult {
    /// Best-scoring prefix of `order`.
    pub selected: Vec<usize>,
    /// Every feature added, in order.
    pub order: Vec<usize>,
    /// Score after each addition, aligned with `order`.
    pub curve: Vec<f64>,
}

impl SfsResult {
    /// Running maximum of `curve`.
    pub fn best_curve(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.curve
            .iter()
            .map(|&v| {
                best = best.max(v);
                best
            })
            .collect()
    }
}

/// Adds, one at a time, the feature whose inclusion maximises `score`
/// (lowest index on ties). Returns the shortest prefix reaching the best score.
pub fn forward_select<F>(n_features: usize, cfg: &SfsConfig, mut score: F) -> Result<SfsResult>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    if n_features == 0 {
        return Err(Error::EmptyInput("features"));
    }
    if cfg.max_features == 0 || cfg.patience == 0 {
        return Err(Error::InvalidConfig("max_features and patience must be >= 1".into()));
    }
    let mut order: Vec<usize> = Vec::new();
    let mut curve = Vec::new();
    let mut used = alloc::vec![false; n_features];
    let mut best = f64::NEG_INFINITY;
    let mut best_len = 0;
    let mut stale = 0;
    let mut trial = Vec::new();
    while order.len() < cfg.max_features.min(n_features) && stale < cfg.patience {
        let mut pick: Option<(usize, f64)> = None;
        for f in (0..n_features).filter(|&f| !used[f]) {
            trial.clear();
            trial.extend_from_slice(&order);
            trial.push(f);
            let s = score(&trial)?;
            if pick.is_none_or(|(_, b)| s > b) {
                pick = Some((f, s));
            }
        }
        let Some((f, s)) = pick else { break };
        used[f] = true;
        order.push(f);
        curve.push(s);
        if s > best {
            best = s;
            best_len = order.len();
            stale = 0;
        } else {
            stale += 1;
        }
    }
    Ok(SfsResult {
        selected: order[..best_len].to_vec(),
        order,
        curve,
    })
}

/// Forward selection on a plain row matrix scored by pooled cross-validated
/// accuracy over the given per-row folds.
pub fn sequential_forward_selection(x: &[Vec<f64>], y: &[Grade], folds: &[usize], cfg: &SfsConfig) -> Result<SfsResult> {
    let set = SampleSet::from_rows(x.to_vec(), y.to_vec(), folds.to_vec())?;
    let images: Vec<usize> = (0..set.n_images()).collect();
    let n_folds = folds.iter().copied().max().map_or(0, |m| m + 1);
    forward_select(set.n_features(), cfg, |cols| {
        pooled_cv_accuracy(&set, &images, folds, n_folds, cols, cfg.params)
    })
}
