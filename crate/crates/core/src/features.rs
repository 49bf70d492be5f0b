//! Histogram-statistics feature vectors.
//!
//! For each measure, in [`Measure::ALL`] order, the vector holds `B` histogram
//! counts, the `B + 1` bin edges, then max, mean and population standard
//! deviation: `2B + 4` values per measure, 168 with the default `B = 10`.
//!
//! Binning: a value equal to an interior edge falls in the bin to its right;
//! the last bin is closed so the maximum is always counted. In fixed-edge mode
//! values outside the edge range are clamped into the first or last bin.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureTable};
use crate::model::{FeatureVector, Level};
use crate::num::{mean, pop_std};

/// Default bin count per measure.
pub const DEFAULT_BINS: usize = 10;

/// Where histogram edges come from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Uniform edges over each sample's own `[min, max]`.
    #[default]
    Adaptive,
    /// Explicit edges per measure; measures without an entry stay adaptive.
    Fixed(BTreeMap<Measure, Vec<f64>>),
}

/// Binning policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Bin count for measures not listed in `bins_per_measure`.
    pub default_bins: usize,
    /// Per-measure bin counts.
    pub bins_per_measure: BTreeMap<Measure, usize>,
    /// Edge policy.
    pub edge_mode: EdgeMode,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            default_bins: DEFAULT_BINS,
            bins_per_measure: BTreeMap::new(),
            edge_mode: EdgeMode::Adaptive,
        }
    }
}

impl FeatureConfig {
    /// Same bin count for every measure, adaptive edges.
    pub fn uniform(bins: usize) -> Self {
        Self {
            default_bins: bins,
            ..Self::default()
        }
    }

    /// Fixed ranges that make individual bins readable: clustering in ten
    /// 0.1-wide bins on `[0, 1]`, degree in unit bins `0..20` with the last bin
    /// absorbing higher degrees. Other measures stay adaptive.
    pub fn interpretable() -> Self {
        let mut edges = BTreeMap::new();
        edges.insert(Measure::Clustering, (0..=10).map(|i| i as f64 / 10.0).collect());
        edges.insert(Measure::Degree, (0..=21).map(f64::from).collect());
        Self {
            edge_mode: EdgeMode::Fixed(edges),
            ..Self::default()
        }
    }

    fn fixed_edges(&self, m: Measure) -> Option<&[f64]> {
        match &self.edge_mode {
            EdgeMode::Fixed(map) => map.get(&m).map(Vec::as_slice),
            EdgeMode::Adaptive => None,
        }
    }

    /// Bin count used for `m`.
    pub fn bins(&self, m: Measure) -> usize {
        match self.fixed_edges(m) {
            Some(edges) => edges.len().saturating_sub(1),
            None => self.bins_per_measure.get(&m).copied().unwrap_or(self.default_bins),
        }
    }

    /// Checks `B >= 1` and strictly increasing finite fixed edges.
    pub fn validate(&self) -> Result<()> {
        for m in Measure::ALL {
            if self.bins(m) == 0 {
                return Err(Error::InvalidConfig(format!("measure {m} needs at least one bin")));
            }
            if let Some(edges) = self.fixed_edges(m) {
                let increasing = edges.windows(2).all(|w| w[0] < w[1]);
                if !increasing || edges.iter().any(|e| !e.is_finite()) {
                    return Err(Error::InvalidConfig(format!("fixed edges of {m} must be strictly increasing")));
                }
            }
        }
        Ok(())
    }
}

/// Kind of one feature position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Count of bin `i`.
    HistCount(usize),
    /// Edge `i` (of `B + 1`).
    BinEdge(usize),
    /// Maximum value.
    Max,
    /// Mean value.
    Mean,
    /// Population standard deviation.
    Std,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::HistCount(i) => write!(f, "hist_count_{i}"),
            FeatureKind::BinEdge(i) => write!(f, "bin_edge_{i}"),
            FeatureKind::Max => f.write_str("max"),
            FeatureKind::Mean => f.write_str("mean"),
            FeatureKind::Std => f.write_str("std"),
        }
    }
}

/// `(measure, feature)` name of one position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    /// Source measure.
    pub measure: Measure,
    /// Statistic.
    pub kind: FeatureKind,
}

impl LayoutEntry {
    /// Column name, e.g. `clustering__hist_count_4`.
    pub fn column_name(&self) -> String {
        format!("{}__{}", self.measure, self.kind)
    }

    /// Parses a column name produced by [`LayoutEntry::column_name`].
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad feature column {name}"));
        let (m, k) = name.split_once("__").ok_or_else(bad)?;
        let measure: Measure = m.parse()?;
        let index = |prefix: &str| k.strip_prefix(prefix).and_then(|i| i.parse::<usize>().ok());
        let kind = match k {
            "max" => FeatureKind::Max,
            "mean" => FeatureKind::Mean,
            "std" => FeatureKind::Std,
            _ => {
                if let Some(i) = index("hist_count_") {
                    FeatureKind::HistCount(i)
                } else if let Some(i) = index("bin_edge_") {
                    FeatureKind::BinEdge(i)
                } else {
                    return Err(bad());
                }
            }
        };
        Ok(Self { measure, kind })
    }
}

/// Ordered feature names for `cfg`.
pub fn feature_layout(cfg: &FeatureConfig) -> Vec<LayoutEntry> {
    let mut out = Vec::new();
    for measure in Measure::ALL {
        let b = cfg.bins(measure);
        let entry = |kind| LayoutEntry { measure, kind };
        out.extend((0..b).map(|i| entry(FeatureKind::HistCount(i))));
        out.extend((0..=b).map(|i| entry(FeatureKind::BinEdge(i))));
        out.extend([FeatureKind::Max, FeatureKind::Mean, FeatureKind::Std].map(entry));
    }
    out
}

/// Bin index of `v` given `edges` (value on an interior edge goes right,
/// values beyond either end are clamped).
fn bin_index(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    let interior = &edges[1..bins];
    interior.partition_point(|&e| e <= v).min(bins - 1)
}

/// Uniform edges over `[min, max]`; a zero-width range becomes `[min, min + 1]`.
pub fn adaptive_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    edges
}

/// Counts, edges, max, mean and std of one measure's values (`2B + 4` numbers).
pub fn histogram_features(values: &[f64], bins: usize, fixed: Option<&[f64]>) -> Vec<f64> {
    let edges = match fixed {
        Some(e) => e.to_vec(),
        None => adaptive_edges(values, bins),
    };
    let mut counts = alloc::vec![0.0; edges.len() - 1];
    for &v in values {
        counts[bin_index(&edges, v)] += 1.0;
    }
    // Summing in sorted order makes the statistics independent of node order.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = sorted.last().copied().unwrap_or(f64::NEG_INFINITY);
    let mut out = counts;
    out.extend_from_slice(&edges);
    out.extend([max, mean(&sorted), pop_std(&sorted)]);
    out
}

/// Histogram-statistics vector of a measure table.
pub fn featurize(table: &MeasureTable, cfg: &FeatureConfig) -> Result<FeatureVector> {
    featurize_columns(|m| table.values(m), table.n_nodes(), cfg)
}

/// Featurizes per-measure value arrays supplied by `column`. Every column
/// must have `n` values.
pub fn featurize_columns<F>(column: F, n: usize, cfg: &FeatureConfig) -> Result<FeatureVector>
where
    F: Fn(Measure) -> Vec<f64>,
{
    cfg.validate()?;
    if n == 0 {
        return Err(Error::EmptyInput("measure table"));
    }
    let mut values = Vec::new();
    for m in Measure::ALL {
        let col = column(m);
        if col.len() != n {
            return Err(Error::DimensionMismatch(format!("column {m} has {} values, expected {n}", col.len())));
        }
        values.extend(histogram_features(&col, cfg.bins(m), cfg.fixed_edges(m)));
    }
    Ok(FeatureVector {
        values,
        layout: feature_layout(cfg),
        level: Level::Patch,
    })
}
