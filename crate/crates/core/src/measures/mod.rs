//! The seven per-node social-network measures and the table that holds them.

mod local;
mod paths;
mod spectral;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CellGraph;

pub use local::{clustering_coefficient, degree_centrality, node_degree};
pub use paths::{betweenness_centrality, closeness_centrality, select_pivots};
pub use spectral::{eigenvector_centrality, katz_centrality, katz_centrality_with_lambda, resolve_katz_alpha, Eigenpair, KatzResult};

/// Node count above which [`PathMode::Auto`] switches to pivot sampling.
pub const EXACT_PATH_LIMIT: usize = 20_000;
/// Pivot count used by [`PathMode::Auto`] on large graphs.
pub const AUTO_PIVOTS: usize = 256;

/// The measures, in feature-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Node degree.
    Degree,
    /// Local clustering coefficient.
    Clustering,
    /// Closeness centrality.
    Closeness,
    /// Degree normalised by `N - 1`.
    DegreeCentrality,
    /// Betweenness centrality.
    Betweenness,
    /// Eigenvector centrality.
    Eigenvector,
    /// Katz centrality.
    Katz,
}

impl Measure {
    /// All measures in canonical order.
    pub const ALL: [Measure; 7] = [
        Measure::Degree,
        Measure::Clustering,
        Measure::Closeness,
        Measure::DegreeCentrality,
        Measure::Betweenness,
        Measure::Eigenvector,
        Measure::Katz,
    ];

    /// Column name used in files.
    pub fn name(self) -> &'static str {
        match self {
            Measure::Degree => "degree",
            Measure::Clustering => "clustering",
            Measure::Closeness => "closeness",
            Measure::DegreeCentrality => "degree_centrality",
            Measure::Betweenness => "betweenness",
            Measure::Eigenvector => "eigenvector",
            Measure::Katz => "katz",
        }
    }

    /// Position in [`Measure::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown measure {s}")))
    }
}

/// How the Katz attenuation factor is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KatzAlphaRule {
    /// Use this alpha as given.
    Fixed(f64),
    /// `alpha = min(0.1, c / lambda_max)`.
    SpectralFraction(f64),
}

/// Exact all-sources traversal or sampling from `m` pivot sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Exact up to [`EXACT_PATH_LIMIT`] nodes, else `Pivots(AUTO_PIVOTS)`.
    Auto,
    /// All sources.
    Exact,
    /// `m` seeded random sources.
    Pivots(usize),
}

impl PathMode {
    /// Number of sources to traverse on a graph of `n` nodes, or `None` for all.
    pub fn pivots_for(self, n: usize) -> Option<usize> {
        match self {
            PathMode::Exact => None,
            PathMode::Pivots(m) => Some(m),
            PathMode::Auto if n <= EXACT_PATH_LIMIT => None,
            PathMode::Auto => Some(AUTO_PIVOTS),
        }
    }
}

/// Parameters of the measure computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureConfig {
    /// L-infinity step tolerance of the eigenvector power iteration.
    pub evc_tolerance: f64,
    /// Iteration cap shared by the eigenvector and Katz iterations.
    pub evc_max_iterations: usize,
    /// Relative L-infinity step tolerance of the Katz fixed-point iteration.
    pub katz_tolerance: f64,
    /// Katz attenuation rule.
    pub katz_alpha_rule: KatzAlphaRule,
    /// Uniform Katz baseline.
    pub katz_beta: f64,
    /// Betweenness traversal mode.
    pub betweenness_mode: PathMode,
    /// Closeness traversal mode.
    pub closeness_mode: PathMode,
    /// Divide betweenness by `(N-1)(N-2)/2`.
    pub bc_normalized: bool,
    /// Seed for pivot sampling.
    pub rng_seed: u64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            evc_tolerance: 1e-6,
            evc_max_iterations: 100_000,
            katz_tolerance: 1e-13,
            katz_alpha_rule: KatzAlphaRule::SpectralFraction(0.9),
            katz_beta: 1.0,
            betweenness_mode: PathMode::Auto,
            closeness_mode: PathMode::Auto,
            bc_normalized: true,
            rng_seed: 0,
        }
    }
}

impl MeasureConfig {
    /// Checks tolerances, pivot counts and the alpha rule.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.evc_tolerance > 0.0 && self.katz_tolerance > 0.0) {
            return bad("tolerances must be > 0");
        }
        if self.evc_max_iterations == 0 {
            return bad("evc_max_iterations must be >= 1");
        }
        for mode in [self.betweenness_mode, self.closeness_mode] {
            if mode == PathMode::Pivots(0) {
                return bad("pivot count must be >= 1");
            }
        }
        match self.katz_alpha_rule {
            KatzAlphaRule::Fixed(a) if !(a > 0.0 && a.is_finite()) => bad("katz alpha must be > 0"),
            KatzAlphaRule::SpectralFraction(c) if !(c > 0.0 && c < 1.0) => {
                bad("katz spectral fraction must be in (0, 1)")
            }
            _ if !self.katz_beta.is_finite() => bad("katz beta must be finite"),
            _ => Ok(()),
        }
    }
}

/// Spectral parameters recorded for one source graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeta {
    /// Patch the values came from (empty if unknown).
    pub source: String,
    /// Resolved Katz alpha.
    pub katz_alpha: f64,
    /// Katz beta.
    pub katz_beta: f64,
    /// Dominant adjacency eigenvalue estimate.
    pub evc_eigenvalue: f64,
    /// Non-fatal problems (e.g. an edgeless graph).
    pub warnings: Vec<String>,
}

/// Per-node values of every measure for one graph (or a concatenation of graphs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureTable {
    /// Node degree.
    pub degree: Vec<u32>,
    /// Clustering coefficient in `[0, 1]`.
    pub clustering: Vec<f64>,
    /// Closeness centrality.
    pub closeness: Vec<f64>,
    /// Degree centrality in `[0, 1]`.
    pub degree_centrality: Vec<f64>,
    /// Betweenness centrality.
    pub betweenness: Vec<f64>,
    /// L2-normalised eigenvector centrality.
    pub eigenvector: Vec<f64>,
    /// L2-normalised Katz centrality.
    pub katz: Vec<f64>,
    /// One entry per source graph.
    pub spectral: Vec<SpectralMeta>,
}

impl MeasureTable {
    /// Number of rows.
    pub fn n_nodes(&self) -> usize {
        self.degree.len()
    }

    /// Values of one measure as reals.
    pub fn values(&self, measure: Measure) -> Vec<f64> {
        match measure {
            Measure::Degree => self.degree.iter().map(|&d| f64::from(d)).collect(),
            other => self.real_column(other).to_vec(),
        }
    }

    fn real_column(&self, measure: Measure) -> &[f64] {
        match measure {
            Measure::Degree => &[],
            Measure::Clustering => &self.clustering,
            Measure::Closeness => &self.closeness,
            Measure::DegreeCentrality => &self.degree_centrality,
            Measure::Betweenness => &self.betweenness,
            Measure::Eigenvector => &self.eigenvector,
            Measure::Katz => &self.katz,
        }
    }

    /// Table with rows reordered so that output row `i` is input row `order[i]`.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let pick = |col: &[f64]| order.iter().map(|&i| col[i]).collect::<Vec<f64>>();
        Self {
            degree: order.iter().map(|&i| self.degree[i]).collect(),
            clustering: pick(&self.clustering),
            closeness: pick(&self.closeness),
            degree_centrality: pick(&self.degree_centrality),
            betweenness: pick(&self.betweenness),
            eigenvector: pick(&self.eigenvector),
            katz: pick(&self.katz),
            spectral: self.spectral.clone(),
        }
    }

    /// Verifies column lengths, value ranges and finiteness.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_nodes();
        for m in &Measure::ALL[1..] {
            let col = self.real_column(*m);
            if col.len() != n {
                return Err(Error::DimensionMismatch(alloc::format!("column {m} has {} rows, expected {n}", col.len())));
            }
            if let Some(v) = col.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(alloc::format!("column {m} has non-finite value {v}")));
            }
        }
        let unit = |v: &f64| (0.0..=1.0).contains(v);
        if !self.clustering.iter().all(unit) || !self.degree_centrality.iter().all(unit) {
            return Err(Error::InvalidConfig("clustering/degree centrality outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Computes every measure of `g`.
///
/// An edgeless graph yields all-zero eigenvector and Katz columns plus a
/// warning in the table's [`SpectralMeta`] rather than an error.
pub fn compute_all_measures(g: &CellGraph, cfg: &MeasureConfig) -> Result<MeasureTable> {
    cfg.validate()?;
    let n = g.n_nodes();
    if n < 2 {
        return Err(Error::DegenerateGraph);
    }
    let degree = node_degree(g);
    let degree_centrality = degree_centrality(g)?;
    let clustering = clustering_coefficient(g);
    let closeness = closeness_centrality(g, cfg)?;
    let betweenness = betweenness_centrality(g, cfg)?;
    let mut warnings = Vec::new();
    let (eigenvector, katz, meta_alpha, lambda) = if g.edge_count() == 0 {
        warnings.push(String::from("edgeless graph: eigenvector and katz set to zero"));
        let alpha = resolve_katz_alpha(cfg.katz_alpha_rule, 0.0);
        (alloc::vec![0.0; n], alloc::vec![0.0; n], alpha, 0.0)
    } else {
        let eig = eigenvector_centrality(g, cfg)?;
        let katz = katz_centrality_with_lambda(g, cfg, eig.eigenvalue)?;
        (eig.vector, katz.scores, katz.alpha, eig.eigenvalue)
    };
    let table = MeasureTable {
        degree,
        clustering,
        closeness,
        degree_centrality,
        betweenness,
        eigenvector,
        katz,
        spectral: alloc::vec![SpectralMeta {
            source: String::new(),
            katz_alpha: meta_alpha,
            katz_beta: cfg.katz_beta,
            evc_eigenvalue: lambda,
            warnings,
        }],
    };
    table.check_invariants()?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_names_round_trip() {
        for m in Measure::ALL {
            assert_eq!(m.name().parse::<Measure>().unwrap(), m);
        }
        assert!("pagerank".parse::<Measure>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(MeasureConfig::default().validate().is_ok());
        let c = MeasureConfig { betweenness_mode: PathMode::Pivots(0), ..Default::default() };
        assert!(c.validate().is_err());
        let c = MeasureConfig { katz_alpha_rule: KatzAlphaRule::SpectralFraction(1.5), ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn auto_mode_threshold() {
        assert_eq!(PathMode::Auto.pivots_for(20_000), None);
        assert_eq!(PathMode::Auto.pivots_for(20_001), Some(256));
        assert_eq!(PathMode::Pivots(5).pivots_for(3), Some(5));
    }

    #[test]
    fn edgeless_graph_gets_zero_spectral_columns() {
        let g = CellGraph::from_edges(4, &[]).unwrap();
        let t = compute_all_measures(&g, &MeasureConfig::default()).unwrap();
        assert_eq!(t.eigenvector, alloc::vec![0.0; 4]);
        assert_eq!(t.katz, alloc::vec![0.0; 4]);
        assert_eq!(t.spectral[0].warnings.len(), 1);
        assert_eq!(t.spectral[0].katz_alpha, 0.1);
        assert!(t.closeness.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn single_node_is_degenerate() {
        let g = CellGraph::from_edges(1, &[]).unwrap();
        assert_eq!(compute_all_measures(&g, &MeasureConfig::default()), Err(Error::DegenerateGraph));
    }
}
