//! Radius-bounded kNN cell graph construction.
//!
//! Node `i` proposes an edge to `j` when `|p_i - p_j| < r` and `j` is among the
//! `k` nearest neighbours of `i` (ties at equal distance go to the lower id).
//! The directed proposals are then made undirected by union (either direction
//! suffices) or mutual (both directions required) symmetrization.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CellGraph;
use crate::kdtree::KdTree;
use crate::model::PointSet;

/// How directed kNN proposals become undirected edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetrization {
    /// Edge if either endpoint proposes it.
    #[default]
    Union,
    /// Edge only if both endpoints propose it.
    Mutual,
}

/// Graph construction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    /// Connection radius in pixels (strict `<`).
    pub radius: f64,
    /// Neighbour cap per node.
    pub k: usize,
    /// Directed-to-undirected rule.
    pub symmetrization: Symmetrization,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            radius: 100.0,
            k: 5,
            symmetrization: Symmetrization::Union,
        }
    }
}

impl BuildConfig {
    /// Checks `radius > 0` and `k >= 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!("radius {} must be > 0", self.radius)));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// A neighbour returned by [`knn_within_radius`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Node id.
    pub id: usize,
    /// Euclidean distance in pixels.
    pub distance: f64,
}

fn check_points(points: &PointSet) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyGraph);
    }
    match points
        .points
        .iter()
        .position(|p| !(p[0].is_finite() && p[1].is_finite()))
    {
        Some(index) => Err(Error::InvalidCoordinate { index }),
        None => Ok(()),
    }
}

/// Builds the undirected cell graph of a point set.
pub fn build_graph(points: &PointSet, cfg: &BuildConfig) -> Result<CellGraph> {
    cfg.validate()?;
    check_points(points)?;
    let n = points.len();
    let tree = KdTree::new(&points.points);
    let r2 = cfg.radius * cfg.radius;
    let proposals: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut ids: Vec<usize> = tree.knn_within(i, r2, cfg.k).into_iter().map(|(j, _)| j).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    let mut pairs = Vec::with_capacity(n * cfg.k);
    for (i, out) in proposals.iter().enumerate() {
        for &j in out {
            match cfg.symmetrization {
                Symmetrization::Union => pairs.push(if i < j { (i, j) } else { (j, i) }),
                Symmetrization::Mutual => {
                    if i < j && proposals[j].binary_search(&i).is_ok() {
                        pairs.push((i, j));
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(CellGraph::from_sorted_pairs(n, &pairs, Some(cfg.clone())))
}

/// The `k` nearest nodes to `query` strictly within `r`, sorted by
/// `(distance, id)`, excluding `query` itself.
///
/// Builds a throwaway index; use [`KdTree`] directly for repeated queries.
pub fn knn_within_radius(points: &PointSet, query: usize, r: f64, k: usize) -> Result<Vec<Neighbor>> {
    if query >= points.len() {
        return Err(Error::NodeOutOfRange {
            node: query,
            n_nodes: points.len(),
        });
    }
    check_points(points)?;
    let tree = KdTree::new(&points.points);
    Ok(tree
        .knn_within(query, r * r, k)
        .into_iter()
        .map(|(id, d2)| Neighbor {
            id,
            distance: libm::sqrt(d2),
        })
        .collect())
}
