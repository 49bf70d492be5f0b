//! Immutable undirected graph in compressed sparse adjacency form.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::builder::BuildConfig;
use crate::error::{Error, Result};

/// Undirected simple graph over nodes `0..n_nodes`.
///
/// Neighbours of node `i` are `neighbor_ids[neighbor_offsets[i]..neighbor_offsets[i + 1]]`,
/// sorted ascending. Every edge appears once in each endpoint's list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGraph {
    n_nodes: usize,
    neighbor_offsets: Vec<usize>,
    neighbor_ids: Vec<u32>,
    build_params: Option<BuildConfig>,
    edge_count: usize,
}

impl CellGraph {
    /// Builds a graph from undirected edges. Duplicate edges (in either
    /// orientation) collapse to one; self-loops and out-of-range ids are errors.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes > u32::MAX as usize {
            return Err(Error::InvalidConfig("too many nodes".into()));
        }
        let mut pairs = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b || a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidEdge(a, b));
            }
            pairs.push(if a < b { (a, b) } else { (b, a) });
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_pairs(n_nodes, &pairs, None))
    }

    // `pairs` must be sorted, deduplicated, with a < b.
    pub(crate) fn from_sorted_pairs(
        n_nodes: usize,
        pairs: &[(usize, usize)],
        build_params: Option<BuildConfig>,
    ) -> Self {
        let mut degree = alloc::vec![0usize; n_nodes];
        for &(a, b) in pairs {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut neighbor_offsets = Vec::with_capacity(n_nodes + 1);
        neighbor_offsets.push(0);
        for d in &degree {
            let last = *neighbor_offsets.last().unwrap_or(&0);
            neighbor_offsets.push(last + d);
        }
        let mut cursor = neighbor_offsets[..n_nodes].to_vec();
        let mut neighbor_ids = alloc::vec![0u32; 2 * pairs.len()];
        // Sorted (a, b) pairs with a < b: scanning once, each node first
        // receives its lower neighbours (as b) then its higher ones (as a),
        // both in ascending order.
        for &(a, b) in pairs {
            neighbor_ids[cursor[b]] = a as u32;
            cursor[b] += 1;
        }
        for &(a, b) in pairs {
            neighbor_ids[cursor[a]] = b as u32;
            cursor[a] += 1;
        }
        let g = Self {
            n_nodes,
            neighbor_offsets,
            neighbor_ids,
            build_params,
            edge_count: pairs.len(),
        };
        debug_assert!(g.check_invariants().is_ok());
        g
    }

    /// Number of nodes.
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Parameters the graph was built with, if it came from a point set.
    pub fn build_params(&self) -> Option<&BuildConfig> {
        self.build_params.as_ref()
    }

    /// Sorted neighbours of `node`.
    #[inline]
    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbor_ids[self.neighbor_offsets[node]..self.neighbor_offsets[node + 1]]
    }

    /// Degree of `node`.
    #[inline]
    pub fn degree(&self, node: usize) -> usize {
        self.neighbor_offsets[node + 1] - self.neighbor_offsets[node]
    }

    /// Raw CSR offsets (length `n_nodes + 1`).
    pub fn neighbor_offsets(&self) -> &[usize] {
        &self.neighbor_offsets
    }

    /// Raw CSR neighbour ids.
    pub fn neighbor_ids(&self) -> &[u32] {
        &self.neighbor_ids
    }

    /// True if `a` and `b` are adjacent.
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&(b as u32)).is_ok()
    }

    /// Edges as `(a, b)` with `a < b`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_nodes).flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .map(|&b| b as usize)
                .filter(move |&b| b > a)
                .map(move |b| (a, b))
        })
    }

    /// Verifies symmetry, sortedness, absence of self-loops and duplicates.
    /// Used after deserializing a graph file.
    pub fn check_invariants(&self) -> Result<()> {
        if self.neighbor_offsets.len() != self.n_nodes + 1
            || self.neighbor_offsets.first() != Some(&0)
            || self.neighbor_offsets.last() != Some(&self.neighbor_ids.len())
            || self.neighbor_ids.len() != 2 * self.edge_count
        {
            return Err(Error::InvalidConfig("inconsistent adjacency arrays".into()));
        }
        for i in 0..self.n_nodes {
            if self.neighbor_offsets[i] > self.neighbor_offsets[i + 1] {
                return Err(Error::InvalidConfig("offsets not monotone".into()));
            }
            let nb = self.neighbors(i);
            for w in nb.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidEdge(i, w[1] as usize));
                }
            }
            for &j in nb {
                let j = j as usize;
                if j == i || j >= self.n_nodes || !self.has_edge(j, i) {
                    return Err(Error::InvalidEdge(i, j));
                }
            }
        }
        Ok(())
    }

    /// Graph with nodes relabelled so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_nodes {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let edges: Vec<(usize, usize)> = self.edges().map(|(a, b)| (perm[a], perm[b])).collect();
        let mut g = Self::from_edges(self.n_nodes, &edges)?;
        g.build_params = self.build_params.clone();
        Ok(g)
    }
}
