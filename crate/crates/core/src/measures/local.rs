use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::CellGraph;

/// Number of neighbours of each node.
pub fn node_degree(g: &CellGraph) -> Vec<u32> {
    (0..g.n_nodes()).map(|i| g.degree(i) as u32).collect()
}

/// `deg / (N - 1)`.
pub fn degree_centrality(g: &CellGraph) -> Result<Vec<f64>> {
    let n = g.n_nodes();
    if n < 2 {
        return Err(Error::DegenerateGraph);
    }
    let denom = (n - 1) as f64;
    Ok((0..n).map(|i| g.degree(i) as f64 / denom).collect())
}

/// `2 Tri(v) / (deg (deg - 1))`, with 0 for nodes of degree below 2.
///
/// Triangles are counted by intersecting each node's sorted neighbour list
/// with its neighbours' lists; every triangle through `v` is seen twice.
pub fn clustering_coefficient(g: &CellGraph) -> Vec<f64> {
    (0..g.n_nodes())
        .map(|v| {
            let nv = g.neighbors(v);
            let d = nv.len();
            if d < 2 {
                return 0.0;
            }
            let twice_tri: usize = nv
                .iter()
                .map(|&u| sorted_intersection_len(nv, g.neighbors(u as usize)))
                .sum();
            twice_tri as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}
