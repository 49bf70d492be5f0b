//! Random graph generators and brute-force reference implementations.
#![allow(dead_code)]

use std::collections::VecDeque;

use cellnet_core::{build_graph, BuildConfig, CellGraph, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// G(n, p) with n in 2..=max_n and a density drawn from a fixed menu.
pub fn random_graph(seed: u64, max_n: usize) -> CellGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let p = [0.03, 0.08, 0.15, 0.3, 0.6, 0.9][rng.random_range(0..6)];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    CellGraph::from_edges(n, &edges).unwrap()
}

/// Uniform random points in a square, built into a cell graph.
pub fn random_geometric(seed: u64, n: usize, side: f64, cfg: &BuildConfig) -> (PointSet, CellGraph) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)])
        .collect();
    let ps = PointSet::new(format!("rg{seed}"), pts, [side, side]).unwrap();
    let g = build_graph(&ps, cfg).unwrap();
    (ps, g)
}

pub fn adjacency(g: &CellGraph) -> Vec<Vec<bool>> {
    let n = g.n_nodes();
    let mut a = vec![vec![false; n]; n];
    for (i, j) in g.edges() {
        a[i][j] = true;
        a[j][i] = true;
    }
    a
}

/// Hop distances by Floyd-Warshall; `None` when unreachable.
pub fn floyd_warshall(g: &CellGraph) -> Vec<Vec<Option<u32>>> {
    let n = g.n_nodes();
    let a = adjacency(g);
    let mut d = vec![vec![None; n]; n];
    for i in 0..n {
        d[i][i] = Some(0);
        for j in 0..n {
            if a[i][j] {
                d[i][j] = Some(1);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| x + y < c) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

pub fn oracle_closeness(g: &CellGraph) -> Vec<f64> {
    let n = g.n_nodes();
    let d = floyd_warshall(g);
    (0..n)
        .map(|i| {
            let reach: Vec<u32> = (0..n).filter(|&j| j != i).filter_map(|j| d[i][j]).collect();
            if reach.is_empty() {
                return 0.0;
            }
            let r = reach.len() as f64;
            let s: u32 = reach.iter().sum();
            (r / s as f64) * (r / (n - 1) as f64)
        })
        .collect()
}

/// Distances and shortest-path counts from every source by plain BFS.
fn path_counts(g: &CellGraph) -> (Vec<Vec<Option<u32>>>, Vec<Vec<u128>>) {
    let n = g.n_nodes();
    let a = adjacency(g);
    let mut dist = vec![vec![None; n]; n];
    let mut sigma = vec![vec![0u128; n]; n];
    for s in 0..n {
        dist[s][s] = Some(0);
        sigma[s][s] = 1;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            let dv = dist[s][v].unwrap();
            for w in 0..n {
                if !a[v][w] {
                    continue;
                }
                match dist[s][w] {
                    None => {
                        dist[s][w] = Some(dv + 1);
                        sigma[s][w] = sigma[s][v];
                        q.push_back(w);
                    }
                    Some(dw) if dw == dv + 1 => sigma[s][w] += sigma[s][v],
                    _ => {}
                }
            }
        }
    }
    (dist, sigma)
}

/// Sum over unordered pairs {s, t} of the fraction of shortest s-t paths
/// through v, using sigma(s,t|v) = sigma(s,v) sigma(v,t) on geodesics.
pub fn oracle_betweenness(g: &CellGraph, normalized: bool) -> Vec<f64> {
    let n = g.n_nodes();
    let (dist, sigma) = path_counts(g);
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let Some(dst) = dist[s][t] else { continue };
            for v in (0..n).filter(|&v| v != s && v != t) {
                if let (Some(a), Some(b)) = (dist[s][v], dist[v][t]) {
                    if a + b == dst {
                        bc[v] += (sigma[s][v] * sigma[v][t]) as f64 / sigma[s][t] as f64;
                    }
                }
            }
        }
    }
    if normalized && n > 2 {
        let norm = ((n - 1) * (n - 2)) as f64 / 2.0;
        bc.iter_mut().for_each(|b| *b /= norm);
    }
    bc
}

/// Triangle scan over all neighbor pairs.
pub fn oracle_clustering(g: &CellGraph) -> Vec<f64> {
    let a = adjacency(g);
    (0..g.n_nodes())
        .map(|v| {
            let nb: Vec<usize> = (0..g.n_nodes()).filter(|&u| a[v][u]).collect();
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut tri = 0usize;
            for x in 0..k {
                for y in x + 1..k {
                    if a[nb[x]][nb[y]] {
                        tri += 1;
                    }
                }
            }
            2.0 * tri as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

pub fn oracle_degree(g: &CellGraph) -> Vec<u32> {
    adjacency(g).iter().map(|row| row.iter().filter(|&&b| b).count() as u32).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
