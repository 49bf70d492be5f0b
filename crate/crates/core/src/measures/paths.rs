//! Shortest-path measures: closeness and Brandes betweenness.
//!
//! Sources are processed in fixed-size chunks; each chunk accumulates into
//! its own buffer and buffers are added in chunk order. The result is
//! therefore identical whether chunks run sequentially or on a thread pool.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::MeasureConfig;
use crate::error::Result;
use crate::graph::CellGraph;

const MIN_CHUNK: usize = 32;
const MAX_CHUNKS: usize = 64;

/// `m` distinct source nodes drawn with `seed`, ascending. Returns every node
/// when `m >= n`.
pub fn select_pivots(n: usize, m: usize, seed: u64) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    picked
}

fn sources_for(n: usize, pivots: Option<usize>, seed: u64) -> Vec<usize> {
    match pivots {
        None => (0..n).collect(),
        Some(m) => select_pivots(n, m, seed),
    }
}

// Sums `width * n` accumulators over all sources.
fn reduce_over_sources<F>(n: usize, width: usize, sources: &[usize], per_chunk: F) -> Vec<f64>
where
    F: Fn(&[usize], &mut [f64]) + Sync,
{
    let chunk = MIN_CHUNK.max(sources.len().div_ceil(MAX_CHUNKS));
    let mut acc = alloc::vec![0.0; width * n];
    let add = |acc: &mut [f64], part: &[f64]| {
        for (a, p) in acc.iter_mut().zip(part) {
            *a += p;
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let partials: Vec<Vec<f64>> = sources
            .par_chunks(chunk)
            .map(|c| {
                let mut part = alloc::vec![0.0; width * n];
                per_chunk(c, &mut part);
                part
            })
            .collect();
        for part in &partials {
            add(&mut acc, part);
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut part = alloc::vec![0.0; width * n];
        for c in sources.chunks(chunk) {
            part.iter_mut().for_each(|p| *p = 0.0);
            per_chunk(c, &mut part);
            add(&mut acc, &part);
        }
    }
    acc
}

/// Closeness with reachable-count scaling:
/// `CC(i) = (R / sum d) * (R / (N - 1))` where `R` counts nodes reachable from `i`.
///
/// Isolated nodes get 0. In pivot mode both `R` and `sum d` are estimated
/// from the sampled sources and scaled by `N / m`.
pub fn closeness_centrality(g: &CellGraph, cfg: &MeasureConfig) -> Result<Vec<f64>> {
    let n = g.n_nodes();
    if n < 2 {
        return Ok(alloc::vec![0.0; n]);
    }
    let pivots = cfg.closeness_mode.pivots_for(n);
    let sources = sources_for(n, pivots, cfg.rng_seed);
    let acc = reduce_over_sources(n, 2, &sources, |chunk, part| {
        let mut dist = alloc::vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        let mut seen = Vec::new();
        for &s in chunk {
            dist[s] = 0;
            queue.push_back(s);
            seen.push(s);
            while let Some(v) = queue.pop_front() {
                let dv = dist[v];
                if v != s {
                    part[v] += f64::from(dv);
                    part[n + v] += 1.0;
                }
                for &w in g.neighbors(v) {
                    let w = w as usize;
                    if dist[w] == u32::MAX {
                        dist[w] = dv + 1;
                        queue.push_back(w);
                        seen.push(w);
                    }
                }
            }
            for v in seen.drain(..) {
                dist[v] = u32::MAX;
            }
        }
    });
    let scale = n as f64 / sources.len() as f64;
    let others = (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let total = acc[i] * scale;
            let reach = (acc[n + i] * scale).min(others);
            if total <= 0.0 {
                0.0
            } else {
                (reach / total) * (reach / others)
            }
        })
        .collect())
}

/// Brandes betweenness for an undirected graph; each unordered pair counts once.
///
/// Pivot mode accumulates over the sampled sources and scales by `N / m`.
/// With `bc_normalized` the result is divided by `(N - 1)(N - 2) / 2`.
pub fn betweenness_centrality(g: &CellGraph, cfg: &MeasureConfig) -> Result<Vec<f64>> {
    let n = g.n_nodes();
    let pivots = cfg.betweenness_mode.pivots_for(n);
    let sources = sources_for(n, pivots, cfg.rng_seed);
    if sources.is_empty() {
        return Ok(Vec::new());
    }
    let acc = reduce_over_sources(n, 1, &sources, |chunk, part| {
        let mut dist = alloc::vec![-1i64; n];
        let mut sigma = alloc::vec![0.0f64; n];
        let mut delta = alloc::vec![0.0f64; n];
        let mut order: Vec<usize> = Vec::new();
        let mut queue = VecDeque::new();
        for &s in chunk {
            dist[s] = 0;
            sigma[s] = 1.0;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                for &w in g.neighbors(v) {
                    let w = w as usize;
                    if dist[w] < 0 {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                    if dist[w] == dist[v] + 1 {
                        sigma[w] += sigma[v];
                    }
                }
            }
            for &w in order.iter().rev() {
                let coeff = (1.0 + delta[w]) / sigma[w];
                for &v in g.neighbors(w) {
                    let v = v as usize;
                    if dist[v] == dist[w] - 1 {
                        delta[v] += sigma[v] * coeff;
                    }
                }
                if w != s {
                    part[w] += delta[w];
                }
            }
            for v in order.drain(..) {
                dist[v] = -1;
                sigma[v] = 0.0;
                delta[v] = 0.0;
            }
        }
    });
    let scale = n as f64 / sources.len() as f64;
    let norm = if cfg.bc_normalized && n > 2 {
        ((n - 1) * (n - 2)) as f64 / 2.0
    } else {
        1.0
    };
    Ok(acc.into_iter().map(|b| b * scale / 2.0 / norm).collect())
}
