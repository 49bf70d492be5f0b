mod common;

use cellnet_core::measures::{eigenvector_centrality, katz_centrality, KatzAlphaRule};
use cellnet_core::{BuildConfig, CellGraph, MeasureConfig};
use common::*;
use nalgebra::{DMatrix, DVector};

fn direct_katz(g: &CellGraph, alpha: f64, beta: f64) -> Vec<f64> {
    let n = g.n_nodes();
    let mut m = DMatrix::<f64>::identity(n, n);
    for (i, j) in g.edges() {
        m[(i, j)] -= alpha;
        m[(j, i)] -= alpha;
    }
    let x = m.lu().solve(&DVector::from_element(n, beta)).unwrap();
    let norm = x.norm();
    x.iter().map(|v| v / norm).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    max_abs_diff(a, b) / scale
}

fn test_graphs() -> Vec<CellGraph> {
    let mut gs: Vec<CellGraph> = (0..40).map(|s| random_graph(s, 120)).collect();
    for (seed, n) in [(1, 100), (2, 250), (3, 500), (4, 500)] {
        let side = (n as f64).sqrt() * 60.0;
        gs.push(random_geometric(seed, n, side, &BuildConfig::default()).1);
    }
    gs.into_iter().filter(|g| g.edge_count() > 0).collect()
}

#[test]
fn eigenvector_residual_bound() {
    let cfg = MeasureConfig::default();
    for g in test_graphs() {
        let e = eigenvector_centrality(&g, &cfg).unwrap();
        assert!(e.residual <= 10.0 * cfg.evc_tolerance * e.eigenvalue, "{} > bound", e.residual);
        assert!(e.vector.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn katz_matches_direct_solve() {
    let cfg = MeasureConfig::default();
    for g in test_graphs() {
        let k = katz_centrality(&g, &cfg).unwrap();
        let direct = direct_katz(&g, k.alpha, k.beta);
        assert!(rel_err(&k.scores, &direct) <= 1e-8, "rel err {}", rel_err(&k.scores, &direct));
    }
}

#[test]
fn katz_path_fixture() {
    let p3 = CellGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let cfg = MeasureConfig {
        katz_alpha_rule: KatzAlphaRule::Fixed(0.1),
        ..MeasureConfig::default()
    };
    let k = katz_centrality(&p3, &cfg).unwrap();
    // (I - 0.1 A) x = 1  =>  x = (1.1, 1.2, 1.1) / 0.98
    let raw = [1.1 / 0.98, 1.2 / 0.98, 1.1 / 0.98];
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (s, r) in k.scores.iter().zip(raw) {
        assert!((s - r / norm).abs() < 1e-12);
    }
}
