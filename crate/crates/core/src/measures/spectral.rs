//! Eigenvector and Katz centrality by iteration over the sparse adjacency.

use alloc::vec::Vec;

use super::{KatzAlphaRule, MeasureConfig};
use crate::error::{Error, Result};
use crate::graph::CellGraph;
use crate::num::{abs, l2_norm, sqrt};

/// Cap applied by [`KatzAlphaRule::SpectralFraction`].
pub const KATZ_ALPHA_CAP: f64 = 0.1;

/// Dominant eigenpair of the adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    /// Unit-L2, nonnegative eigenvector.
    pub vector: Vec<f64>,
    /// Rayleigh-quotient eigenvalue estimate.
    pub eigenvalue: f64,
    /// `max |(A x - lambda x)_i|`.
    pub residual: f64,
    /// Iterations used.
    pub iterations: usize,
}

/// Katz scores with the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct KatzResult {
    /// Unit-L2 scores.
    pub scores: Vec<f64>,
    /// Resolved attenuation factor.
    pub alpha: f64,
    /// Baseline.
    pub beta: f64,
    /// Largest adjacency eigenvalue used in the convergence check.
    pub lambda_max: f64,
    /// L2 norm divided out of the raw fixed point.
    pub raw_norm: f64,
}

// out = A x
fn adjacency_mul(g: &CellGraph, x: &[f64], out: &mut [f64]) {
    let row = |i: usize| g.neighbors(i).iter().map(|&j| x[j as usize]).sum::<f64>();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = row(i));
    }
    #[cfg(not(feature = "parallel"))]
    for (i, o) in out.iter_mut().enumerate() {
        *o = row(i);
    }
}

fn residual_inf(ax: &[f64], x: &[f64], lambda: f64) -> f64 {
    ax.iter()
        .zip(x)
        .map(|(a, v)| abs(a - lambda * v))
        .fold(0.0, f64::max)
}

/// Power iteration for `x = A x / lambda` from the uniform positive vector.
///
/// Iterates on `A + I` (same eigenvectors, and no oscillation on bipartite
/// graphs). Stops once the L-infinity step is below `evc_tolerance` and the
/// residual satisfies `|A x - lambda x|_inf <= 10 * tol * lambda`.
pub fn eigenvector_centrality(g: &CellGraph, cfg: &MeasureConfig) -> Result<Eigenpair> {
    let n = g.n_nodes();
    if g.edge_count() == 0 {
        return Err(Error::EigenvectorUndefined);
    }
    let tol = cfg.evc_tolerance;
    let mut x = alloc::vec![1.0 / sqrt(n as f64); n];
    let mut ax = alloc::vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut step = f64::INFINITY;
    for iteration in 0..=cfg.evc_max_iterations {
        adjacency_mul(g, &x, &mut ax);
        let lambda: f64 = ax.iter().zip(&x).map(|(a, v)| a * v).sum();
        residual = residual_inf(&ax, &x, lambda);
        // Near-degenerate leading pairs stall the step rule long after the
        // residual is small, so a tight residual alone also ends the loop.
        if (step < tol && residual <= 10.0 * tol * lambda) || residual <= tol * lambda {
            return Ok(Eigenpair {
                vector: x,
                eigenvalue: lambda,
                residual,
                iterations: iteration,
            });
        }
        if iteration == cfg.evc_max_iterations {
            break;
        }
        let mut next: Vec<f64> = ax.iter().zip(&x).map(|(a, v)| a + v).collect();
        let norm = l2_norm(&next);
        next.iter_mut().for_each(|v| *v /= norm);
        step = next.iter().zip(&x).map(|(a, b)| abs(a - b)).fold(0.0, f64::max);
        x = next;
    }
    Err(Error::NotConverged { residual })
}

/// Resolves the Katz attenuation for a graph with largest eigenvalue `lambda_max`.
pub fn resolve_katz_alpha(rule: KatzAlphaRule, lambda_max: f64) -> f64 {
    match rule {
        KatzAlphaRule::Fixed(alpha) => alpha,
        KatzAlphaRule::SpectralFraction(c) if lambda_max > 0.0 => (c / lambda_max).min(KATZ_ALPHA_CAP),
        KatzAlphaRule::SpectralFraction(_) => KATZ_ALPHA_CAP,
    }
}

/// Katz centrality; the dominant eigenvalue is estimated by power iteration
/// (zero for an edgeless graph).
pub fn katz_centrality(g: &CellGraph, cfg: &MeasureConfig) -> Result<KatzResult> {
    let lambda_max = if g.edge_count() == 0 {
        0.0
    } else {
        eigenvector_centrality(g, cfg)?.eigenvalue
    };
    katz_centrality_with_lambda(g, cfg, lambda_max)
}

/// Fixed-point iteration `x <- alpha A x + beta` given the dominant eigenvalue.
/// Scores are L2-normalised.
pub fn katz_centrality_with_lambda(g: &CellGraph, cfg: &MeasureConfig, lambda_max: f64) -> Result<KatzResult> {
    let n = g.n_nodes();
    let alpha = resolve_katz_alpha(cfg.katz_alpha_rule, lambda_max);
    let beta = cfg.katz_beta;
    if alpha * lambda_max >= 1.0 {
        return Err(Error::KatzDivergentAlpha { alpha, lambda_max });
    }
    let mut x = alloc::vec![beta; n];
    let mut ax = alloc::vec![0.0; n];
    let mut converged = n == 0;
    let mut step = f64::INFINITY;
    for _ in 0..cfg.evc_max_iterations {
        adjacency_mul(g, &x, &mut ax);
        step = 0.0;
        let mut scale = 0.0f64;
        for (xi, &a) in x.iter_mut().zip(&ax) {
            let next = alpha * a + beta;
            step = step.max(abs(next - *xi));
            scale = scale.max(abs(next));
            *xi = next;
        }
        if step <= cfg.katz_tolerance * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { residual: step });
    }
    let norm = l2_norm(&x);
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(KatzResult {
        scores: x,
        alpha,
        beta,
        lambda_max,
        raw_norm: norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        abs(a - b) <= tol
    }

    #[test]
    fn triangle_eigenpair() {
        let k3 = CellGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let e = eigenvector_centrality(&k3, &MeasureConfig::default()).unwrap();
        assert!(close(e.eigenvalue, 2.0, 1e-9));
        for v in &e.vector {
            assert!(close(*v, 1.0 / sqrt(3.0), 1e-9));
        }
    }

    #[test]
    fn path_and_star_eigenpairs() {
        let cfg = MeasureConfig {
            evc_tolerance: 1e-12,
            ..MeasureConfig::default()
        };
        let p3 = CellGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let e = eigenvector_centrality(&p3, &cfg).unwrap();
        assert!(close(e.eigenvalue, sqrt(2.0), 1e-9));
        assert!(close(e.vector[0], 0.5, 1e-9) && close(e.vector[1], sqrt(0.5), 1e-9));
        let star = CellGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let e = eigenvector_centrality(&star, &cfg).unwrap();
        assert!(close(e.eigenvalue, 2.0, 1e-9));
        assert!(close(e.vector[0], 1.0 / sqrt(2.0), 1e-9));
        assert!(close(e.vector[3], 1.0 / (2.0 * sqrt(2.0)), 1e-9));
    }

    #[test]
    fn edgeless_eigenvector_is_an_error() {
        let g = CellGraph::from_edges(3, &[]).unwrap();
        assert_eq!(
            eigenvector_centrality(&g, &MeasureConfig::default()),
            Err(Error::EigenvectorUndefined)
        );
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let g = CellGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let cfg = MeasureConfig {
            evc_max_iterations: 1,
            evc_tolerance: 1e-15,
            ..MeasureConfig::default()
        };
        assert!(matches!(eigenvector_centrality(&g, &cfg), Err(Error::NotConverged { residual }) if residual > 0.0));
    }

    #[test]
    fn katz_triangle_fixed_alpha() {
        let k3 = CellGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let cfg = MeasureConfig {
            katz_alpha_rule: KatzAlphaRule::Fixed(0.1),
            ..MeasureConfig::default()
        };
        let k = katz_centrality(&k3, &cfg).unwrap();
        for v in &k.scores {
            assert!(close(*v, 1.0 / sqrt(3.0), 1e-12));
        }
        // Unnormalised fixed point of x = 1 + 0.2 x.
        for v in &k.scores {
            assert!(close(v * k.raw_norm, 1.25, 1e-12));
        }
    }

    #[test]
    fn spectral_fraction_is_capped() {
        assert_eq!(resolve_katz_alpha(KatzAlphaRule::SpectralFraction(0.9), 2.0), 0.1);
        assert!(close(resolve_katz_alpha(KatzAlphaRule::SpectralFraction(0.9), 18.0), 0.05, 1e-15));
    }

    #[test]
    fn divergent_alpha_rejected() {
        let k3 = CellGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let cfg = MeasureConfig {
            katz_alpha_rule: KatzAlphaRule::Fixed(0.5),
            ..MeasureConfig::default()
        };
        assert!(matches!(katz_centrality(&k3, &cfg), Err(Error::KatzDivergentAlpha { .. })));
    }
}
