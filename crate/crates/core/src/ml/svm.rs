//! RBF-kernel C-SVM trained by SMO, one-vs-one for more than two classes.
//!
//! The binary solver follows the LIBSVM scheme: working pairs chosen by
//! maximal violation with second-order gain, stopping when the KKT gap
//! `m(alpha) - M(alpha)` drops below [`KKT_TOLERANCE`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Grade;

/// Stopping tolerance on the KKT gap.
pub const KKT_TOLERANCE: f64 = 1e-3;
/// Model file format version.
pub const MODEL_VERSION: u32 = 1;

const TAU: f64 = 1e-12;

/// Penalty and RBF bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Soft-margin penalty `C`.
    pub c: f64,
    /// RBF bandwidth `gamma` in `exp(-gamma |x - z|^2)`.
    pub gamma: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 10.0, gamma: 0.1 }
    }
}

impl SvmParams {
    /// Cartesian product `cs x gammas`, C-major.
    pub fn grid(cs: &[f64], gammas: &[f64]) -> Vec<SvmParams> {
        cs.iter()
            .flat_map(|&c| gammas.iter().map(move |&gamma| SvmParams { c, gamma }))
            .collect()
    }

    /// `C in {0.1, 1, 10, 100}`, `gamma in {0.001, 0.01, 0.1, 1}`.
    pub fn default_grid() -> Vec<SvmParams> {
        Self::grid(&[0.1, 1.0, 10.0, 100.0], &[0.001, 0.01, 0.1, 1.0])
    }
}

#[inline]
fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, z)| (x - z) * (x - z)).sum();
    libm::exp(-gamma * d2)
}

/// Dense RBF kernel matrix, row-major.
pub fn kernel_matrix(rows: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = rows.len();
    let mut k = alloc::vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(gamma, &rows[i], &rows[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Dual solution of one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    /// Multipliers, `0 <= alpha_i <= C`.
    pub alpha: Vec<f64>,
    /// Offset; decision is `sum alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    /// SMO iterations.
    pub iterations: usize,
}

fn gradient(kernel: &[f64], y: &[f64], alpha: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|t| {
            let row = &kernel[t * n..(t + 1) * n];
            let qa: f64 = (0..n).map(|s| y[t] * y[s] * row[s] * alpha[s]).sum();
            qa - 1.0
        })
        .collect()
}

fn at_upper(a: f64, c: f64) -> bool {
    a >= c
}

fn at_lower(a: f64) -> bool {
    a <= 0.0
}

/// KKT gap `m(alpha) - M(alpha)` of a dual point; `<= KKT_TOLERANCE` at a
/// solver-accepted optimum.
pub fn kkt_gap(kernel: &[f64], y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let g = gradient(kernel, y, alpha);
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..y.len() {
        let v = -y[t] * g[t];
        let in_up = (y[t] > 0.0 && !at_upper(alpha[t], c)) || (y[t] < 0.0 && !at_lower(alpha[t]));
        let in_low = (y[t] > 0.0 && !at_lower(alpha[t])) || (y[t] < 0.0 && !at_upper(alpha[t], c));
        if in_up {
            up = up.max(v);
        }
        if in_low {
            low = low.min(v);
        }
    }
    if up == f64::NEG_INFINITY || low == f64::INFINITY {
        0.0
    } else {
        (up - low).max(0.0)
    }
}

/// Solves `min 1/2 a'Qa - e'a` s.t. `y'a = 0`, `0 <= a <= C`, with
/// `Q_ij = y_i y_j K_ij`. `y` entries must be `+1` or `-1`.
pub fn solve_binary(kernel: &[f64], y: &[f64], c: f64) -> BinarySolution {
    let n = y.len();
    let mut alpha = alloc::vec![0.0; n];
    let mut g = alloc::vec![-1.0; n];
    let max_iter = (100 * n).max(1_000_000);
    let mut iterations = 0;
    while iterations < max_iter {
        // i: maximal -y_t G_t over I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let candidate = if y[t] > 0.0 { !at_upper(alpha[t], c) } else { !at_lower(alpha[t]) };
            let v = -y[t] * g[t];
            if candidate && v > gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let ki = &kernel[i * n..(i + 1) * n];
        // j: best second-order gain over I_low.
        let mut gmin = f64::INFINITY;
        let mut best_obj = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..n {
            let candidate = if y[t] > 0.0 { !at_lower(alpha[t]) } else { !at_upper(alpha[t], c) };
            if !candidate {
                continue;
            }
            let v = -y[t] * g[t];
            gmin = gmin.min(v);
            let diff = gmax - v;
            if diff > 0.0 {
                let mut quad = ki[i] + kernel[t * n + t] - 2.0 * ki[t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -(diff * diff) / quad;
                if obj < best_obj {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if gmax - gmin < KKT_TOLERANCE || j == usize::MAX {
            break;
        }
        iterations += 1;
        let kj = &kernel[j * n..(j + 1) * n];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * ki[j];
        if y[i] != y[j] {
            let mut quad = ki[i] + kj[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = ki[i] + kj[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            g[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }
    // Offset from free vectors, else the midpoint of the feasible interval.
    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * g[t];
        if at_upper(alpha[t], c) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    BinarySolution { alpha, rho, iterations }
}

/// One pairwise classifier: positive class `positive` versus `negative`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    /// Class voted for on a positive decision value.
    pub positive: Grade,
    /// Class voted for otherwise.
    pub negative: Grade,
    /// Standardised support vectors.
    pub support_vectors: Vec<Vec<f64>>,
    /// Training-row index of each support vector.
    pub support_indices: Vec<usize>,
    /// `alpha_i y_i` per support vector; `|coef| <= C`.
    pub dual_coef: Vec<f64>,
    /// Offset.
    pub rho: f64,
}

impl BinaryMachine {
    /// Decision value on a standardised row.
    pub fn decision(&self, gamma: f64, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf(gamma, sv, z))
            .sum::<f64>()
            - self.rho
    }
}

/// Trained multi-class model with its standardisation and feature selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// File format version.
    pub version: u32,
    /// Length of the raw feature vectors the model accepts.
    pub input_len: usize,
    /// Raw feature indices used, in order. Constant training columns are dropped.
    pub selected_features: Vec<usize>,
    /// Training mean per used feature.
    pub feature_mean: Vec<f64>,
    /// Training standard deviation per used feature (all `> 0`).
    pub feature_std: Vec<f64>,
    /// Penalty.
    pub c: f64,
    /// RBF bandwidth.
    pub gamma: f64,
    /// Sorted class labels.
    pub classes: Vec<Grade>,
    /// One machine per class pair `(a, b)`, `a < b`, in lexicographic order.
    pub machines: Vec<BinaryMachine>,
}

/// Predicted grade with summed pairwise decision values per class.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Voted grade.
    pub grade: Grade,
    /// Summed decision value per class.
    pub scores: BTreeMap<Grade, f64>,
}

fn check_rows(x: &[Vec<f64>], y: &[Grade]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::EmptyInput("training rows"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let width = x[0].len();
    for (row, r) in x.iter().enumerate() {
        if r.len() != width {
            return Err(Error::DimensionMismatch(format!("row {row} has {} features, expected {width}", r.len())));
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row, col });
        }
    }
    Ok(width)
}

/// Trains on every column of `x`.
pub fn train_svm(x: &[Vec<f64>], y: &[Grade], params: SvmParams) -> Result<SvmModel> {
    let width = x.first().map_or(0, Vec::len);
    let all: Vec<usize> = (0..width).collect();
    train_svm_columns(x, y, &all, params)
}

/// Trains on the listed columns of `x`. Columns are z-scored with training
/// statistics; constant ones are dropped.
pub fn train_svm_columns(x: &[Vec<f64>], y: &[Grade], columns: &[usize], params: SvmParams) -> Result<SvmModel> {
    let width = check_rows(x, y)?;
    if !(params.c > 0.0 && params.gamma > 0.0) {
        return Err(Error::InvalidConfig("C and gamma must be > 0".into()));
    }
    if let Some(&bad) = columns.iter().find(|&&c| c >= width) {
        return Err(Error::DimensionMismatch(format!("column {bad} out of range {width}")));
    }
    let mut classes: Vec<Grade> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let n = x.len() as f64;
    let mut selected = Vec::new();
    let mut feature_mean = Vec::new();
    let mut feature_std = Vec::new();
    for &c in columns {
        let mean = x.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = x.iter().map(|r| (r[c] - mean) * (r[c] - mean)).sum::<f64>() / n;
        let std = libm::sqrt(var);
        if std > 1e-12 * (1.0 + libm::fabs(mean)) {
            selected.push(c);
            feature_mean.push(mean);
            feature_std.push(std);
        }
    }
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| standardize(r, &selected, &feature_mean, &feature_std))
        .collect();
    let mut machines = Vec::new();
    for (ai, &a) in classes.iter().enumerate() {
        for &b in &classes[ai + 1..] {
            let idx: Vec<usize> = (0..y.len()).filter(|&t| y[t] == a || y[t] == b).collect();
            let rows: Vec<Vec<f64>> = idx.iter().map(|&t| z[t].clone()).collect();
            let signs: Vec<f64> = idx.iter().map(|&t| if y[t] == a { 1.0 } else { -1.0 }).collect();
            let kernel = kernel_matrix(&rows, params.gamma);
            let sol = solve_binary(&kernel, &signs, params.c);
            let mut m = BinaryMachine {
                positive: a,
                negative: b,
                support_vectors: Vec::new(),
                support_indices: Vec::new(),
                dual_coef: Vec::new(),
                rho: sol.rho,
            };
            for (k, &alpha) in sol.alpha.iter().enumerate() {
                if alpha > 0.0 {
                    m.support_vectors.push(rows[k].clone());
                    m.support_indices.push(idx[k]);
                    m.dual_coef.push(alpha * signs[k]);
                }
            }
            machines.push(m);
        }
    }
    Ok(SvmModel {
        version: MODEL_VERSION,
        input_len: width,
        selected_features: selected,
        feature_mean,
        feature_std,
        c: params.c,
        gamma: params.gamma,
        classes,
        machines,
    })
}

fn standardize(row: &[f64], selected: &[usize], mean: &[f64], std: &[f64]) -> Vec<f64> {
    selected
        .iter()
        .zip(mean.iter().zip(std))
        .map(|(&c, (m, s))| (row[c] - m) / s)
        .collect()
}

impl SvmModel {
    /// Standardised, selected view of a raw feature row.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len {
            return Err(Error::LayoutMismatch {
                expected: self.input_len,
                found: x.len(),
            });
        }
        Ok(standardize(x, &self.selected_features, &self.feature_mean, &self.feature_std))
    }

    /// Pairwise decision values in machine order.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.transform(x)?;
        Ok(self.machines.iter().map(|m| m.decision(self.gamma, &z)).collect())
    }

    /// Pairwise vote; ties go to the larger summed decision value, then the lower grade.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let values = self.decision_values(x)?;
        let mut votes: BTreeMap<Grade, usize> = self.classes.iter().map(|&c| (c, 0)).collect();
        let mut scores: BTreeMap<Grade, f64> = self.classes.iter().map(|&c| (c, 0.0)).collect();
        for (m, f) in self.machines.iter().zip(values) {
            let winner = if f > 0.0 { m.positive } else { m.negative };
            *votes.entry(winner).or_default() += 1;
            *scores.entry(m.positive).or_default() += f;
            *scores.entry(m.negative).or_default() -= f;
        }
        let mut grade = self.classes[0];
        for &c in &self.classes[1..] {
            let better = votes[&c] > votes[&grade] || (votes[&c] == votes[&grade] && scores[&c] > scores[&grade]);
            if better {
                grade = c;
            }
        }
        Ok(Prediction { grade, scores })
    }

    /// Largest KKT gap over the pairwise problems, recomputed from the stored
    /// duals and the original training rows.
    pub fn max_kkt_gap(&self, x: &[Vec<f64>], y: &[Grade]) -> Result<f64> {
        let z: Vec<Vec<f64>> = x.iter().map(|r| self.transform(r)).collect::<Result<_>>()?;
        let mut worst = 0.0f64;
        for m in &self.machines {
            let idx: Vec<usize> = (0..y.len()).filter(|&t| y[t] == m.positive || y[t] == m.negative).collect();
            let rows: Vec<Vec<f64>> = idx.iter().map(|&t| z[t].clone()).collect();
            let signs: Vec<f64> = idx.iter().map(|&t| if y[t] == m.positive { 1.0 } else { -1.0 }).collect();
            let mut alpha = alloc::vec![0.0; idx.len()];
            for (sv, coef) in m.support_indices.iter().zip(&m.dual_coef) {
                if let Some(k) = idx.iter().position(|t| t == sv) {
                    alpha[k] = coef * signs[k];
                }
            }
            worst = worst.max(kkt_gap(&kernel_matrix(&rows, self.gamma), &signs, &alpha, self.c));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn xor_is_separable_with_rbf() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![1, 1, 2, 2];
        let model = train_svm(&x, &y, SvmParams { c: 100.0, gamma: 1.0 }).unwrap();
        for (r, &label) in x.iter().zip(&y) {
            assert_eq!(model.predict(r).unwrap().grade, label);
        }
        assert!(model.max_kkt_gap(&x, &y).unwrap() <= KKT_TOLERANCE);
        for m in &model.machines {
            assert!(m.dual_coef.iter().all(|a| a.abs() <= 100.0 + 1e-12));
        }
    }

    #[test]
    fn single_class_and_bad_input() {
        let x = vec![vec![0.0], vec![1.0]];
        assert_eq!(train_svm(&x, &[2, 2], SvmParams::default()), Err(Error::SingleClass));
        let bad = vec![vec![0.0], vec![f64::NAN]];
        assert_eq!(
            train_svm(&bad, &[1, 2], SvmParams::default()),
            Err(Error::NonFiniteFeature { row: 1, col: 0 })
        );
    }

    #[test]
    fn predict_rejects_wrong_length() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let m = train_svm(&x, &[1, 2], SvmParams::default()).unwrap();
        assert!(matches!(m.predict(&[0.0]), Err(Error::LayoutMismatch { expected: 2, found: 1 })));
    }

    #[test]
    fn constant_columns_dropped() {
        let x = vec![vec![5.0, 0.0], vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]];
        let m = train_svm(&x, &[1, 1, 2, 2], SvmParams::default()).unwrap();
        assert_eq!(m.selected_features, vec![1]);
        assert!(m.feature_std.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn grid_order() {
        let g = SvmParams::default_grid();
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], SvmParams { c: 0.1, gamma: 0.001 });
        assert_eq!(g[1], SvmParams { c: 0.1, gamma: 0.01 });
        assert_eq!(g[15], SvmParams { c: 100.0, gamma: 1.0 });
    }
}
