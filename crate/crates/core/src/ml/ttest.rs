//! Two-sided pooled-variance Student t-test.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::measures::Measure;
use crate::model::Grade;
use crate::num::{abs, mean};

/// Result of one two-sample test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    /// t statistic, positive when the first group has the larger mean.
    pub t: f64,
    /// Degrees of freedom `n1 + n2 - 2`.
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Both groups have zero variance but different means (`t` infinite, `p = 0`).
    pub exact_separation: bool,
}

/// Pooled-variance t-test. `None` when either group has fewer than two
/// values or both groups are constant and equal.
pub fn student_t_test(a: &[f64], b: &[f64]) -> Option<TTest> {
    let (n1, n2) = (a.len(), b.len());
    if n1 < 2 || n2 < 2 {
        return None;
    }
    let (m1, m2) = (mean(a), mean(b));
    let ss = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    let df = (n1 + n2 - 2) as f64;
    let pooled = (ss(a, m1) + ss(b, m2)) / df;
    let se = libm::sqrt(pooled * (1.0 / n1 as f64 + 1.0 / n2 as f64));
    let diff = m1 - m2;
    if se == 0.0 {
        if diff == 0.0 {
            return None;
        }
        return Some(TTest {
            t: if diff > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            df,
            p_value: 0.0,
            exact_separation: true,
        });
    }
    let t = diff / se;
    Some(TTest {
        t,
        df,
        p_value: t_two_sided_p(t, df),
        exact_separation: false,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// `I_x(a, b)`, evaluated by continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

// Modified Lentz evaluation.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if abs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if abs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Grade pairs compared by [`grade_ttest`].
pub const GRADE_PAIRS: [(Grade, Grade); 3] = [(1, 2), (1, 3), (2, 3)];

/// Measure-by-grade-pair test table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestTable {
    /// Row order.
    pub measures: Vec<Measure>,
    /// Column order.
    pub pairs: Vec<(Grade, Grade)>,
    /// `entries[row][col]`; `None` where the test is undefined.
    pub entries: Vec<Vec<Option<TTest>>>,
}

impl TTestTable {
    /// Entry for one measure and grade pair.
    pub fn get(&self, measure: Measure, pair: (Grade, Grade)) -> Option<TTest> {
        let r = self.measures.iter().position(|&m| m == measure)?;
        let c = self.pairs.iter().position(|&p| p == pair)?;
        self.entries[r][c]
    }
}

/// Tests every measure for every grade pair. `samples[measure][grade]` holds
/// the per-unit values (per image means, or pooled node values).
pub fn grade_ttest(samples: &BTreeMap<Measure, BTreeMap<Grade, Vec<f64>>>) -> TTestTable {
    let empty = Vec::new();
    let measures: Vec<Measure> = Measure::ALL.to_vec();
    let entries = measures
        .iter()
        .map(|m| {
            GRADE_PAIRS
                .iter()
                .map(|(g1, g2)| {
                    let groups = samples.get(m);
                    let a = groups.and_then(|s| s.get(g1)).unwrap_or(&empty);
                    let b = groups.and_then(|s| s.get(g2)).unwrap_or(&empty);
                    student_t_test(a, b)
                })
                .collect()
        })
        .collect();
    TTestTable {
        measures,
        pairs: GRADE_PAIRS.to_vec(),
        entries,
    }
}
