use cellnet_core::ml::svm::{kernel_matrix, kkt_gap, solve_binary, KKT_TOLERANCE};
use cellnet_core::ml::ttest::t_two_sided_p;
use cellnet_core::ml::{
    cross_validate, forward_select, sequential_forward_selection, student_t_test, train_svm, CvConfig, Fitted, SampleSet,
    SfsConfig, SvmParams,
};
use cellnet_core::Grade;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller.
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<Grade>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (g, cx) in [(1, 0.0), (2, 10.0)] {
        for _ in 0..20 {
            x.push(vec![cx + gauss(&mut rng), gauss(&mut rng)]);
            y.push(g);
        }
    }
    (x, y)
}

#[test]
fn separated_blobs_train_perfectly() {
    let (x, y) = blobs(3);
    let m = train_svm(&x, &y, SvmParams { c: 1.0, gamma: 0.5 }).unwrap();
    for (r, &g) in x.iter().zip(&y) {
        assert_eq!(m.predict(r).unwrap().grade, g);
    }
    assert_eq!(m.predict(&[0.0, 0.0]).unwrap().grade, 1);
    assert_eq!(m.predict(&[10.0, 0.0]).unwrap().grade, 2);
    for mach in &m.machines {
        for &i in &mach.support_indices {
            assert_eq!(m.predict(&x[i]).unwrap().grade, y[i]);
        }
    }
}

#[test]
fn xor_with_rbf() {
    let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let y = vec![1, 1, 2, 2];
    let m = train_svm(&x, &y, SvmParams { c: 100.0, gamma: 1.0 }).unwrap();
    let values: Vec<f64> = x.iter().map(|r| m.decision_values(r).unwrap()[0]).collect();
    assert!(values[0] > 0.0 && values[1] > 0.0 && values[2] < 0.0 && values[3] < 0.0);
}

#[test]
fn kkt_and_box_constraints_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..30 {
        let n = rng.random_range(6..60);
        let d = rng.random_range(1..6);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| gauss(&mut rng)).collect()).collect();
        let y: Vec<Grade> = (0..n).map(|i| if i < 2 { (i % 2 + 1) as Grade } else { rng.random_range(1..=3) }).collect();
        let c = [0.1, 1.0, 10.0, 100.0][trial % 4];
        let gamma = [0.01, 0.1, 1.0][trial % 3];
        let m = train_svm(&x, &y, SvmParams { c, gamma }).unwrap();
        assert!(m.max_kkt_gap(&x, &y).unwrap() <= KKT_TOLERANCE);
        for mach in &m.machines {
            assert!(mach.dual_coef.iter().all(|a| a.abs() <= c * (1.0 + 1e-12)));
        }
        assert!(m.feature_std.iter().all(|&s| s > 0.0));
        // Direct check on the raw binary solver as well.
        let z: Vec<Vec<f64>> = x.iter().map(|r| m.transform(r).unwrap()).collect();
        let signs: Vec<f64> = y.iter().map(|&g| if g == 1 { 1.0 } else { -1.0 }).collect();
        let k = kernel_matrix(&z, gamma);
        let sol = solve_binary(&k, &signs, c);
        assert!(kkt_gap(&k, &signs, &sol.alpha, c) <= KKT_TOLERANCE);
    }
}

#[test]
fn decision_is_invariant_under_feature_permutation() {
    let (x, y) = blobs(4);
    let x3: Vec<Vec<f64>> = x.iter().enumerate().map(|(i, r)| vec![r[0], r[1], (i % 7) as f64]).collect();
    let perm = [2, 0, 1];
    let xp: Vec<Vec<f64>> = x3.iter().map(|r| perm.iter().map(|&p| r[p]).collect()).collect();
    let params = SvmParams { c: 1.0, gamma: 0.3 };
    let (a, b) = (train_svm(&x3, &y, params).unwrap(), train_svm(&xp, &y, params).unwrap());
    for (r, rp) in x3.iter().zip(&xp) {
        let (da, db) = (a.decision_values(r).unwrap(), b.decision_values(rp).unwrap());
        assert!((da[0] - db[0]).abs() < 1e-9);
    }
}

fn noise_set(seed: u64, n_images: usize, n_features: usize, plant: Option<usize>) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grades: Vec<Grade> = (0..n_images).map(|i| (i % 3 + 1) as Grade).collect();
    let rows = grades
        .iter()
        .map(|&g| {
            let mut r: Vec<f64> = (0..n_features).map(|_| gauss(&mut rng)).collect();
            if let Some(c) = plant {
                r[c] = f64::from(g);
            }
            r
        })
        .collect();
    let folds = cellnet_core::folds::stratified_assignment(&grades, 3, seed);
    SampleSet::from_rows(rows, grades, folds).unwrap()
}

#[test]
fn standardisation_ignores_held_out_rows() {
    let base = noise_set(1, 30, 4, None);
    let train: Vec<usize> = (0..30).filter(|&i| base.folds[i] != 0).collect();
    let mut only_train = base.clone();
    for i in 0..30 {
        if base.folds[i] == 0 {
            // Perturb held-out rows wildly; the trained model must not move.
            only_train.rows[i] = vec![1e6; 4];
        }
    }
    let params = SvmParams::default();
    let cols = [0, 1, 2, 3];
    assert_eq!(
        Fitted::train(&base, &train, &cols, params).unwrap(),
        Fitted::train(&only_train, &train, &cols, params).unwrap()
    );
}

#[test]
fn label_column_gives_perfect_cv() {
    let set = noise_set(2, 30, 5, Some(2));
    let r = cross_validate(&set, &CvConfig::default()).unwrap();
    assert_eq!(r.mean_accuracy, 1.0);
    for (i, row) in r.confusion.iter().enumerate() {
        assert_eq!(row.iter().sum::<usize>(), 10);
        assert_eq!(row[i], 10);
    }
}

#[test]
fn pure_noise_is_near_chance() {
    let mut accs = Vec::new();
    for seed in 0..20 {
        let set = noise_set(100 + seed, 60, 5, None);
        let r = cross_validate(&set, &CvConfig { sfs: None, seed, ..CvConfig::default() }).unwrap();
        accs.push(r.mean_accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 1.0 / 3.0).abs() <= 0.15, "mean {mean}");
    let inside = accs.iter().filter(|a| (*a - 1.0 / 3.0).abs() <= 0.15).count();
    assert!(inside >= 18, "{accs:?}");
}

#[test]
fn cv_report_is_reproducible() {
    let set = noise_set(5, 24, 6, Some(4));
    let cfg = CvConfig {
        sfs: Some(SfsConfig { max_features: 3, patience: 2, ..SfsConfig::default() }),
        grid: SvmParams::grid(&[1.0, 10.0], &[0.1]),
        seed: 7,
        ..CvConfig::default()
    };
    let a = serde_json::to_string(&cross_validate(&set, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&cross_validate(&set, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sfs_picks_planted_feature_first() {
    let set = noise_set(9, 45, 12, Some(6));
    let sfs = SfsConfig { max_features: 4, patience: 2, ..SfsConfig::default() };
    let r = sequential_forward_selection(&set.rows, &set.grades, &set.folds, &sfs).unwrap();
    assert_eq!(r.order[0], 6);
    assert_eq!(r.curve[0], 1.0);
    assert_eq!(r.selected, vec![6]);
    // Running best is non-decreasing and peaks at the returned prefix.
    let best = r.best_curve();
    assert!(best.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(best[r.selected.len() - 1], *best.last().unwrap());
}

#[test]
fn sfs_duplicate_columns_take_lower_index() {
    let mut set = noise_set(10, 30, 8, Some(3));
    for r in &mut set.rows {
        r[7] = r[3];
    }
    let sfs = SfsConfig { max_features: 2, patience: 1, ..SfsConfig::default() };
    let r = sequential_forward_selection(&set.rows, &set.grades, &set.folds, &sfs).unwrap();
    assert_eq!(r.order[0], 3);
}

#[test]
fn forward_select_stops_on_patience() {
    let curve = [0.5, 0.7, 0.6, 0.65, 0.7, 0.69];
    let cfg = SfsConfig { max_features: 30, patience: 3, ..SfsConfig::default() };
    let r = forward_select(10, &cfg, |s| Ok(curve[s.len() - 1])).unwrap();
    assert_eq!(r.curve, vec![0.5, 0.7, 0.6, 0.65, 0.7]);
    assert_eq!(r.selected.len(), 2);
}

// Two-sided tail of Student's t by adaptive Simpson on s = |t| + u / (1 - u).
fn integrated_p(t: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let f = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let s = t.abs() + u / (1.0 - u);
        (ln_c - (df + 1.0) / 2.0 * (1.0 + s * s / df).ln()).exp() / ((1.0 - u) * (1.0 - u))
    };
    #[allow(clippy::too_many_arguments)]
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            return left + right + (left + right - whole) / 15.0;
        }
        simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(0.0), f(0.5), f(1.0));
    let whole = (fa + 4.0 * fm + fb) / 6.0;
    2.0 * simpson(&f, 0.0, 1.0, fa, fm, fb, whole, 1e-13, 50)
}

#[test]
fn p_values_match_numerical_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let (n1, n2) = (rng.random_range(2..40), rng.random_range(2..40));
        let shift = rng.random_range(0.0..2.0);
        let a: Vec<f64> = (0..n1).map(|_| gauss(&mut rng)).collect();
        let b: Vec<f64> = (0..n2).map(|_| gauss(&mut rng) + shift).collect();
        let t = student_t_test(&a, &b).unwrap();
        let oracle = integrated_p(t.t, t.df);
        assert!((t.p_value - oracle).abs() <= 1e-6, "t={} df={} p={} oracle={oracle}", t.t, t.df, t.p_value);
        let st = statrs::distribution::StudentsT::new(0.0, 1.0, t.df).unwrap();
        let cross = 2.0 * (1.0 - statrs::distribution::ContinuousCDF::cdf(&st, t.t.abs()));
        assert!((t.p_value - cross).abs() <= 1e-8);
    }
}

#[test]
fn textbook_quantiles() {
    // Two-sided 5% and 1% critical values of t with 58 degrees of freedom.
    assert!((t_two_sided_p(2.001717, 58.0) - 0.05).abs() < 1e-6);
    assert!((t_two_sided_p(2.663287, 58.0) - 0.01).abs() < 1e-6);
    assert!((t_two_sided_p(12.706205, 1.0) - 0.05).abs() < 1e-6);
}

#[test]
fn separated_normals_give_tiny_p() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a: Vec<f64> = (0..30).map(|_| gauss(&mut rng)).collect();
    let b: Vec<f64> = (0..30).map(|_| gauss(&mut rng) + 5.0).collect();
    let t = student_t_test(&a, &b).unwrap();
    assert!(t.p_value < 1e-10, "{}", t.p_value);
    assert!(t.p_value > 0.0);
    let same = student_t_test(&a, &a).unwrap();
    assert_eq!((same.t, same.p_value), (0.0, 1.0));
    let sep = student_t_test(&[0.0; 4], &[1.0; 4]).unwrap();
    assert!(sep.exact_separation && sep.p_value == 0.0);
}
