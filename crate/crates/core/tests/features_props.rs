use cellnet_core::aggregation::{aggregate_features, aggregate_measures};
use cellnet_core::features::featurize_columns;
use cellnet_core::{featurize, feature_layout, FeatureConfig, FeatureKind, Measure, MeasureTable};
use proptest::prelude::*;

fn table_strategy() -> impl Strategy<Value = MeasureTable> {
    (1usize..80).prop_flat_map(|n| {
        let real = || prop::collection::vec(0.0f64..1.0, n);
        // Small integer ranges make constant columns and repeated values common.
        let lumpy = || prop::collection::vec((0u32..3).prop_map(|v| f64::from(v) * 0.25), n);
        (
            prop::collection::vec(0u32..12, n),
            lumpy(),
            real(),
            lumpy(),
            real(),
            real(),
            prop::bool::ANY,
        )
            .prop_map(move |(degree, clustering, closeness, betweenness, eigenvector, katz, constant)| {
                let dc = degree.iter().map(|&d| f64::from(d) / 11.0).collect();
                MeasureTable {
                    degree,
                    clustering,
                    closeness,
                    degree_centrality: dc,
                    betweenness,
                    eigenvector,
                    katz: if constant { vec![0.5; n] } else { katz },
                    spectral: Vec::new(),
                }
            })
    })
}

fn slices(cfg: &FeatureConfig, m: Measure, values: &[f64]) -> (Vec<f64>, Vec<f64>, [f64; 3]) {
    let layout = feature_layout(cfg);
    let pick = |f: &dyn Fn(&FeatureKind) -> bool| -> Vec<f64> {
        layout
            .iter()
            .zip(values)
            .filter(|(e, _)| e.measure == m && f(&e.kind))
            .map(|(_, v)| *v)
            .collect()
    };
    let counts = pick(&|k| matches!(k, FeatureKind::HistCount(_)));
    let edges = pick(&|k| matches!(k, FeatureKind::BinEdge(_)));
    let stats = pick(&|k| matches!(k, FeatureKind::Max | FeatureKind::Mean | FeatureKind::Std));
    (counts, edges, [stats[0], stats[1], stats[2]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mass_is_conserved(t in table_strategy(), bins in 1usize..15) {
        for cfg in [FeatureConfig::uniform(bins), FeatureConfig::interpretable()] {
            let fv = featurize(&t, &cfg).unwrap();
            prop_assert_eq!(fv.values.len(), fv.layout.len());
            for m in Measure::ALL {
                let (counts, edges, _) = slices(&cfg, m, &fv.values);
                prop_assert_eq!(counts.iter().sum::<f64>(), t.n_nodes() as f64);
                prop_assert_eq!(edges.len(), counts.len() + 1);
                prop_assert!(edges.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn node_order_is_irrelevant(t in table_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..t.n_nodes()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let cfg = FeatureConfig::default();
        prop_assert_eq!(featurize(&t, &cfg).unwrap(), featurize(&t.select_rows(&order), &cfg).unwrap());
    }

    #[test]
    fn constant_columns(t in table_strategy()) {
        let cfg = FeatureConfig::default();
        let fv = featurize(&t, &cfg).unwrap();
        for m in Measure::ALL {
            let col = t.values(m);
            if col.iter().all(|&v| v == col[0]) {
                let (counts, edges, stats) = slices(&cfg, m, &fv.values);
                prop_assert_eq!(counts[0], t.n_nodes() as f64);
                prop_assert!(counts[1..].iter().all(|&c| c == 0.0));
                prop_assert_eq!(edges[0], col[0]);
                prop_assert_eq!(*edges.last().unwrap(), col[0] + 1.0);
                prop_assert_eq!(stats, [col[0], col[0], 0.0]);
            }
        }
    }

    #[test]
    fn scenario_two_is_featurize_of_concatenation(a in table_strategy(), b in table_strategy()) {
        let cfg = FeatureConfig::default();
        let joined = aggregate_measures(&[a.clone(), b.clone()]).unwrap();
        prop_assert_eq!(joined.n_nodes(), a.n_nodes() + b.n_nodes());
        let manual = featurize_columns(
            |m| a.values(m).into_iter().chain(b.values(m)).collect(),
            a.n_nodes() + b.n_nodes(),
            &cfg,
        ).unwrap();
        prop_assert_eq!(featurize(&joined, &cfg).unwrap(), manual);
        // Mean of the concatenation is the node-weighted mean of the parts.
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (da, db, dj) = (a.values(Measure::Degree), b.values(Measure::Degree), joined.values(Measure::Degree));
        let weighted = (mean(&da) * da.len() as f64 + mean(&db) * db.len() as f64) / dj.len() as f64;
        prop_assert!((mean(&dj) - weighted).abs() <= 1e-9 * weighted.abs().max(1.0));
    }

    #[test]
    fn feature_averaging_identities(v in table_strategy(), w in table_strategy(), k in 1usize..6) {
        let cfg = FeatureConfig::default();
        let (fv, fw) = (featurize(&v, &cfg).unwrap(), featurize(&w, &cfg).unwrap());
        let mut batch = vec![fv.clone(); k];
        batch.push(fw.clone());
        let avg = aggregate_features(&batch).unwrap();
        for ((a, x), y) in avg.values.iter().zip(&fv.values).zip(&fw.values) {
            let want = (k as f64 * x + y) / (k as f64 + 1.0);
            prop_assert!((a - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
        batch.reverse();
        let rev = aggregate_features(&batch).unwrap();
        for (a, b) in avg.values.iter().zip(&rev.values) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

#[test]
fn single_table_aggregation_is_identity() {
    let t = MeasureTable {
        degree: vec![1, 2, 1],
        clustering: vec![0.0; 3],
        closeness: vec![2.0 / 3.0, 1.0, 2.0 / 3.0],
        degree_centrality: vec![0.5, 1.0, 0.5],
        betweenness: vec![0.0, 1.0, 0.0],
        eigenvector: vec![0.5, 0.5f64.sqrt(), 0.5],
        katz: vec![0.5; 3],
        spectral: Vec::new(),
    };
    assert_eq!(aggregate_measures(std::slice::from_ref(&t)).unwrap(), t);
    let joined = aggregate_measures(&[t.clone(), t.select_rows(&[0, 1])]).unwrap();
    assert_eq!(joined.degree, vec![1, 2, 1, 1, 2]);
}
