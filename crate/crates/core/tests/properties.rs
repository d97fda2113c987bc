mod support;

use cliffbench_core::chem::parse_smiles;
use cliffbench_core::eval::{classify_pd, Confusion};
use cliffbench_core::featurize::{descriptor_vector, ecfp};
use cliffbench_core::mmp::{label_mmp, PotencyDirection};
use cliffbench_core::models::{Forest, ForestParams, Knn};
use cliffbench_core::nn::{Graph, Params, Tensor};
use cliffbench_core::split::{derive_mmp_sets, split_molecules, stream_rng};
use cliffbench_core::twin::twin_loss;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn finite() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn twin_loss_is_symmetric(a_s in finite(), a_t in finite(), f_s in finite(), f_t in finite(),
                              w in 0.01..5.0f64, wd in 0.0..5.0f64) {
        let x = twin_loss(a_s, a_t, f_s, f_t, w, wd);
        let y = twin_loss(a_t, a_s, f_t, f_s, w, wd);
        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        prop_assert!(x >= 0.0);
    }

    #[test]
    fn labels_are_symmetric(a in 3.0..11.0f64, b in 3.0..11.0f64) {
        let (c1, d1, x1) = label_mmp(a, b);
        let (c2, d2, x2) = label_mmp(b, a);
        prop_assert_eq!(c1, c2);
        prop_assert_eq!(x1, x2);
        let flipped = match d1 {
            PotencyDirection::FirstMoreActive => PotencyDirection::SecondMoreActive,
            PotencyDirection::SecondMoreActive => PotencyDirection::FirstMoreActive,
            PotencyDirection::Tie => PotencyDirection::Tie,
        };
        prop_assert_eq!(d2, flipped);
        prop_assert_eq!(classify_pd(a, b), d1);
    }

    #[test]
    fn mcc_bounded_and_class_symmetric(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50, tn in 0usize..50) {
        let m = Confusion::new(tp, fp, fn_, tn).mcc();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&m));
        let swapped = Confusion::new(tn, fn_, fp, tp).mcc();
        prop_assert!((m - swapped).abs() < 1e-12);
    }

    #[test]
    fn fingerprints_and_descriptors_ignore_atom_order(idx in 0usize..support::CORPUS.len(), seed in any::<u64>()) {
        let mol = parse_smiles(support::CORPUS[idx]).unwrap();
        let mut perm: Vec<usize> = (0..mol.atom_count()).collect();
        perm.shuffle(&mut stream_rng(seed, 0));
        let other = mol.permuted(&perm);
        prop_assert_eq!(ecfp(&mol, 2, 2048, false), ecfp(&other, 2, 2048, false));
        let (d1, d2) = (descriptor_vector(&mol), descriptor_vector(&other));
        for (x, y) in d1.values.iter().zip(&d2.values) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn tanimoto_is_symmetric_and_bounded(i in 0usize..support::CORPUS.len(), j in 0usize..support::CORPUS.len()) {
        let a = ecfp(&parse_smiles(support::CORPUS[i]).unwrap(), 2, 2048, false);
        let b = ecfp(&parse_smiles(support::CORPUS[j]).unwrap(), 2, 2048, false);
        let s = a.tanimoto(&b);
        prop_assert_eq!(s, b.tanimoto(&a));
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(a.tanimoto(&a), 1.0);
    }

    #[test]
    fn forest_ignores_positive_feature_scaling(seed in any::<u64>(), scale in 0.01..100.0f64) {
        let mut rng = stream_rng(seed, 0);
        use rand::Rng;
        let x: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..5.0)).collect();
        let scaled: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        let p = ForestParams { n_trees: 5, max_features: 0.66, seed, ..ForestParams::default() };
        let (f1, f2) = (Forest::fit(&x, &y, p).unwrap(), Forest::fit(&scaled, &y, p).unwrap());
        for (r, s) in x.iter().zip(&scaled) {
            prop_assert_eq!(f1.predict(r), f2.predict(s));
        }
    }

    #[test]
    fn knn_with_all_neighbours_is_the_mean(y in proptest::collection::vec(finite(), 2..20), q in finite()) {
        let rows: Vec<Vec<f64>> = (0..y.len()).map(|i| vec![i as f64]).collect();
        let knn = Knn::fit_dense(rows, y.clone(), y.len(), false).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        prop_assert!((knn.predict_dense(&[q]).unwrap() - mean).abs() < 1e-9);
    }

    #[test]
    fn molecule_splits_partition(n in 10usize..300, k in 2usize..6, seed in any::<u64>()) {
        let splits = split_molecules(n, k, 2, seed);
        prop_assert_eq!(splits.len(), 2 * k);
        for rep in splits.chunks(k) {
            let mut seen = vec![0; n];
            for s in rep {
                prop_assert_eq!(s.d_train.len() + s.d_test.len(), n);
                prop_assert!(s.d_test.len() == n / k || s.d_test.len() == n.div_ceil(k));
                for &c in &s.d_test {
                    seen[c] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn split_plans_satisfy_invariants(seed in any::<u64>()) {
        let pairs = support::criteria::synthetic_pairs(200, 600, 150, seed);
        for s in split_molecules(200, 2, 1, seed) {
            let plan = derive_mmp_sets(&s, 200, &pairs);
            prop_assert!(plan.check(200, &pairs).is_ok());
        }
    }
}

#[test]
fn dropout_preserves_expectation() {
    let params = Params::new();
    let mut g = Graph::new(&params);
    let x = g.input(Tensor::filled(200, 50, 2.0));
    let mut rng = stream_rng(3, 0);
    for p in [0.1, 0.25, 0.5] {
        let y = g.dropout(x, p, true, &mut rng);
        let v = g.value(y);
        let mean = v.data.iter().sum::<f64>() / v.len() as f64;
        // 10,000 entries: standard error of the mean is below 0.02 for p <= 0.5
        assert!((mean - 2.0).abs() < 0.08, "p = {p}: mean {mean}");
        let kept = v.data.iter().filter(|&&e| e != 0.0).count() as f64 / v.len() as f64;
        assert!((kept - (1.0 - p)).abs() < 0.03);
    }
}
