mod common;

use common::*;
use geoaudit::metrics::{pearson, rate_curves, roc, spearman, threshold_grid, Rate};
use proptest::collection::vec;
use proptest::prelude::*;

/// Scores on a coarse grid (so ties and on-threshold values are common) with both classes present.
fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    vec((0u32..=20, any::<bool>()), 2..200).prop_map(|mut v| {
        v[0].1 = true;
        v[1].1 = false;
        v.into_iter().map(|(s, y)| (f64::from(s) / 20.0, y)).unzip()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn counts_match_brute_force((s, y) in scored(), n in 2usize..60) {
        let grid = threshold_grid(n).unwrap();
        let suite = rate_curves(&s, &y, &grid).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let c = suite.counts[i];
            prop_assert_eq!((c.tp, c.fp, c.tn, c.fn_), brute_confusion(&s, &y, t));
        }
    }

    #[test]
    fn complementary_rates_sum_to_one((s, y) in scored()) {
        let grid = threshold_grid(101).unwrap();
        let suite = rate_curves(&s, &y, &grid).unwrap();
        for i in 0..grid.len() {
            for (a, b) in [(Rate::Tpr, Rate::Fnr), (Rate::Tnr, Rate::Fpr), (Rate::Ppv, Rate::Fdr), (Rate::Npv, Rate::For)] {
                match (suite.value(a, i), suite.value(b, i)) {
                    (Some(u), Some(v)) => prop_assert!((u + v - 1.0).abs() < 1e-12),
                    (None, None) => {}
                    other => prop_assert!(false, "one side undefined: {:?}", other),
                }
            }
        }
    }

    #[test]
    fn positive_rates_fall_with_threshold((s, y) in scored()) {
        let suite = rate_curves(&s, &y, &threshold_grid(101).unwrap()).unwrap();
        for r in [Rate::Tpr, Rate::Fpr] {
            let v: Vec<f64> = suite.rate(r).into_iter().map(Option::unwrap).collect();
            prop_assert!(v.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn auc_is_mann_whitney((s, y) in scored()) {
        let res = roc(&s, &y).unwrap();
        prop_assert!((res.auc - mann_whitney(&s, &y)).abs() < 1e-9);
        prop_assert_eq!(res.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(res.points.last().copied(), Some((1.0, 1.0)));
    }

    #[test]
    fn correlations_are_bounded_and_invariant(xs in vec(-100.0f64..100.0, 3..60), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x.sin() + i as f64 * 0.01).collect();
        prop_assume!(xs.iter().any(|&x| x != xs[0]));
        let r = pearson(&xs, &ys).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        let affine: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        prop_assert!((pearson(&affine, &ys).unwrap() - r).abs() < 1e-9);
        let rho = spearman(&xs, &ys).unwrap();
        let cubed: Vec<f64> = xs.iter().map(|x| x * x * x + x).collect();
        prop_assert!((spearman(&cubed, &ys).unwrap() - rho).abs() < 1e-12);
    }
}
