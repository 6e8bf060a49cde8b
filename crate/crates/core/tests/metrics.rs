use hedgerow::metrics::{accuracy, micro_auc};
use hedgerow::Error;
use proptest::prelude::*;

/// Pairwise count over every positive/negative pair.
fn brute_force_auc(scores: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (row, &l) in scores.iter().zip(labels) {
        for (c, &s) in row.iter().enumerate() {
            if c == l {
                pos.push(s);
            } else {
                neg.push(s);
            }
        }
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..6, 1usize..40).prop_flat_map(|(classes, samples)| {
        // coarse score grid so ties are common
        let row = prop::collection::vec((0i32..8).prop_map(|v| v as f64 / 4.0), classes);
        (
            prop::collection::vec(row, samples),
            prop::collection::vec(0..classes, samples),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matches_pairwise_oracle((scores, labels) in instance()) {
        let fast = micro_auc(&scores, &labels).unwrap();
        prop_assert!((fast - brute_force_auc(&scores, &labels)).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&fast));
    }

    #[test]
    fn matches_pairwise_oracle_continuous(
        scores in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 50),
        labels in prop::collection::vec(0usize..4, 50),
    ) {
        let fast = micro_auc(&scores, &labels).unwrap();
        prop_assert!((fast - brute_force_auc(&scores, &labels)).abs() <= 1e-9);
    }
}

#[test]
fn large_instance_matches_oracle() {
    // 100 samples × 11 classes: 100 · 1000 = 10^5 pooled pairs
    let labels: Vec<usize> = (0..100).map(|i| (i * 7) % 11).collect();
    let scores: Vec<Vec<f64>> = (0..100)
        .map(|i| (0..11).map(|c| ((i * 31 + c * 17) % 23) as f64 + f64::from(u8::from(c == labels[i])) * 5.0).collect())
        .collect();
    let fast = micro_auc(&scores, &labels).unwrap();
    assert!((fast - brute_force_auc(&scores, &labels)).abs() <= 1e-9);
}

#[test]
fn examples() {
    let labels = [0, 2, 1];
    let indicator: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| (0..3).map(|c| f64::from(u8::from(c == l))).collect())
        .collect();
    assert_eq!(micro_auc(&indicator, &labels).unwrap(), 1.0);
    let negated: Vec<Vec<f64>> = indicator.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    assert_eq!(micro_auc(&negated, &labels).unwrap(), 0.0);

    let scores = vec![
        vec![0.9, 0.1, 0.3],
        vec![0.2, 0.8, 0.2],
        vec![0.4, 0.4, 0.5],
        vec![0.1, 0.6, 0.3],
        vec![0.7, 0.2, 0.7],
    ];
    let labels = [0, 1, 2, 2, 0];
    // positives: 0.9 0.8 0.5 0.3 0.7; negatives: 0.1 0.3 0.2 0.2 0.4 0.4 0.1 0.6 0.2 0.7
    // wins: 10 + 10 + 8 + 5.5 + 9.5 = 43 of 50
    assert!((micro_auc(&scores, &labels).unwrap() - 43.0 / 50.0).abs() <= 1e-12);
    assert!((brute_force_auc(&scores, &labels) - 43.0 / 50.0).abs() <= 1e-12);
    assert_eq!(accuracy(&scores, &labels).unwrap(), 4.0 / 5.0);
}

#[test]
fn errors() {
    assert!(matches!(micro_auc(&[vec![1.0]], &[0]), Err(Error::DegenerateLabels)));
    assert!(matches!(micro_auc(&[vec![1.0, 0.0]], &[0, 1]), Err(Error::Shape(_))));
    assert!(matches!(micro_auc(&[vec![1.0, 0.0]], &[2]), Err(Error::Shape(_))));
    assert!(matches!(micro_auc(&[vec![f64::NAN, 0.0]], &[0]), Err(Error::Shape(_))));
}
