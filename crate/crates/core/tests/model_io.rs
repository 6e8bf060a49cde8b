use hedgerow::encoding::{encode_feature, TernaryFeature};
use hedgerow::model_io::{
    build_layout, build_svm_layout, ensemble_from_file, ensemble_to_file, gen_synthetic, load_dataset,
    load_ensemble, load_svm, pack_client_input, save_dataset, save_ensemble, save_svm, svm_from_file,
    svm_to_file, unpack_codes, Dataset, EnsembleFile, FeatureLayout, SvmFile, TreeFile, LABEL_NOISE,
};
use hedgerow::trees::{predict_class, Node};
use hedgerow::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const T: u64 = (1 << 40) + 1;

/// The sample tree whose root tests feature 25486 against -0.5.
fn figure_tree_file() -> EnsembleFile {
    EnsembleFile {
        classes: 1,
        trees_per_class: 1,
        scale_bits: 20,
        trees: vec![TreeFile {
            feat: [25486, 1203, 8812],
            thresh: [-0.5, 0.5, -0.5],
            leaves: [0.125, -0.0625, 0.03125, -0.25],
        }],
    }
}

#[test]
fn figure_tree_root_split_code() {
    let e = ensemble_from_file(&figure_tree_file(), T).unwrap();
    assert_eq!(e.trees[0].features[0], 25486);
    assert_eq!(e.trees[0].splits[0].bit(), 1);
    assert_eq!(e.trees[0].splits[1].bit(), 0);
    assert_eq!(e.trees[0].leaves, [131072, -65536, 32768, -262144]);
}

fn random_file(rng: &mut ChaCha20Rng, s: usize, k: usize, d: usize) -> EnsembleFile {
    EnsembleFile {
        classes: s,
        trees_per_class: k,
        scale_bits: 20,
        trees: (0..s * k)
            .map(|_| TreeFile {
                feat: [0; 3].map(|_| rng.gen_range(0..d)),
                thresh: [0; 3].map(|_| if rng.gen_bool(0.5) { 0.5 } else { -0.5 }),
                leaves: [0; 4].map(|_| rng.gen_range(-0.1..0.1)),
            })
            .collect(),
    }
}

#[test]
fn padding_to_power_of_two() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let file = random_file(&mut rng, 3, 100, 50);
    let e = ensemble_from_file(&file, T).unwrap();
    assert_eq!(e.trees_per_class, 128);
    assert_eq!(e.trees.len(), 3 * 128);
    for c in 0..3 {
        for j in 0..128 {
            let zero = j >= 100;
            assert_eq!(e.tree(c, j).leaves == [0; 4], zero || file.trees[c * 100 + j].leaves == [0.0; 4]);
        }
    }
    let x: Vec<TernaryFeature> = (0..50).map(|i| TernaryFeature::ALL[i % 3]).collect();
    let float = file.class_scores(&x);
    let fixed = e.class_sums_clear(&x).unwrap();
    for (a, b) in fixed.iter().zip(&float) {
        assert!((*a as f64 / (1 << 20) as f64 - b).abs() <= 100.0 / (1 << 20) as f64);
    }
}

#[test]
fn load_save_is_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let file = random_file(&mut rng, 4, 12, 30);
    let first = ensemble_from_file(&file, T).unwrap();
    let path = dir.path().join("ensemble.json");
    save_ensemble(&path, &first).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let second = load_ensemble(&path, T).unwrap();
    assert_eq!(first, second);
    save_ensemble(&path, &second).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(ensemble_from_file(&ensemble_to_file(&second), T).unwrap(), second);

    let svm = SvmFile {
        classes: 2,
        features: 3,
        scale_bits: 20,
        weights: vec![0.5, -0.1, 0.3, 0.0, 1.0, -1.0],
        bias: vec![0.01, -0.2],
    };
    let m = svm_from_file(&svm, T).unwrap();
    assert_eq!(m.weights[0][0], 524288);
    let path = dir.path().join("svm.json");
    save_svm(&path, &m).unwrap();
    assert_eq!(load_svm(&path, T).unwrap(), m);
    assert_eq!(svm_from_file(&svm_to_file(&m), T).unwrap(), m);

    let zero = SvmFile { weights: vec![0.0; 6], bias: vec![0.0; 2], ..svm };
    let z = svm_from_file(&zero, T).unwrap();
    assert!(z.weights.iter().flatten().chain(&z.bias).all(|&v| v == 0));
}

#[test]
fn loader_rejections() {
    let mut bad = figure_tree_file();
    bad.trees[0].thresh[2] = 0.3;
    assert!(matches!(ensemble_from_file(&bad, T), Err(Error::InadmissibleThreshold(_))));

    let mut big = figure_tree_file();
    big.trees[0].leaves = [1.0e6, 0.0, 0.0, 0.0];
    match ensemble_from_file(&big, T) {
        Err(Error::Overflow { bound, required_bits }) => {
            assert_eq!(bound, 1_000_000u128 << 20);
            assert_eq!(required_bits, 41);
        }
        other => panic!("expected overflow, got {other:?}"),
    }

    let mut short = figure_tree_file();
    short.trees.clear();
    assert!(matches!(ensemble_from_file(&short, T), Err(Error::Model(_))));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\"classes\": 1,").unwrap();
    assert!(matches!(load_ensemble(&path, T), Err(Error::Json(_))));
}

#[test]
fn layout_examples() {
    let file = EnsembleFile {
        classes: 1,
        trees_per_class: 2,
        scale_bits: 20,
        trees: vec![
            TreeFile { feat: [4, 1, 2], thresh: [0.5; 3], leaves: [0.0; 4] },
            TreeFile { feat: [9, 3, 3], thresh: [0.5; 3], leaves: [0.0; 4] },
        ],
    };
    let e = ensemble_from_file(&file, T).unwrap();
    let layout = build_layout(&e, 16, None).unwrap();
    let roots: Vec<(usize, usize)> = layout
        .nodes
        .iter()
        .filter(|n| n.stream == Node::Root)
        .map(|n| (n.slot, n.feature))
        .collect();
    assert_eq!(roots, vec![(0, 4), (1, 9)]);
    assert_eq!(layout.required_features(), 10);

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let e = ensemble_from_file(&random_file(&mut rng, 11, 128, 100), T).unwrap();
    let spill = build_layout(&e, 1024, None).unwrap();
    assert_eq!((spill.classes_per_block, spill.blocks), (8, 2));
    assert_eq!(spill.nodes.len(), 3 * 11 * 128);
    for block in 0..spill.blocks {
        for node in Node::ALL {
            let mut slots: Vec<usize> = spill
                .nodes
                .iter()
                .filter(|n| n.block == block && n.stream == node)
                .map(|n| n.slot)
                .collect();
            let len = slots.len();
            slots.sort_unstable();
            slots.dedup();
            assert_eq!(slots.len(), len, "slots are distinct within a stream");
        }
    }
    let again = build_layout(&e, 1024, None).unwrap();
    assert_eq!(spill.to_json().unwrap(), again.to_json().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("layout.json");
    spill.save(&path).unwrap();
    assert_eq!(FeatureLayout::load(&path).unwrap(), spill);
}

#[test]
fn packing_examples() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let e = ensemble_from_file(&random_file(&mut rng, 2, 4, 20), T).unwrap();
    let svm = svm_from_file(
        &SvmFile { classes: 2, features: 20, scale_bits: 20, weights: vec![0.1; 40], bias: vec![0.0; 2] },
        T,
    )
    .unwrap();
    let layout = build_layout(&e, 64, Some(&svm)).unwrap();

    let zeros = vec![TernaryFeature::Neutral; 20];
    let b = pack_client_input(&zeros, &layout).unwrap();
    for p in &b.xgb {
        for node in Node::ALL {
            assert!(p.x0.get(node).iter().chain(p.x2.get(node)).all(|&v| v == 0));
        }
    }
    assert!(b.svm.as_ref().unwrap().iter().all(|&v| v == 0));

    let dels = vec![TernaryFeature::Deletion; 20];
    let b = pack_client_input(&dels, &layout).unwrap();
    for n in &layout.nodes {
        assert_eq!(b.xgb[n.block].x0.get(n.stream)[n.slot], 1);
    }
    assert_eq!(&b.svm.as_ref().unwrap()[..20], &[-1; 20][..]);

    assert!(matches!(
        pack_client_input(&zeros[..5], &layout),
        Err(Error::FeatureOutOfRange { .. })
    ));

    let svm_only = build_svm_layout(&svm, 64).unwrap();
    assert_eq!(pack_client_input(&dels, &svm_only).unwrap().xgb.len(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unpacking_recovers_codes(seed in any::<u64>(), values in prop::collection::vec(0usize..3, 40)) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let e = ensemble_from_file(&random_file(&mut rng, 3, 8, 40), T).unwrap();
        let layout = build_layout(&e, 32, None).unwrap();
        let x: Vec<TernaryFeature> = values.iter().map(|&i| TernaryFeature::ALL[i]).collect();
        let bundle = pack_client_input(&x, &layout).unwrap();
        for (feature, x2, x0) in unpack_codes(&bundle, &layout) {
            let c = encode_feature(x[feature]);
            prop_assert_eq!((x2, x0), (c.x2, c.x0));
        }
    }
}

#[test]
fn dataset_csv_roundtrip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let ds = Dataset {
        rows: vec![vec![-2, 0, 1], vec![2, -1, 0]],
        labels: Some(vec![1, 0]),
    };
    save_dataset(&path, &ds).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "-2,0,1,1\n2,-1,0,0\n");
    assert_eq!(load_dataset(&path, true).unwrap(), ds);
    let unlabelled = load_dataset(&path, false).unwrap();
    assert_eq!(unlabelled.features(), 4);
    assert!(unlabelled.labels.is_none());
    assert_eq!(
        ds.sample(0).unwrap(),
        vec![TernaryFeature::Deletion, TernaryFeature::Neutral, TernaryFeature::Amplification]
    );
    assert!(matches!(ds.validate(Some(1)), Err(Error::Dataset(_))));

    std::fs::write(&path, "0,3\n").unwrap();
    assert!(matches!(load_dataset(&path, false), Err(Error::Dataset(_))));
    std::fs::write(&path, "0,1\n0\n").unwrap();
    assert!(load_dataset(&path, false).is_err());
    std::fs::write(&path, "0,x\n").unwrap();
    assert!(matches!(load_dataset(&path, false), Err(Error::Dataset(_))));
}

#[test]
fn synthetic_is_deterministic() {
    let a = gen_synthetic(42, 4, 8, 30, 50).unwrap();
    let b = gen_synthetic(42, 4, 8, 30, 50).unwrap();
    assert_eq!(a.ensemble_file, b.ensemble_file);
    assert_eq!(a.svm_file, b.svm_file);
    assert_eq!(a.dataset, b.dataset);
    let c = gen_synthetic(43, 4, 8, 30, 50).unwrap();
    assert_ne!(a.dataset, c.dataset);
}

#[test]
fn synthetic_labels_follow_the_ensemble() {
    let syn = gen_synthetic(7, 11, 128, 2048, 1000).unwrap();
    assert!(syn
        .ensemble_file
        .trees
        .iter()
        .flat_map(|t| t.thresh)
        .all(|th| th == 0.5 || th == -0.5));
    let labels = syn.dataset.labels.as_ref().unwrap();
    let agree = (0..1000)
        .filter(|&i| {
            let x = syn.dataset.sample(i).unwrap();
            predict_class(&syn.ensemble_file.class_scores(&x)).unwrap() == labels[i]
        })
        .count();
    let rate = agree as f64 / 1000.0;
    assert!((rate - (1.0 - LABEL_NOISE)).abs() <= 0.03, "agreement {rate}");
    syn.dataset.validate(Some(11)).unwrap();
    syn.ensemble(T).unwrap();
    syn.svm(T).unwrap();
}
