mod common;

use hedgerow::pipeline::{
    bench_json, derive_seed, format_table, run_bench, BenchConfig, EncryptedPart, Mode, TABLE_COLUMNS,
};

const MODES: [Mode; 4] = [
    Mode::Svm,
    Mode::Xgb,
    Mode::XgbEncModel(EncryptedPart::Splits),
    Mode::XgbEncModel(EncryptedPart::Leaves),
];

fn small_config(mode: Mode, samples: usize) -> BenchConfig {
    let mut cfg = BenchConfig::new(mode, samples);
    cfg.classes = 3;
    cfg.data_seed = 5;
    match mode {
        Mode::Svm => {
            cfg.features = 64;
            cfg.params = Some(common::small_params(1, &[64]));
        }
        _ => {
            cfg.trees_per_class = 16;
            cfg.features = 48;
            cfg.params = Some(common::small_params(mode.depth(), &[16]));
        }
    }
    cfg
}

#[test]
fn every_mode_matches_the_clear_pipeline() {
    for mode in MODES {
        let r = run_bench(&small_config(mode, 6)).unwrap();
        assert_eq!(r.oracle_mismatches, 0, "{mode:?}");
        assert_eq!(r.scores, r.expected, "{mode:?}");
        assert!(r.min_noise_budget >= 10, "{mode:?}: {}", r.min_noise_budget);
        let t = &r.timing;
        let parts = [t.keygen_s, t.enc_s, t.comp_s, t.dec_s];
        assert!(parts.iter().all(|&p| p >= 0.0));
        assert!(t.end_to_end_s >= parts.iter().cloned().fold(0.0, f64::max));
        assert!((0.0..=1.0).contains(&r.micro_auc));
    }
}

#[test]
fn encrypted_model_modes_agree_with_plain_model() {
    let plain = run_bench(&small_config(Mode::Xgb, 4)).unwrap();
    for part in [EncryptedPart::Splits, EncryptedPart::Leaves] {
        let enc = run_bench(&small_config(Mode::XgbEncModel(part), 4)).unwrap();
        assert_eq!(enc.scores, plain.scores, "{part:?}");
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let cfg = small_config(Mode::Xgb, 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_bench(&cfg).unwrap())
    };
    let one = run(1);
    let three = run(3);
    assert_eq!(one.scores_digest, three.scores_digest);
    assert_eq!(one.metadata.threads, 1);
    assert_eq!(three.metadata.threads, 3);
    let again = run(1);
    assert_eq!(one.scores_digest, again.scores_digest);
    assert_eq!(one.micro_auc, again.micro_auc);
}

#[test]
fn report_columns_follow_the_table_order() {
    assert_eq!(TABLE_COLUMNS, ["KeyGen", "Enc", "Comp", "Dec", "EndtoEnd", "microAUC"]);
    let reports: Vec<_> = MODES.iter().map(|&m| run_bench(&small_config(m, 2)).unwrap()).collect();
    let table = format_table(&reports);
    let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header[0], "Method");
    assert_eq!(&header[1..], &TABLE_COLUMNS[..]);
    assert_eq!(table.lines().count(), 1 + MODES.len());

    let json: serde_json::Value = serde_json::from_str(&bench_json(&reports).unwrap()).unwrap();
    let columns: Vec<&str> = json["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert_eq!(columns, TABLE_COLUMNS);
    assert_eq!(json["rows"].as_array().unwrap().len(), MODES.len());
    assert!(json["rows"][0]["metadata"]["notes"].as_array().unwrap().len() >= 2);
}

#[test]
fn seeds_are_domain_separated() {
    let m = [1u8; 32];
    assert_eq!(derive_seed(&m, "encrypt", 3), derive_seed(&m, "encrypt", 3));
    assert_ne!(derive_seed(&m, "encrypt", 3), derive_seed(&m, "encrypt", 4));
    assert_ne!(derive_seed(&m, "encrypt", 3), derive_seed(&m, "model", 3));
    assert_eq!(Mode::parse("xgb-encmodel", EncryptedPart::Leaves).unwrap(), Mode::XgbEncModel(EncryptedPart::Leaves));
    assert!(Mode::parse("forest", EncryptedPart::Splits).is_err());
}
