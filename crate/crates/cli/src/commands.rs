use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use hedgerow::model_io::{
    build_layout, build_svm_layout, gen_synthetic, load_dataset, load_ensemble, load_svm,
    pack_client_input, save_dataset, FeatureLayout,
};
use hedgerow::pipeline::{
    bench_json, decrypt_scores, derive_seed, encrypt_bundle_with, format_table, run_bench,
    seed_from_text, BenchConfig, EncryptedPart, EvalReport, Mode, SvmServer, XgbServer,
};
use hedgerow::trees::BlockLayout;
use hedgerow_he::{keygen as he_keygen, Backend, HeContext, HeError, HeParams};
use rand::rngs::OsRng;
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::exchange::{
    read_input, read_json, read_results, sample_dir, write_input, write_json, write_results,
    InputManifest, ResultManifest, MANIFEST_FILE, TIMING_FILE,
};
use crate::keys::{load_decryptor, load_encryptor, load_params, load_server, write_keys};
use crate::{BenchArgs, BenchMode, DecryptArgs, EncryptArgs, GenArgs, InferArgs, KeygenArgs, LayoutArgs, ModeArg};

/// Seed text hashed to 32 bytes, or fresh system randomness.
fn master_seed(text: Option<&str>) -> [u8; 32] {
    match text {
        Some(t) => seed_from_text(t),
        None => {
            let mut seed = [0u8; 32];
            OsRng.fill_bytes(&mut seed);
            seed
        }
    }
}

fn check_fingerprint(found: &str, params: &HeParams) -> Result<()> {
    if found == params.fingerprint().to_hex() {
        Ok(())
    } else {
        Err(anyhow::Error::new(HeError::FingerprintMismatch).context("input was produced under different parameters"))
    }
}

#[derive(Serialize)]
struct PhaseTiming {
    phase: &'static str,
    seconds: f64,
}

fn record_timing(dir: &Path, phase: &'static str, seconds: f64) -> Result<()> {
    eprintln!("{phase}: {seconds:.3}s");
    write_json(&dir.join(TIMING_FILE), &PhaseTiming { phase, seconds })
}

pub fn keygen(a: &KeygenArgs) -> Result<()> {
    let mut params = HeParams::from_preset_name(&a.preset)?;
    if !a.sum_widths.is_empty() {
        params.sum_widths = a.sum_widths.clone();
        params.validate()?;
    }
    let seed = master_seed(a.seed.as_deref());
    let start = Instant::now();
    let ctx = HeContext::new(params.clone())?;
    let (sk, pk, ek) = he_keygen(&ctx, derive_seed(&seed, "keygen", 0));
    let seconds = start.elapsed().as_secs_f64();
    write_keys(&a.out, &params, Some(&sk), &pk, &ek)?;
    if let Some(server) = &a.server_out {
        write_keys(server, &params, None, &pk, &ek)?;
    }
    record_timing(&a.out, "keygen", seconds)
}

pub fn gen(a: &GenArgs) -> Result<()> {
    let syn = gen_synthetic(a.seed, a.classes, a.trees, a.features, a.samples)?;
    fs::create_dir_all(&a.out)?;
    write_json(&a.out.join("ensemble.json"), &syn.ensemble_file)?;
    write_json(&a.out.join("svm.json"), &syn.svm_file)?;
    save_dataset(&a.out.join("data.csv"), &syn.dataset)?;
    Ok(())
}

pub fn layout(a: &LayoutArgs) -> Result<()> {
    let params = match (&a.keys, &a.preset) {
        (Some(dir), _) => load_params(dir)?,
        (None, Some(p)) => HeParams::from_preset_name(p)?,
        (None, None) => return Err(CliError::usage("layout needs --keys or --preset").into()),
    };
    let t = params.plaintext_modulus;
    let svm = a.svm.as_deref().map(|p| load_svm(p, t)).transpose()?;
    let layout = match &a.model {
        Some(path) => build_layout(&load_ensemble(path, t)?, params.slot_count(), svm.as_ref())?,
        None => build_svm_layout(svm.as_ref().expect("clap requires a model"), params.slot_count())?,
    };
    layout.save(&a.out)?;
    Ok(())
}

pub fn encrypt(a: &EncryptArgs) -> Result<()> {
    let (ctx, pk) = load_encryptor(&a.keys)?;
    let params = ctx.params().clone();
    let layout = FeatureLayout::load(&a.model_layout)?;
    if layout.slot_count != params.slot_count() {
        return Err(CliError::validation(format!(
            "layout is for {} slots, keys for {}",
            layout.slot_count,
            params.slot_count()
        ))
        .into());
    }
    let data = load_dataset(&a.data, a.label_column)?;
    let samples = (0..data.len()).map(|i| data.sample(i)).collect::<hedgerow::Result<Vec<_>>>()?;
    let seed = master_seed(a.seed.as_deref());

    let start = Instant::now();
    let inputs = samples
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let bundle = pack_client_input(x, &layout)?;
            encrypt_bundle_with(&params, &bundle, derive_seed(&seed, "encrypt", i as u64), |pt, rng| {
                Ok(ctx.encrypt(&pk, pt, rng)?)
            })
        })
        .collect::<hedgerow::Result<Vec<_>>>()?;
    let seconds = start.elapsed().as_secs_f64();

    fs::create_dir_all(&a.out)?;
    inputs
        .par_iter()
        .enumerate()
        .try_for_each(|(i, input)| write_input(&sample_dir(&a.out, i), input))?;
    let manifest = InputManifest {
        fingerprint: params.fingerprint().to_hex(),
        samples: inputs.len(),
        tree_blocks: inputs.first().map_or(0, |x| x.xgb.len()),
        svm: layout.svm_slots.is_some(),
    };
    write_json(&a.out.join(MANIFEST_FILE), &manifest)?;
    record_timing(&a.out, "encrypt", seconds)
}

fn supports_width(params: &HeParams, width: usize) -> bool {
    width <= 1 || params.sum_widths.iter().any(|&w| w >= width)
}

pub fn infer(a: &InferArgs) -> Result<()> {
    let backend = load_server(&a.keys)?;
    let params = backend.params().clone();
    let t = params.plaintext_modulus;
    let mode = match a.mode {
        ModeArg::Svm => Mode::Svm,
        ModeArg::Xgb => Mode::Xgb,
        ModeArg::XgbEncmodel => Mode::XgbEncModel(a.encrypted.into()),
    };
    if params.depth_budget < mode.depth() {
        return Err(CliError::validation(format!(
            "mode {mode} needs multiplicative depth {}, the keys provide {}",
            mode.depth(),
            params.depth_budget
        ))
        .into());
    }
    let manifest: InputManifest = read_json(&a.input.join(MANIFEST_FILE))?;
    check_fingerprint(&manifest.fingerprint, &params)?;
    let seed = master_seed(a.seed.as_deref());
    let inputs = (0..manifest.samples)
        .into_par_iter()
        .map(|i| read_input(&sample_dir(&a.input, i), &manifest, &params))
        .collect::<Result<Vec<_>>>()?;

    let (outputs, seconds, result) = if mode == Mode::Svm {
        let model = load_svm(&a.model, t)?;
        if !manifest.svm {
            return Err(CliError::validation("input carries no SVM vector").into());
        }
        if !supports_width(&params, model.d_padded()) {
            return Err(CliError::validation(format!(
                "keys lack rotations for {} features",
                model.d_padded()
            ))
            .into());
        }
        let start = Instant::now();
        let server = SvmServer::new(&backend, &model)?;
        let outputs = inputs
            .par_iter()
            .map(|x| server.infer(&backend, x))
            .collect::<hedgerow::Result<Vec<_>>>()?;
        let result = ResultManifest {
            fingerprint: manifest.fingerprint.clone(),
            mode: mode.name().into(),
            encrypted: None,
            samples: manifest.samples,
            classes: model.num_classes,
            scale_bits: model.scale_bits,
            outputs_per_sample: model.num_classes,
            trees_per_class: None,
            classes_per_block: None,
        };
        (outputs, start.elapsed().as_secs_f64(), result)
    } else {
        let ensemble = load_ensemble(&a.model, t)?;
        let blocks = BlockLayout::for_ensemble(&ensemble, params.slot_count())?;
        if manifest.tree_blocks != blocks.blocks {
            return Err(CliError::validation(format!(
                "input has {} tree blocks, the model needs {}",
                manifest.tree_blocks, blocks.blocks
            ))
            .into());
        }
        if !supports_width(&params, ensemble.trees_per_class) {
            return Err(CliError::validation(format!(
                "keys lack rotations for {} trees per class",
                ensemble.trees_per_class
            ))
            .into());
        }
        let start = Instant::now();
        let server = XgbServer::new(&backend, &ensemble, mode, derive_seed(&seed, "model", 0))?;
        let outputs = inputs
            .par_iter()
            .map(|x| server.infer(&backend, x))
            .collect::<hedgerow::Result<Vec<_>>>()?;
        let result = ResultManifest {
            fingerprint: manifest.fingerprint.clone(),
            mode: mode.name().into(),
            encrypted: match mode {
                Mode::XgbEncModel(part) => Some(part),
                _ => None,
            },
            samples: manifest.samples,
            classes: ensemble.num_classes,
            scale_bits: ensemble.scale_bits,
            outputs_per_sample: blocks.blocks,
            trees_per_class: Some(blocks.trees_per_class),
            classes_per_block: Some(blocks.classes_per_block),
        };
        (outputs, start.elapsed().as_secs_f64(), result)
    };

    fs::create_dir_all(&a.out)?;
    outputs
        .par_iter()
        .enumerate()
        .try_for_each(|(i, cts)| write_results(&sample_dir(&a.out, i), cts))?;
    write_json(&a.out.join(MANIFEST_FILE), &result)?;
    record_timing(&a.out, "comp", seconds)
}

#[derive(Serialize)]
struct Summary<'a> {
    mode: &'a str,
    samples: usize,
    classes: usize,
    micro_auc: Option<f64>,
    accuracy: Option<f64>,
    dec_s: f64,
}

pub fn decrypt(a: &DecryptArgs) -> Result<()> {
    let (ctx, sk) = load_decryptor(&a.keys)?;
    let params = ctx.params();
    let m: ResultManifest = read_json(&a.input.join(MANIFEST_FILE))?;
    check_fingerprint(&m.fingerprint, params)?;
    let mode = Mode::parse(&m.mode, m.encrypted.unwrap_or(EncryptedPart::Splits))?;
    let layout = m.block_layout(params.slot_count())?;
    let results = (0..m.samples)
        .into_par_iter()
        .map(|i| read_results(&sample_dir(&a.input, i), m.outputs_per_sample, params))
        .collect::<Result<Vec<_>>>()?;

    let start = Instant::now();
    let scores = results
        .par_iter()
        .enumerate()
        .map(|(i, cts)| {
            for ct in cts {
                if ctx.noise_budget(&sk, ct)? == 0 {
                    return Err(CliError::crypto(format!("sample {i}: noise budget exhausted")).into());
                }
            }
            Ok(decrypt_scores(&ctx, &sk, mode, layout.as_ref(), cts)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = match &a.labels {
        Some(path) => {
            let ds = load_dataset(path, true)?;
            let labels = ds.labels.expect("label column requested");
            if labels.len() != m.samples {
                return Err(CliError::validation(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    m.samples
                ))
                .into());
            }
            Some(labels)
        }
        None => None,
    };
    let eval = EvalReport::new(&scores, m.scale_bits, labels.as_deref())?;
    let seconds = start.elapsed().as_secs_f64();

    let mut csv = String::from("sample,predicted");
    for c in 0..m.classes {
        write!(csv, ",class_{c}")?;
    }
    csv.push('\n');
    for (i, (p, row)) in eval.predictions.iter().zip(&eval.confidences).enumerate() {
        write!(csv, "{i},{p}")?;
        for v in row {
            write!(csv, ",{v}")?;
        }
        csv.push('\n');
    }
    fs::write(&a.report, csv).with_context(|| format!("writing {}", a.report.display()))?;

    eprintln!("decrypt: {seconds:.3}s");
    if let (Some(auc), Some(acc)) = (eval.micro_auc, eval.accuracy) {
        println!("microAUC {auc:.6}");
        println!("accuracy {acc:.6}");
    }
    if let Some(path) = &a.summary {
        write_json(
            path,
            &Summary {
                mode: mode.name(),
                samples: m.samples,
                classes: m.classes,
                micro_auc: eval.micro_auc,
                accuracy: eval.accuracy,
                dec_s: seconds,
            },
        )?;
    }
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let parts: Vec<EncryptedPart> = match a.encrypted {
        Some(p) => vec![p.into()],
        None => vec![EncryptedPart::Splits, EncryptedPart::Leaves],
    };
    let mut modes = Vec::new();
    if matches!(a.mode, BenchMode::Svm | BenchMode::All) {
        modes.push(Mode::Svm);
    }
    if matches!(a.mode, BenchMode::Xgb | BenchMode::All) {
        modes.push(Mode::Xgb);
    }
    if matches!(a.mode, BenchMode::XgbEncmodel | BenchMode::All) {
        modes.extend(parts.iter().map(|&p| Mode::XgbEncModel(p)));
    }
    let mut reports = Vec::new();
    for mode in modes {
        let cfg = BenchConfig {
            mode,
            samples: a.samples,
            classes: a.classes,
            trees_per_class: a.trees,
            features: a.features,
            seed: seed_from_text(&a.seed),
            data_seed: a.data_seed,
            params: None,
        };
        eprintln!("running {} on {} samples", mode.label(), a.samples);
        let report = run_bench(&cfg)?;
        eprintln!(
            "  oracle mismatches {}, min noise budget {} bits",
            report.oracle_mismatches, report.min_noise_budget
        );
        reports.push(report);
    }
    print!("{}", format_table(&reports));
    if let Some(path) = &a.json {
        fs::write(path, bench_json(&reports)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let bad: Vec<&str> = reports
        .iter()
        .filter(|r| r.oracle_mismatches > 0)
        .map(|r| r.label.as_str())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::crypto(format!("decrypted scores differ from the clear pipeline: {}", bad.join(", "))).into())
    }
}
