//! Client and server roles, the clear reference pipeline, and reports.
//!
//! The client packs and encrypts samples and decrypts results; the server
//! holds only the public and evaluation keys. Every random choice derives
//! from a 32-byte master seed and a per-item label, so outputs do not depend
//! on the degree of parallelism.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use hedgerow_he::{
    keygen, Backend, HeBackend, HeContext, HeParams, PackedPlaintext, Preset, SecretKey,
};
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::{compare_encrypted_model, compare_prepared, PreparedSplits, TernaryFeature};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, micro_auc};
use crate::model_io::{build_layout, build_svm_layout, gen_synthetic, pack_client_input, ClientBundle};
use crate::svm::{infer_prepared, PreparedSvm, SvmModel};
use crate::trees::{
    class_sums, leaf_streams, predict_class, split_streams, tree_scores_encrypted_model,
    tree_scores_prepared, BlockLayout, Ensemble, NodeStreams, PreparedLeaves,
};

/// Which half of the tree model the server encrypts in encrypted-model mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncryptedPart {
    Splits,
    Leaves,
}

impl FromStr for EncryptedPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "splits" => Ok(Self::Splits),
            "leaves" => Ok(Self::Leaves),
            _ => Err(Error::Model(format!("unknown encrypted part `{s}` (splits or leaves)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Svm,
    Xgb,
    XgbEncModel(EncryptedPart),
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Svm => "svm",
            Mode::Xgb => "xgb",
            Mode::XgbEncModel(_) => "xgb-encmodel",
        }
    }

    /// Row label used in benchmark tables.
    pub fn label(self) -> &'static str {
        match self {
            Mode::Svm => "SVM",
            Mode::Xgb => "XGBoost",
            Mode::XgbEncModel(EncryptedPart::Splits) => "XGBoost(Encrypted Model: splits)",
            Mode::XgbEncModel(EncryptedPart::Leaves) => "XGBoost(Encrypted Model: leaves)",
        }
    }

    pub fn preset(self) -> Preset {
        match self {
            Mode::Svm => Preset::SvmD1,
            Mode::Xgb => Preset::XgbD2,
            Mode::XgbEncModel(_) => Preset::XgbEncModelD3,
        }
    }

    /// Ciphertext products on the deepest path.
    pub fn depth(self) -> usize {
        match self {
            Mode::Svm => 0,
            Mode::Xgb => 2,
            Mode::XgbEncModel(_) => 3,
        }
    }

    pub fn parse(name: &str, part: EncryptedPart) -> Result<Self> {
        match name {
            "svm" => Ok(Mode::Svm),
            "xgb" => Ok(Mode::Xgb),
            "xgb-encmodel" => Ok(Mode::XgbEncModel(part)),
            _ => Err(Error::Model(format!("unknown mode `{name}` (svm, xgb or xgb-encmodel)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sub-seed for one labelled item.
pub fn derive_seed(master: &[u8; 32], label: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master);
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

/// Master seed from a human-readable string.
pub fn seed_from_text(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

/// Encrypted `x0`/`x2` node streams for one block.
#[derive(Clone, Debug)]
pub struct BlockInput<C> {
    pub x0: NodeStreams<C>,
    pub x2: NodeStreams<C>,
}

/// A client's encrypted sample.
#[derive(Clone, Debug)]
pub struct EncryptedInput<C> {
    pub xgb: Vec<BlockInput<C>>,
    pub svm: Option<C>,
}

/// Encrypts a packed bundle; ciphertext order is fixed so a seed fully
/// determines the output.
pub fn encrypt_bundle<B: Backend>(
    backend: &B,
    bundle: &ClientBundle,
    seed: [u8; 32],
) -> Result<EncryptedInput<B::Ciphertext>> {
    encrypt_bundle_with(backend.params(), bundle, seed, |pt, rng| Ok(backend.encrypt(pt, rng)?))
}

/// [`encrypt_bundle`] with a caller-supplied encryption function, for
/// clients that hold only a public key.
pub fn encrypt_bundle_with<C>(
    params: &HeParams,
    bundle: &ClientBundle,
    seed: [u8; 32],
    mut encrypt: impl FnMut(&PackedPlaintext, &mut ChaCha20Rng) -> Result<C>,
) -> Result<EncryptedInput<C>> {
    let mut rng = ChaCha20Rng::from_seed(seed);
    let mut enc = |v: &Vec<i64>| encrypt(&PackedPlaintext::encode(v, params)?, &mut rng);
    let mut xgb = Vec::with_capacity(bundle.xgb.len());
    for planes in &bundle.xgb {
        let x0 = planes.x0.try_map(&mut enc)?;
        let x2 = planes.x2.try_map(&mut enc)?;
        xgb.push(BlockInput { x0, x2 });
    }
    let svm = bundle.svm.as_ref().map(&mut enc).transpose()?;
    Ok(EncryptedInput { xgb, svm })
}

enum BlockModel<B: Backend> {
    Plain {
        splits: NodeStreams<PreparedSplits<B>>,
        leaves: PreparedLeaves<B>,
    },
    EncryptedSplits {
        y: NodeStreams<B::Ciphertext>,
        leaves: PreparedLeaves<B>,
    },
    EncryptedLeaves {
        splits: NodeStreams<PreparedSplits<B>>,
        leaves: [B::Ciphertext; 4],
    },
}

/// Server-side tree model, prepared (and in encrypted-model mode encrypted)
/// once and reused for every sample.
pub struct XgbServer<B: Backend> {
    layout: BlockLayout,
    blocks: Vec<BlockModel<B>>,
}

impl<B: Backend> XgbServer<B> {
    pub fn new(backend: &B, e: &Ensemble, mode: Mode, seed: [u8; 32]) -> Result<Self> {
        let params = backend.params();
        let layout = BlockLayout::for_ensemble(e, params.slot_count())?;
        crate::svm::check_bound(e.aggregate_bound(), params.plaintext_modulus)?;
        let encode = |v: &Vec<i64>| PackedPlaintext::encode(v, params);
        let mut rng = ChaCha20Rng::from_seed(seed);
        let mut blocks = Vec::with_capacity(layout.blocks);
        for (y, l) in split_streams(e, &layout).iter().zip(leaf_streams(e, &layout)) {
            let y = y.try_map(encode)?;
            let l = [encode(&l[0])?, encode(&l[1])?, encode(&l[2])?, encode(&l[3])?];
            let prepare_splits = || y.try_map(|p| PreparedSplits::new(backend, p));
            let block = match mode {
                Mode::Xgb => BlockModel::Plain {
                    splits: prepare_splits()?,
                    leaves: PreparedLeaves::new(backend, &l)?,
                },
                Mode::XgbEncModel(EncryptedPart::Splits) => BlockModel::EncryptedSplits {
                    y: y.try_map(|p| backend.encrypt(p, &mut rng))?,
                    leaves: PreparedLeaves::new(backend, &l)?,
                },
                Mode::XgbEncModel(EncryptedPart::Leaves) => {
                    let mut enc = |p: &PackedPlaintext| backend.encrypt(p, &mut rng);
                    BlockModel::EncryptedLeaves {
                        splits: prepare_splits()?,
                        leaves: [enc(&l[0])?, enc(&l[1])?, enc(&l[2])?, enc(&l[3])?],
                    }
                }
                Mode::Svm => return Err(Error::Model("svm mode has no tree model".into())),
            };
            blocks.push(block);
        }
        Ok(Self { layout, blocks })
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    /// One ciphertext per block; class `c`'s sum sits at slot `(c mod
    /// classes_per_block)·k` of block `c / classes_per_block`.
    pub fn infer(&self, backend: &B, input: &EncryptedInput<B::Ciphertext>) -> Result<Vec<B::Ciphertext>> {
        if input.xgb.len() != self.blocks.len() {
            return Err(Error::Shape(format!(
                "input has {} blocks, model has {}",
                input.xgb.len(),
                self.blocks.len()
            )));
        }
        let k = self.layout.trees_per_class;
        self.blocks
            .iter()
            .zip(&input.xgb)
            .map(|(model, x)| {
                let scores = match model {
                    BlockModel::Plain { splits, leaves } => {
                        let zs = NodeStreams::try_from_fn(|node| {
                            compare_prepared(backend, x.x0.get(node), x.x2.get(node), splits.get(node))
                        })?;
                        tree_scores_prepared(backend, &zs, leaves)?
                    }
                    BlockModel::EncryptedSplits { y, leaves } => {
                        let zs = NodeStreams::try_from_fn(|node| {
                            compare_encrypted_model(backend, x.x0.get(node), x.x2.get(node), y.get(node))
                        })?;
                        tree_scores_prepared(backend, &zs, leaves)?
                    }
                    BlockModel::EncryptedLeaves { splits, leaves } => {
                        let zs = NodeStreams::try_from_fn(|node| {
                            compare_prepared(backend, x.x0.get(node), x.x2.get(node), splits.get(node))
                        })?;
                        tree_scores_encrypted_model(backend, &zs, leaves)?
                    }
                };
                class_sums(backend, &scores, k)
            })
            .collect()
    }
}

/// Server-side SVM model.
pub struct SvmServer<B: Backend> {
    model: PreparedSvm<B>,
}

impl<B: Backend> SvmServer<B> {
    pub fn new(backend: &B, model: &SvmModel) -> Result<Self> {
        Ok(Self {
            model: PreparedSvm::new(backend, model)?,
        })
    }

    /// One ciphertext per class with the confidence in slot 0.
    pub fn infer(&self, backend: &B, input: &EncryptedInput<B::Ciphertext>) -> Result<Vec<B::Ciphertext>> {
        let x = input
            .svm
            .as_ref()
            .ok_or_else(|| Error::Shape("input carries no SVM vector".into()))?;
        infer_prepared(backend, x, &self.model)
    }
}

/// Fixed-point class scores from decoded result slot vectors.
pub fn decode_scores(mode: Mode, layout: Option<&BlockLayout>, slots: &[Vec<i64>]) -> Result<Vec<i64>> {
    match mode {
        Mode::Svm => Ok(slots.iter().map(|s| s[0]).collect()),
        _ => layout
            .ok_or_else(|| Error::Shape("tree modes need a block layout".into()))?
            .read_class_sums(slots),
    }
}

/// Clear fixed-point reference for one sample.
pub fn clear_scores(mode: Mode, ensemble: Option<&Ensemble>, svm: Option<&SvmModel>, sample: &[TernaryFeature]) -> Result<Vec<i64>> {
    match mode {
        Mode::Svm => svm
            .ok_or_else(|| Error::Model("svm mode needs an SVM model".into()))?
            .confidences_clear(sample),
        _ => ensemble
            .ok_or_else(|| Error::Model("tree modes need an ensemble".into()))?
            .class_sums_clear(sample),
    }
}

/// Wall-clock seconds per phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub keygen_s: f64,
    pub enc_s: f64,
    pub comp_s: f64,
    pub dec_s: f64,
    pub end_to_end_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_auc: Option<f64>,
    pub accuracy: Option<f64>,
    pub predictions: Vec<usize>,
    /// Samples × classes, de-scaled.
    pub confidences: Vec<Vec<f64>>,
}

impl EvalReport {
    pub fn new(fixed: &[Vec<i64>], scale_bits: u32, labels: Option<&[usize]>) -> Result<Self> {
        let scale = (1u64 << scale_bits) as f64;
        let confidences: Vec<Vec<f64>> = fixed
            .iter()
            .map(|row| row.iter().map(|&v| v as f64 / scale).collect())
            .collect();
        let predictions = fixed.iter().map(|r| predict_class(r)).collect::<Result<_>>()?;
        let (micro_auc, accuracy) = match labels {
            Some(l) => (Some(micro_auc(&confidences, l)?), Some(accuracy(&confidences, l)?)),
            None => (None, None),
        };
        Ok(Self {
            micro_auc,
            accuracy,
            predictions,
            confidences,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub mode: String,
    pub preset: String,
    pub ring_degree: usize,
    pub classes: usize,
    pub trees_per_class: usize,
    pub features: usize,
    pub samples: usize,
    pub blocks: usize,
    pub threads: usize,
    pub notes: Vec<String>,
}

/// One benchmark row plus everything needed to check it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub label: String,
    pub timing: TimingReport,
    pub micro_auc: f64,
    pub accuracy: f64,
    pub metadata: ReportMetadata,
    /// Samples whose decrypted scores differ from the clear reference.
    pub oracle_mismatches: usize,
    pub min_noise_budget: u32,
    /// SHA-256 over the decrypted fixed-point scores.
    pub scores_digest: String,
    #[serde(skip)]
    pub scores: Vec<Vec<i64>>,
    #[serde(skip)]
    pub expected: Vec<Vec<i64>>,
}

pub const TABLE_COLUMNS: [&str; 6] = ["KeyGen", "Enc", "Comp", "Dec", "EndtoEnd", "microAUC"];

/// Fixed-width table with a row-label column followed by [`TABLE_COLUMNS`].
pub fn format_table(reports: &[BenchReport]) -> String {
    let label_width = reports
        .iter()
        .map(|r| r.label.len())
        .chain([6])
        .max()
        .unwrap_or(6);
    let mut out = format!("{:<label_width$}", "Method");
    for c in TABLE_COLUMNS {
        out.push_str(&format!("  {c:>10}"));
    }
    out.push('\n');
    for r in reports {
        let t = &r.timing;
        out.push_str(&format!("{:<label_width$}", r.label));
        for s in [t.keygen_s, t.enc_s, t.comp_s, t.dec_s, t.end_to_end_s] {
            out.push_str(&format!("  {:>10}", format!("{s:.3}s")));
        }
        out.push_str(&format!("  {:>10.4}\n", r.micro_auc));
    }
    out
}

/// JSON form: the column order plus one object per row.
pub fn bench_json(reports: &[BenchReport]) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        columns: [&'a str; 6],
        rows: &'a [BenchReport],
    }
    Ok(serde_json::to_string_pretty(&Doc {
        columns: TABLE_COLUMNS,
        rows: reports,
    })? + "\n")
}

/// Synthetic end-to-end run of one mode.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub mode: Mode,
    pub samples: usize,
    pub classes: usize,
    pub trees_per_class: usize,
    pub features: usize,
    pub seed: [u8; 32],
    pub data_seed: u64,
    /// Overrides the mode's preset.
    pub params: Option<HeParams>,
}

impl BenchConfig {
    pub fn new(mode: Mode, samples: usize) -> Self {
        Self {
            mode,
            samples,
            classes: 11,
            trees_per_class: 128,
            features: 2048,
            seed: seed_from_text("hedgerow"),
            data_seed: 1,
            params: None,
        }
    }
}

pub fn scores_digest(scores: &[Vec<i64>]) -> String {
    let mut h = Sha256::new();
    for row in scores {
        for v in row {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs keygen, client encryption, server inference and client decryption
/// in-process and checks every sample against the clear reference.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let mode = cfg.mode;
    let synthetic = gen_synthetic(cfg.data_seed, cfg.classes, cfg.trees_per_class, cfg.features, cfg.samples)?;
    let params = cfg.params.clone().unwrap_or_else(|| HeParams::preset(mode.preset()));
    let t = params.plaintext_modulus;
    let (ensemble, svm) = match mode {
        Mode::Svm => (None, Some(synthetic.svm(t)?)),
        _ => (Some(synthetic.ensemble(t)?), None),
    };
    let samples = (0..cfg.samples)
        .map(|i| synthetic.dataset.sample(i))
        .collect::<Result<Vec<_>>>()?;
    let labels = synthetic.dataset.labels.clone().unwrap_or_default();

    let start = Instant::now();
    let (ctx, sk, backend) = {
        let ctx = Arc::new(HeContext::new(params.clone())?);
        let (sk, pk, ek) = keygen(&ctx, derive_seed(&cfg.seed, "keygen", 0));
        let backend = HeBackend::new(ctx.clone(), pk, ek)?;
        (ctx, sk, backend)
    };
    let keygen_s = start.elapsed().as_secs_f64();

    let t_enc = Instant::now();
    let layout = match (&ensemble, &svm) {
        (Some(e), _) => build_layout(e, params.slot_count(), None)?,
        (None, Some(m)) => build_svm_layout(m, params.slot_count())?,
        (None, None) => unreachable!("one model per mode"),
    };
    let inputs = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let bundle = pack_client_input(s, &layout)?;
            encrypt_bundle(&backend, &bundle, derive_seed(&cfg.seed, "encrypt", i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let enc_s = t_enc.elapsed().as_secs_f64();

    let t_comp = Instant::now();
    let outputs = match (&ensemble, &svm) {
        (Some(e), _) => {
            let server = XgbServer::new(&backend, e, mode, derive_seed(&cfg.seed, "model", 0))?;
            inputs
                .par_iter()
                .map(|x| server.infer(&backend, x))
                .collect::<Result<Vec<_>>>()?
        }
        (None, Some(m)) => {
            let server = SvmServer::new(&backend, m)?;
            inputs
                .par_iter()
                .map(|x| server.infer(&backend, x))
                .collect::<Result<Vec<_>>>()?
        }
        (None, None) => unreachable!("one model per mode"),
    };
    let comp_s = t_comp.elapsed().as_secs_f64();

    let t_dec = Instant::now();
    let block_layout = ensemble
        .as_ref()
        .map(|e| BlockLayout::for_ensemble(e, params.slot_count()))
        .transpose()?;
    let scores = outputs
        .par_iter()
        .map(|cts| decrypt_scores(&ctx, &sk, mode, block_layout.as_ref(), cts))
        .collect::<Result<Vec<_>>>()?;
    let _predictions = scores.iter().map(|s| predict_class(s)).collect::<Result<Vec<_>>>()?;
    let dec_s = t_dec.elapsed().as_secs_f64();
    let end_to_end_s = start.elapsed().as_secs_f64();

    let min_noise_budget = outputs
        .iter()
        .flatten()
        .map(|ct| ctx.noise_budget(&sk, ct))
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .min()
        .unwrap_or(0);
    let expected = samples
        .iter()
        .map(|s| clear_scores(mode, ensemble.as_ref(), svm.as_ref(), s))
        .collect::<Result<Vec<_>>>()?;
    let oracle_mismatches = scores.iter().zip(&expected).filter(|(a, b)| a != b).count();
    let scale_bits = ensemble
        .as_ref()
        .map(|e| e.scale_bits)
        .or(svm.as_ref().map(|m| m.scale_bits))
        .unwrap_or(0);
    let eval = EvalReport::new(&scores, scale_bits, Some(&labels))?;

    Ok(BenchReport {
        label: mode.label().to_string(),
        timing: TimingReport {
            keygen_s,
            enc_s,
            comp_s,
            dec_s,
            end_to_end_s,
        },
        micro_auc: eval.micro_auc.unwrap_or(f64::NAN),
        accuracy: eval.accuracy.unwrap_or(f64::NAN),
        metadata: ReportMetadata {
            mode: mode.name().to_string(),
            preset: params.preset_name.clone(),
            ring_degree: params.ring_degree,
            classes: cfg.classes,
            trees_per_class: ensemble.as_ref().map_or(0, |e| e.trees_per_class),
            features: cfg.features,
            samples: cfg.samples,
            blocks: block_layout.map_or(cfg.classes, |b| b.blocks),
            threads: rayon::current_num_threads(),
            notes: vec![
                "Enc includes client-side packing".into(),
                "Comp includes server-side model preparation and excludes file IO".into(),
                "microAUC over raw de-scaled confidences".into(),
            ],
        },
        oracle_mismatches,
        min_noise_budget,
        scores_digest: scores_digest(&scores),
        scores,
        expected,
    })
}

/// Client-side decryption of one sample's result ciphertexts.
pub fn decrypt_scores(
    ctx: &HeContext,
    sk: &SecretKey,
    mode: Mode,
    layout: Option<&BlockLayout>,
    cts: &[hedgerow_he::Ciphertext],
) -> Result<Vec<i64>> {
    let slots = cts
        .iter()
        .map(|ct| Ok(ctx.decrypt(sk, ct)?.decode_signed(ctx.params())))
        .collect::<Result<Vec<_>>>()?;
    decode_scores(mode, layout, &slots)
}
