//! Model and dataset files, the client feature layout, and synthetic data.
//!
//! The layout is published to clients and reveals which feature indices
//! each tree node consults.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{encode_feature, encode_split, normalize_copy_number, TernaryFeature};
use crate::error::{Error, Result};
use crate::svm::{check_bound, quantize_model, SvmModel};
use crate::trees::{predict_class, BlockLayout, Depth2Tree, Ensemble, Node, NodeStreams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub feat: [usize; 3],
    pub thresh: [f64; 3],
    pub leaves: [f64; 4],
}

/// Ensemble JSON: trees in class-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub classes: usize,
    pub trees_per_class: usize,
    pub scale_bits: u32,
    pub trees: Vec<TreeFile>,
}

impl EnsembleFile {
    /// Real-valued class scores.
    pub fn class_scores(&self, sample: &[TernaryFeature]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                self.trees[c * self.trees_per_class..(c + 1) * self.trees_per_class]
                    .iter()
                    .map(|t| {
                        let go = |i: usize| (sample[t.feat[i]].value() as f64) < t.thresh[i];
                        match (go(0), go(1), go(2)) {
                            (true, true, _) => t.leaves[0],
                            (true, false, _) => t.leaves[1],
                            (false, _, true) => t.leaves[2],
                            (false, _, false) => t.leaves[3],
                        }
                    })
                    .sum()
            })
            .collect()
    }
}

/// SVM JSON: `weights` is the row-major `classes × features` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmFile {
    pub classes: usize,
    pub features: usize,
    pub scale_bits: u32,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Validates, quantizes and pads an ensemble; checks the aggregate bound
/// against the plaintext modulus.
pub fn ensemble_from_file(file: &EnsembleFile, plaintext_modulus: u64) -> Result<Ensemble> {
    let (s, k) = (file.classes, file.trees_per_class);
    if s == 0 || k == 0 {
        return Err(Error::Model("ensemble needs at least one class and one tree".into()));
    }
    if file.trees.len() != s * k {
        return Err(Error::Model(format!(
            "{} trees listed for {s} classes of {k}",
            file.trees.len()
        )));
    }
    if file.scale_bits > 40 {
        return Err(Error::Model(format!("scale 2^{} too large", file.scale_bits)));
    }
    let scale = (1u64 << file.scale_bits) as f64;
    let k_padded = k.next_power_of_two();
    let mut trees = Vec::with_capacity(s * k_padded);
    for class in file.trees.chunks(k) {
        for t in class {
            let splits = [
                encode_split(t.thresh[0])?,
                encode_split(t.thresh[1])?,
                encode_split(t.thresh[2])?,
            ];
            let mut leaves = [0i64; 4];
            for (q, &c) in leaves.iter_mut().zip(&t.leaves) {
                let v = (c * scale).round();
                if !v.is_finite() || v.abs() >= 2f64.powi(62) {
                    return Err(Error::Model(format!("leaf {c} not representable")));
                }
                *q = v as i64;
            }
            trees.push(Depth2Tree {
                features: t.feat,
                splits,
                leaves,
            });
        }
        trees.extend(std::iter::repeat_with(Depth2Tree::zero).take(k_padded - k));
    }
    let e = Ensemble {
        num_classes: s,
        trees_per_class: k_padded,
        scale_bits: file.scale_bits,
        trees,
    };
    e.validate()?;
    check_bound(e.aggregate_bound(), plaintext_modulus)?;
    Ok(e)
}

pub fn ensemble_to_file(e: &Ensemble) -> EnsembleFile {
    let scale = (1u64 << e.scale_bits) as f64;
    EnsembleFile {
        classes: e.num_classes,
        trees_per_class: e.trees_per_class,
        scale_bits: e.scale_bits,
        trees: e
            .trees
            .iter()
            .map(|t| TreeFile {
                feat: t.features,
                thresh: t.splits.map(|y| y.threshold()),
                leaves: t.leaves.map(|c| c as f64 / scale),
            })
            .collect(),
    }
}

pub fn svm_from_file(file: &SvmFile, plaintext_modulus: u64) -> Result<SvmModel> {
    if file.features == 0 || file.weights.len() != file.classes * file.features {
        return Err(Error::Model(format!(
            "{} weights for {} classes of {} features",
            file.weights.len(),
            file.classes,
            file.features
        )));
    }
    let rows: Vec<Vec<f64>> = file.weights.chunks(file.features).map(<[f64]>::to_vec).collect();
    let model = quantize_model(&rows, &file.bias, file.scale_bits)?;
    model.check_plaintext_modulus(plaintext_modulus)?;
    Ok(model)
}

pub fn svm_to_file(m: &SvmModel) -> SvmFile {
    let scale = m.scale();
    SvmFile {
        classes: m.num_classes,
        features: m.num_features,
        scale_bits: m.scale_bits,
        weights: m.weights.iter().flatten().map(|&w| w as f64 / scale).collect(),
        bias: m.bias.iter().map(|&b| b as f64 / scale).collect(),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(std::fs::write(path, text)?)
}

pub fn load_ensemble(path: &Path, plaintext_modulus: u64) -> Result<Ensemble> {
    ensemble_from_file(&read_json(path)?, plaintext_modulus)
}

pub fn save_ensemble(path: &Path, e: &Ensemble) -> Result<()> {
    write_json(path, &ensemble_to_file(e))
}

pub fn load_svm(path: &Path, plaintext_modulus: u64) -> Result<SvmModel> {
    svm_from_file(&read_json(path)?, plaintext_modulus)
}

pub fn save_svm(path: &Path, m: &SvmModel) -> Result<()> {
    write_json(path, &svm_to_file(m))
}

/// Raw copy-number samples with optional class labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub rows: Vec<Vec<i64>>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn sample(&self, i: usize) -> Result<Vec<TernaryFeature>> {
        self.rows[i].iter().map(|&v| normalize_copy_number(v)).collect()
    }

    pub fn validate(&self, classes: Option<usize>) -> Result<()> {
        let d = self.features();
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dataset(format!("row {i} has {} values, expected {d}", row.len())));
            }
            if let Some(&v) = row.iter().find(|v| !(-2..=2).contains(*v)) {
                return Err(Error::Dataset(format!("row {i}: value {v} outside -2..=2")));
            }
        }
        if let (Some(labels), Some(s)) = (&self.labels, classes) {
            if let Some(&l) = labels.iter().find(|&&l| l >= s) {
                return Err(Error::Dataset(format!("label {l} outside {s} classes")));
            }
        }
        Ok(())
    }
}

/// Headerless CSV of integers; with `label_column` the last column is the label.
pub fn load_dataset(path: &Path, label_column: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut values = record
            .iter()
            .map(|f| f.parse::<i64>().map_err(|_| Error::Dataset(format!("row {i}: `{f}` is not an integer"))))
            .collect::<Result<Vec<i64>>>()?;
        if label_column {
            let label = values.pop().ok_or_else(|| Error::Dataset(format!("row {i} is empty")))?;
            let label = usize::try_from(label)
                .map_err(|_| Error::Dataset(format!("row {i}: negative label")))?;
            labels.push(label);
        }
        rows.push(values);
    }
    let ds = Dataset {
        rows,
        labels: label_column.then_some(labels),
    };
    ds.validate(None)?;
    Ok(ds)
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for (i, row) in ds.rows.iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(i64::to_string).collect();
        if let Some(labels) = &ds.labels {
            fields.push(labels[i].to_string());
        }
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}

/// One tree node's place in the client's packed input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub block: usize,
    pub stream: Node,
    pub slot: usize,
    pub feature: usize,
}

/// Public descriptor telling the client what to pack where.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub slot_count: usize,
    pub num_classes: usize,
    pub trees_per_class: usize,
    pub classes_per_block: usize,
    pub blocks: usize,
    pub nodes: Vec<LayoutEntry>,
    /// Slot of SVM feature `j` is `svm_slots[j]`.
    pub svm_slots: Option<Vec<usize>>,
}

impl FeatureLayout {
    pub fn block_layout(&self) -> Result<BlockLayout> {
        let b = BlockLayout::new(self.num_classes, self.trees_per_class, self.slot_count)?;
        if b.blocks != self.blocks || b.classes_per_block != self.classes_per_block {
            return Err(Error::Shape("layout block counts are inconsistent".into()));
        }
        Ok(b)
    }

    /// Features the client must supply.
    pub fn required_features(&self) -> usize {
        let trees = self.nodes.iter().map(|e| e.feature + 1).max().unwrap_or(0);
        let svm = self.svm_slots.as_ref().map_or(0, Vec::len);
        trees.max(svm)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let layout: Self = read_json(path)?;
        layout.block_layout()?;
        Ok(layout)
    }
}

pub fn build_layout(e: &Ensemble, slot_count: usize, svm: Option<&SvmModel>) -> Result<FeatureLayout> {
    let blocks = BlockLayout::for_ensemble(e, slot_count)?;
    let mut nodes = Vec::with_capacity(3 * e.trees.len());
    for (i, tree) in e.trees.iter().enumerate() {
        let (block, slot) = blocks.tree_position(i);
        for node in Node::ALL {
            nodes.push(LayoutEntry {
                block,
                stream: node,
                slot,
                feature: tree.features[node.index()],
            });
        }
    }
    let svm_slots = match svm {
        Some(m) if m.d_padded() > slot_count => {
            return Err(Error::Shape(format!("{} SVM features exceed {slot_count} slots", m.num_features)))
        }
        Some(m) => Some((0..m.num_features).collect()),
        None => None,
    };
    Ok(FeatureLayout {
        slot_count,
        num_classes: blocks.num_classes,
        trees_per_class: blocks.trees_per_class,
        classes_per_block: blocks.classes_per_block,
        blocks: blocks.blocks,
        nodes,
        svm_slots,
    })
}

/// Layout for an SVM-only client: features in slots `0..d`, no tree nodes.
pub fn build_svm_layout(m: &SvmModel, slot_count: usize) -> Result<FeatureLayout> {
    if m.d_padded() > slot_count {
        return Err(Error::Shape(format!("{} SVM features exceed {slot_count} slots", m.num_features)));
    }
    Ok(FeatureLayout {
        slot_count,
        num_classes: m.num_classes,
        trees_per_class: 1,
        classes_per_block: m.num_classes.min(slot_count),
        blocks: m.num_classes.div_ceil(slot_count),
        nodes: Vec::new(),
        svm_slots: Some((0..m.num_features).collect()),
    })
}

/// The `x0` and `x2` bit-planes of one block's three node streams.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPlanes {
    pub x0: NodeStreams<Vec<i64>>,
    pub x2: NodeStreams<Vec<i64>>,
}

/// Everything a client encrypts for one sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientBundle {
    pub xgb: Vec<BlockPlanes>,
    pub svm: Option<Vec<i64>>,
}

pub fn pack_client_input(sample: &[TernaryFeature], layout: &FeatureLayout) -> Result<ClientBundle> {
    let n = layout.slot_count;
    let needed = layout.required_features();
    if sample.len() < needed {
        return Err(Error::FeatureOutOfRange {
            index: needed - 1,
            features: sample.len(),
        });
    }
    let empty = || NodeStreams::from_fn(|_| vec![0i64; n]);
    let tree_blocks = if layout.nodes.is_empty() { 0 } else { layout.blocks };
    let mut xgb: Vec<BlockPlanes> = (0..tree_blocks)
        .map(|_| BlockPlanes { x0: empty(), x2: empty() })
        .collect();
    for e in &layout.nodes {
        if e.block >= layout.blocks || e.slot >= n {
            return Err(Error::Shape(format!("layout entry {e:?} out of range")));
        }
        let code = encode_feature(sample[e.feature]);
        let planes = &mut xgb[e.block];
        let (x0, x2) = match e.stream {
            Node::Root => (&mut planes.x0.root, &mut planes.x2.root),
            Node::Left => (&mut planes.x0.left, &mut planes.x2.left),
            Node::Right => (&mut planes.x0.right, &mut planes.x2.right),
        };
        x0[e.slot] = code.x0 as i64;
        x2[e.slot] = code.x2 as i64;
    }
    let svm = match &layout.svm_slots {
        Some(slots) => {
            let mut v = vec![0i64; n];
            for (j, &slot) in slots.iter().enumerate() {
                *v.get_mut(slot).ok_or_else(|| Error::Shape(format!("SVM slot {slot} out of range")))? =
                    sample[j].value();
            }
            Some(v)
        }
        None => None,
    };
    Ok(ClientBundle { xgb, svm })
}

/// Reads back `(feature, x2, x0)` for every layout entry.
pub fn unpack_codes(bundle: &ClientBundle, layout: &FeatureLayout) -> Vec<(usize, u8, u8)> {
    layout
        .nodes
        .iter()
        .map(|e| {
            let p = &bundle.xgb[e.block];
            (
                e.feature,
                p.x2.get(e.stream)[e.slot] as u8,
                p.x0.get(e.stream)[e.slot] as u8,
            )
        })
        .collect()
}

/// Generated model pair and labelled dataset.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub ensemble_file: EnsembleFile,
    pub svm_file: SvmFile,
    pub dataset: Dataset,
}

impl Synthetic {
    pub fn ensemble(&self, plaintext_modulus: u64) -> Result<Ensemble> {
        ensemble_from_file(&self.ensemble_file, plaintext_modulus)
    }

    pub fn svm(&self, plaintext_modulus: u64) -> Result<SvmModel> {
        svm_from_file(&self.svm_file, plaintext_modulus)
    }
}

/// Fraction of samples that keep a label other than the ensemble's own
/// prediction.
pub const LABEL_NOISE: f64 = 0.1;
/// Probability that a sample feature copies its class prototype.
const PROTOTYPE_AGREEMENT: f64 = 0.6;
pub const DEFAULT_SCALE_BITS: u32 = 20;

fn random_ternary<R: Rng>(rng: &mut R) -> i64 {
    rng.gen_range(-1..=1)
}

/// A threshold that sends ternary value `v` to the requested side.
fn threshold_routing<R: Rng>(v: i64, rng: &mut R) -> (f64, bool) {
    match v {
        -1 => (-0.5, true),
        1 => (0.5, false),
        _ => {
            if rng.gen_bool(0.5) {
                (0.5, true)
            } else {
                (-0.5, false)
            }
        }
    }
}

/// Deterministic synthetic ensemble, SVM and labelled dataset.
///
/// Each class has a ternary prototype. Its trees route the prototype to a
/// positive leaf and everything else to negative ones; its SVM weights are
/// the prototype plus noise. Samples copy their class prototype feature-wise
/// with fixed probability, and each label is the float ensemble's argmax,
/// replaced by a different random class with probability [`LABEL_NOISE`].
pub fn gen_synthetic(seed: u64, s: usize, k: usize, d: usize, n_samples: usize) -> Result<Synthetic> {
    if s < 2 || k == 0 || d == 0 {
        return Err(Error::Model("synthetic data needs s >= 2, k >= 1, d >= 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let protos: Vec<Vec<i64>> = (0..s)
        .map(|_| (0..d).map(|_| random_ternary(&mut rng)).collect())
        .collect();

    let unit = 1.0 / k as f64;
    let mut trees = Vec::with_capacity(s * k);
    for proto in &protos {
        for _ in 0..k {
            let f_root = rng.gen_range(0..d);
            let (t_root, proto_left) = threshold_routing(proto[f_root], &mut rng);
            let f_match = rng.gen_range(0..d);
            let (t_match, match_first) = threshold_routing(proto[f_match], &mut rng);
            let f_other = rng.gen_range(0..d);
            let t_other = *[-0.5, 0.5].choose(&mut rng).expect("nonempty");
            let hit = rng.gen_range(0.5..1.0) * unit;
            let mut miss = || -rng.gen_range(0.0..0.5) * unit;
            let matched = if match_first { [hit, miss()] } else { [miss(), hit] };
            let other = [miss(), miss()];
            let (feat, thresh, leaves) = if proto_left {
                ([f_root, f_match, f_other], [t_root, t_match, t_other], [matched[0], matched[1], other[0], other[1]])
            } else {
                ([f_root, f_other, f_match], [t_root, t_other, t_match], [other[0], other[1], matched[0], matched[1]])
            };
            trees.push(TreeFile { feat, thresh, leaves });
        }
    }
    let ensemble_file = EnsembleFile {
        classes: s,
        trees_per_class: k,
        scale_bits: DEFAULT_SCALE_BITS,
        trees,
    };

    let weight = 1.0 / d as f64;
    let weights = protos
        .iter()
        .flat_map(|p| p.iter().map(|&v| v as f64 * weight + rng.gen_range(-0.25..0.25) * weight).collect::<Vec<_>>())
        .collect();
    let svm_file = SvmFile {
        classes: s,
        features: d,
        scale_bits: DEFAULT_SCALE_BITS,
        weights,
        bias: (0..s).map(|_| rng.gen_range(-0.05..0.05)).collect(),
    };

    let mut rows = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let class = rng.gen_range(0..s);
        let ternary: Vec<i64> = protos[class]
            .iter()
            .map(|&v| if rng.gen_bool(PROTOTYPE_AGREEMENT) { v } else { random_ternary(&mut rng) })
            .collect();
        let sample: Vec<TernaryFeature> = ternary
            .iter()
            .map(|&v| TernaryFeature::from_value(v).expect("ternary"))
            .collect();
        let predicted = predict_class(&ensemble_file.class_scores(&sample))?;
        let label = if rng.gen_bool(LABEL_NOISE) {
            (predicted + rng.gen_range(1..s)) % s
        } else {
            predicted
        };
        let raw = ternary
            .iter()
            .map(|&v| if v == 0 { 0 } else { v * rng.gen_range(1..=2) })
            .collect();
        rows.push(raw);
        labels.push(label);
    }
    Ok(Synthetic {
        ensemble_file,
        svm_file,
        dataset: Dataset {
            rows,
            labels: Some(labels),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_file() -> EnsembleFile {
        EnsembleFile {
            classes: 1,
            trees_per_class: 2,
            scale_bits: 4,
            trees: vec![
                TreeFile { feat: [3, 1, 2], thresh: [-0.5, 0.5, 0.5], leaves: [1.0, 0.5, -0.5, 0.25] },
                TreeFile { feat: [7, 0, 0], thresh: [0.5, 0.5, -0.5], leaves: [0.0, 0.0, 0.0, 1.0] },
            ],
        }
    }

    #[test]
    fn root_streams_carry_root_features() {
        let e = ensemble_from_file(&tiny_file(), 1 << 20).unwrap();
        let layout = build_layout(&e, 16, None).unwrap();
        let roots: Vec<(usize, usize)> = layout
            .nodes
            .iter()
            .filter(|n| n.stream == Node::Root)
            .map(|n| (n.slot, n.feature))
            .collect();
        assert_eq!(roots, [(0, 3), (1, 7)]);
        assert_eq!(layout.blocks, 1);
    }

    #[test]
    fn quantization_and_padding() {
        let mut file = tiny_file();
        file.trees_per_class = 3;
        file.trees.push(file.trees[0].clone());
        let e = ensemble_from_file(&file, 1 << 20).unwrap();
        assert_eq!(e.trees_per_class, 4);
        assert_eq!(e.trees[0].leaves, [16, 8, -8, 4]);
        assert_eq!(e.trees[3], Depth2Tree::zero());
    }

    #[test]
    fn bad_thresholds_and_overflow() {
        let mut file = tiny_file();
        file.trees[1].thresh[2] = 0.3;
        assert!(matches!(ensemble_from_file(&file, 1 << 20), Err(Error::InadmissibleThreshold(_))));
        let file = tiny_file();
        // class bound = 16 + 16
        assert!(matches!(ensemble_from_file(&file, 64), Err(Error::Overflow { bound: 32, .. })));
        assert!(ensemble_from_file(&file, 67).is_ok());
    }

    #[test]
    fn layout_spill_block_count() {
        let e = ensemble_from_file(
            &EnsembleFile {
                classes: 5,
                trees_per_class: 4,
                scale_bits: 4,
                trees: vec![tiny_file().trees[0].clone(); 20],
            },
            1 << 30,
        )
        .unwrap();
        let layout = build_layout(&e, 8, None).unwrap();
        assert_eq!((layout.classes_per_block, layout.blocks), (2, 3));
        assert_eq!(layout.to_json().unwrap(), build_layout(&e, 8, None).unwrap().to_json().unwrap());
    }

    #[test]
    fn dataset_validation() {
        let ds = Dataset { rows: vec![vec![0, 3]], labels: None };
        assert!(ds.validate(None).is_err());
        let ds = Dataset { rows: vec![vec![0, 1], vec![2]], labels: None };
        assert!(ds.validate(None).is_err());
        let ds = Dataset { rows: vec![vec![0, 1]], labels: Some(vec![4]) };
        assert!(ds.validate(Some(3)).is_err());
    }
}
