//! Directories exchanged between client and server.
//!
//! An input directory holds `manifest.json` and one `sample_NNNNNN/`
//! directory per sample with `x0_b{block}_{node}.ct`, `x2_b{block}_{node}.ct`
//! and `svm.ct`. A result directory holds `manifest.json` and one directory
//! per sample with `out_NNN.ct`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hedgerow::pipeline::{BlockInput, EncryptedInput, EncryptedPart};
use hedgerow::trees::{BlockLayout, Node, NodeStreams};
use hedgerow_he::{Ciphertext, HeParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputManifest {
    pub fingerprint: String,
    pub samples: usize,
    pub tree_blocks: usize,
    pub svm: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultManifest {
    pub fingerprint: String,
    pub mode: String,
    pub encrypted: Option<EncryptedPart>,
    pub samples: usize,
    pub classes: usize,
    pub scale_bits: u32,
    pub outputs_per_sample: usize,
    /// Block placement of class sums; absent for SVM results.
    pub trees_per_class: Option<usize>,
    pub classes_per_block: Option<usize>,
}

impl ResultManifest {
    pub fn block_layout(&self, slot_count: usize) -> Result<Option<BlockLayout>> {
        let Some(k) = self.trees_per_class else {
            return Ok(None);
        };
        let layout = BlockLayout::new(self.classes, k, slot_count)?;
        if Some(layout.classes_per_block) != self.classes_per_block || layout.blocks != self.outputs_per_sample {
            return Err(CliError::validation("result manifest disagrees with the key parameters").into());
        }
        Ok(Some(layout))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())).into())
}

pub fn sample_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("sample_{index:06}"))
}

fn input_name(plane: &str, block: usize, node: Node) -> String {
    format!("{plane}_b{block}_{}.ct", node.name())
}

fn read_ct(path: &Path, params: &HeParams) -> Result<Ciphertext> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ciphertext::from_bytes(&bytes, params).with_context(|| format!("decoding {}", path.display()))
}

fn write_ct(path: &Path, ct: &Ciphertext) -> Result<()> {
    fs::write(path, ct.to_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn write_input(dir: &Path, input: &EncryptedInput<Ciphertext>) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (b, block) in input.xgb.iter().enumerate() {
        for node in Node::ALL {
            write_ct(&dir.join(input_name("x0", b, node)), block.x0.get(node))?;
            write_ct(&dir.join(input_name("x2", b, node)), block.x2.get(node))?;
        }
    }
    if let Some(ct) = &input.svm {
        write_ct(&dir.join("svm.ct"), ct)?;
    }
    Ok(())
}

pub fn read_input(dir: &Path, manifest: &InputManifest, params: &HeParams) -> Result<EncryptedInput<Ciphertext>> {
    let xgb = (0..manifest.tree_blocks)
        .map(|b| {
            let plane = |name: &str| {
                NodeStreams::try_from_fn(|node| read_ct(&dir.join(input_name(name, b, node)), params))
            };
            Ok(BlockInput { x0: plane("x0")?, x2: plane("x2")? })
        })
        .collect::<Result<Vec<_>>>()?;
    let svm = manifest
        .svm
        .then(|| read_ct(&dir.join("svm.ct"), params))
        .transpose()?;
    Ok(EncryptedInput { xgb, svm })
}

pub fn write_results(dir: &Path, cts: &[Ciphertext]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (j, ct) in cts.iter().enumerate() {
        write_ct(&dir.join(format!("out_{j:03}.ct")), ct)?;
    }
    Ok(())
}

pub fn read_results(dir: &Path, count: usize, params: &HeParams) -> Result<Vec<Ciphertext>> {
    (0..count)
        .map(|j| read_ct(&dir.join(format!("out_{j:03}.ct")), params))
        .collect()
}
