//! Depth-2 tree ensembles: leaf transformation, the score polynomial, and
//! the packed slot layout.
//!
//! A tree has a root node and two children. The root's comparison bit `z1`
//! routes to the left child (`z2`) when set, otherwise to the right child
//! (`z3`); leaves `c1..c4` are ordered left-left, left-right, right-left,
//! right-right. Trees are laid out class-major: tree `j` of class `c` is
//! global tree `c·k + j`, and each of the three node streams holds one slot
//! per tree.

use hedgerow_he::{Backend, PackedPlaintext};
use serde::{Deserialize, Serialize};

use crate::encoding::{compare_clear, encode_feature, SplitCode, TernaryFeature};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransformedLeaves {
    pub l1: i64,
    pub l2: i64,
    pub l3: i64,
    pub l4: i64,
}

impl TransformedLeaves {
    pub fn as_array(&self) -> [i64; 4] {
        [self.l1, self.l2, self.l3, self.l4]
    }
}

pub fn transform_leaves(c: [i64; 4]) -> TransformedLeaves {
    TransformedLeaves {
        l1: c[0] - c[1],
        l2: c[1] - c[3],
        l3: c[3] - c[2],
        l4: c[3],
    }
}

/// Sum of the four path terms; exactly one is selected by `z`.
pub fn path_score_clear(z: [u8; 3], c: [i64; 4]) -> i64 {
    let [z1, z2, z3] = z.map(i64::from);
    z1 * z2 * c[0] + z1 * (1 - z2) * c[1] + (1 - z1) * z3 * c[2] + (1 - z1) * (1 - z3) * c[3]
}

/// The simplified score polynomial over transformed leaves.
pub fn tree_score_clear(z: [u8; 3], l: TransformedLeaves) -> i64 {
    let [z1, z2, z3] = z.map(i64::from);
    (z1 - 1) * l.l3 * z3 + (z2 * l.l1 + l.l2) * z1 + l.l4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Root,
    Left,
    Right,
}

impl Node {
    pub const ALL: [Node; 3] = [Node::Root, Node::Left, Node::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Node::Root => "root",
            Node::Left => "left",
            Node::Right => "right",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Depth2Tree {
    /// Feature index per node, in root / left / right order.
    pub features: [usize; 3],
    pub splits: [SplitCode; 3],
    /// Fixed-point leaf scores.
    pub leaves: [i64; 4],
}

impl Depth2Tree {
    /// A tree that scores zero on every input.
    pub fn zero() -> Self {
        let y = SplitCode::new(0).expect("bit");
        Self {
            features: [0; 3],
            splits: [y; 3],
            leaves: [0; 4],
        }
    }

    pub fn comparison_bits(&self, sample: &[TernaryFeature]) -> [u8; 3] {
        [0, 1, 2].map(|i| compare_clear(encode_feature(sample[self.features[i]]), self.splits[i]))
    }

    pub fn score(&self, sample: &[TernaryFeature]) -> i64 {
        path_score_clear(self.comparison_bits(sample), self.leaves)
    }
}

/// `s` classes of `k` trees each, class-major, with fixed-point leaves at
/// scale `2^scale_bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ensemble {
    pub num_classes: usize,
    pub trees_per_class: usize,
    pub scale_bits: u32,
    pub trees: Vec<Depth2Tree>,
}

impl Ensemble {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Model(m));
        if self.num_classes == 0 {
            return bad("no classes".into());
        }
        if !self.trees_per_class.is_power_of_two() {
            return bad(format!("{} trees per class is not a power of two", self.trees_per_class));
        }
        if self.trees.len() != self.num_classes * self.trees_per_class {
            return bad(format!(
                "{} trees for {} classes of {}",
                self.trees.len(),
                self.num_classes,
                self.trees_per_class
            ));
        }
        Ok(())
    }

    pub fn tree(&self, class: usize, j: usize) -> &Depth2Tree {
        &self.trees[class * self.trees_per_class + j]
    }

    /// Largest feature index consulted, plus one.
    pub fn feature_span(&self) -> usize {
        self.trees
            .iter()
            .flat_map(|t| t.features)
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Worst-case absolute class sum over all inputs.
    pub fn aggregate_bound(&self) -> u128 {
        (0..self.num_classes)
            .map(|c| {
                (0..self.trees_per_class)
                    .map(|j| {
                        let t = self.tree(c, j);
                        t.leaves.iter().map(|x| x.unsigned_abs() as u128).max().unwrap_or(0)
                    })
                    .sum::<u128>()
            })
            .max()
            .unwrap_or(0)
    }

    /// Tree-by-tree fixed-point class sums.
    pub fn class_sums_clear(&self, sample: &[TernaryFeature]) -> Result<Vec<i64>> {
        let span = self.feature_span();
        if sample.len() < span {
            return Err(Error::FeatureOutOfRange {
                index: span - 1,
                features: sample.len(),
            });
        }
        Ok((0..self.num_classes)
            .map(|c| (0..self.trees_per_class).map(|j| self.tree(c, j).score(sample)).sum())
            .collect())
    }
}

/// Placement of trees into ciphertext blocks of `slot_count` slots.
///
/// Whole classes are kept together: a block holds `floor(N / k)` classes, so
/// every class sum is a single aligned block sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub slot_count: usize,
    pub num_classes: usize,
    pub trees_per_class: usize,
    pub classes_per_block: usize,
    pub blocks: usize,
}

impl BlockLayout {
    pub fn new(num_classes: usize, trees_per_class: usize, slot_count: usize) -> Result<Self> {
        if !trees_per_class.is_power_of_two() || trees_per_class > slot_count {
            return Err(Error::Shape(format!(
                "{trees_per_class} trees per class cannot be packed into {slot_count} slots"
            )));
        }
        let classes_per_block = (slot_count / trees_per_class).min(num_classes.max(1));
        Ok(Self {
            slot_count,
            num_classes,
            trees_per_class,
            classes_per_block,
            blocks: num_classes.div_ceil(classes_per_block),
        })
    }

    pub fn for_ensemble(e: &Ensemble, slot_count: usize) -> Result<Self> {
        Self::new(e.num_classes, e.trees_per_class, slot_count)
    }

    /// (block, slot) of global tree `index`.
    pub fn tree_position(&self, index: usize) -> (usize, usize) {
        let class = index / self.trees_per_class;
        let (block, slot) = self.class_position(class);
        (block, slot + index % self.trees_per_class)
    }

    /// (block, slot) where class `c`'s sum lands.
    pub fn class_position(&self, class: usize) -> (usize, usize) {
        (
            class / self.classes_per_block,
            (class % self.classes_per_block) * self.trees_per_class,
        )
    }

    /// Classes stored in `block`.
    pub fn block_classes(&self, block: usize) -> std::ops::Range<usize> {
        let start = block * self.classes_per_block;
        start..(start + self.classes_per_block).min(self.num_classes)
    }

    /// Class sums read from decoded block slot vectors.
    pub fn read_class_sums(&self, blocks: &[Vec<i64>]) -> Result<Vec<i64>> {
        if blocks.len() != self.blocks {
            return Err(Error::Shape(format!("expected {} blocks, got {}", self.blocks, blocks.len())));
        }
        Ok((0..self.num_classes)
            .map(|c| {
                let (b, s) = self.class_position(c);
                blocks[b][s]
            })
            .collect())
    }
}

/// Three aligned per-node values (ciphertexts, plaintexts or slot vectors).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeStreams<T> {
    pub root: T,
    pub left: T,
    pub right: T,
}

impl<T> NodeStreams<T> {
    pub fn from_fn(mut f: impl FnMut(Node) -> T) -> Self {
        Self {
            root: f(Node::Root),
            left: f(Node::Left),
            right: f(Node::Right),
        }
    }

    pub fn try_from_fn<E>(mut f: impl FnMut(Node) -> std::result::Result<T, E>) -> std::result::Result<Self, E> {
        Ok(Self {
            root: f(Node::Root)?,
            left: f(Node::Left)?,
            right: f(Node::Right)?,
        })
    }

    pub fn get(&self, node: Node) -> &T {
        match node {
            Node::Root => &self.root,
            Node::Left => &self.left,
            Node::Right => &self.right,
        }
    }

    pub fn try_map<U, E>(&self, mut f: impl FnMut(&T) -> std::result::Result<U, E>) -> std::result::Result<NodeStreams<U>, E> {
        Ok(NodeStreams {
            root: f(&self.root)?,
            left: f(&self.left)?,
            right: f(&self.right)?,
        })
    }
}

/// Per-block split-code slot vectors (node streams).
pub fn split_streams(e: &Ensemble, layout: &BlockLayout) -> Vec<NodeStreams<Vec<i64>>> {
    let mut out = vec![NodeStreams::from_fn(|_| vec![0i64; layout.slot_count]); layout.blocks];
    for (i, tree) in e.trees.iter().enumerate() {
        let (b, s) = layout.tree_position(i);
        for node in Node::ALL {
            let stream = match node {
                Node::Root => &mut out[b].root,
                Node::Left => &mut out[b].left,
                Node::Right => &mut out[b].right,
            };
            stream[s] = tree.splits[node.index()].bit() as i64;
        }
    }
    out
}

/// Per-block transformed-leaf slot vectors `l1..l4`.
pub fn leaf_streams(e: &Ensemble, layout: &BlockLayout) -> Vec<[Vec<i64>; 4]> {
    let mut out = vec![std::array::from_fn(|_| vec![0i64; layout.slot_count]); layout.blocks];
    for (i, tree) in e.trees.iter().enumerate() {
        let (b, s) = layout.tree_position(i);
        for (stream, l) in out[b].iter_mut().zip(transform_leaves(tree.leaves).as_array()) {
            stream[s] = l;
        }
    }
    out
}

/// Transformed-leaf plaintexts prepared for repeated scoring.
pub struct PreparedLeaves<B: Backend> {
    l: [B::Plaintext; 4],
    one: B::Plaintext,
}

impl<B: Backend> PreparedLeaves<B> {
    pub fn new(backend: &B, l: &[PackedPlaintext; 4]) -> Result<Self> {
        Ok(Self {
            l: [
                backend.prepare(&l[0])?,
                backend.prepare(&l[1])?,
                backend.prepare(&l[2])?,
                backend.prepare(&l[3])?,
            ],
            one: backend.constant(1)?,
        })
    }
}

/// `z1·z2` and `(z1 - 1)·z3`, the two products every scoring variant needs.
fn path_products<B: Backend>(
    backend: &B,
    zs: &NodeStreams<B::Ciphertext>,
    one: &B::Plaintext,
) -> Result<(B::Ciphertext, B::Ciphertext)> {
    let left = backend.mul(&zs.root, &zs.left)?;
    let right = backend.mul(&backend.sub_plain(&zs.root, one)?, &zs.right)?;
    Ok((left, right))
}

/// Slot-wise tree scores with plaintext leaves; one level of depth.
pub fn tree_scores_encrypted<B: Backend>(
    backend: &B,
    zs: &NodeStreams<B::Ciphertext>,
    l: &[PackedPlaintext; 4],
) -> Result<B::Ciphertext> {
    tree_scores_prepared(backend, zs, &PreparedLeaves::new(backend, l)?)
}

pub fn tree_scores_prepared<B: Backend>(
    backend: &B,
    zs: &NodeStreams<B::Ciphertext>,
    l: &PreparedLeaves<B>,
) -> Result<B::Ciphertext> {
    let (left, right) = path_products(backend, zs, &l.one)?;
    let mut acc = backend.mul_plain(&left, &l.l[0])?;
    acc = backend.add(&acc, &backend.mul_plain(&right, &l.l[2])?)?;
    acc = backend.add(&acc, &backend.mul_plain(&zs.root, &l.l[1])?)?;
    Ok(backend.add_plain(&acc, &l.l[3])?)
}

/// Slot-wise tree scores with encrypted leaves; two levels of depth.
pub fn tree_scores_encrypted_model<B: Backend>(
    backend: &B,
    zs: &NodeStreams<B::Ciphertext>,
    l: &[B::Ciphertext; 4],
) -> Result<B::Ciphertext> {
    let one = backend.constant(1)?;
    let (left, right) = path_products(backend, zs, &one)?;
    let mut acc = backend.mul(&left, &l[0])?;
    acc = backend.add(&acc, &backend.mul(&right, &l[2])?)?;
    acc = backend.add(&acc, &backend.mul(&zs.root, &l[1])?)?;
    Ok(backend.add(&acc, &l[3])?)
}

/// Slot `c·k` of the result holds the sum of the `k` tree scores of block class `c`.
pub fn class_sums<B: Backend>(backend: &B, scores: &B::Ciphertext, k: usize) -> Result<B::Ciphertext> {
    Ok(backend.sum_slots(scores, k)?)
}

/// Index of the largest score; ties go to the lowest index.
pub fn predict_class<T: PartialOrd + Copy>(scores: &[T]) -> Result<usize> {
    let (first, rest) = scores.split_first().ok_or(Error::EmptyScores)?;
    let mut best = (0, *first);
    for (i, &s) in rest.iter().enumerate() {
        if s > best.1 {
            best = (i + 1, s);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL_Z: [[u8; 3]; 8] = [
        [0, 0, 0],
        [0, 0, 1],
        [0, 1, 0],
        [0, 1, 1],
        [1, 0, 0],
        [1, 0, 1],
        [1, 1, 0],
        [1, 1, 1],
    ];

    #[test]
    fn constant_tree() {
        let l = transform_leaves([5; 4]);
        assert_eq!(l.as_array(), [0, 0, 0, 5]);
        assert!(ALL_Z.iter().all(|&z| tree_score_clear(z, l) == 5));
    }

    #[test]
    fn single_leaf_tree() {
        let c = [1, 0, 0, 0];
        let l = transform_leaves(c);
        for z in ALL_Z {
            let expected = i64::from(z[0] == 1 && z[1] == 1);
            assert_eq!(tree_score_clear(z, l), expected, "{z:?}");
            assert_eq!(path_score_clear(z, c), expected);
        }
    }

    #[test]
    fn path_selection() {
        let c = [11, 22, 33, 44];
        assert_eq!(path_score_clear([1, 1, 0], c), 11);
        assert_eq!(path_score_clear([0, 0, 0], c), 44);
        assert_eq!(path_score_clear([0, 1, 1], c), 33);
        let l = transform_leaves(c);
        assert_eq!(tree_score_clear([1, 1, 0], l), 11);
        assert_eq!(tree_score_clear([0, 0, 0], l), 44);
        assert_eq!(tree_score_clear([0, 1, 1], l), 33);
    }

    #[test]
    fn identity_leaves_disagree_with_paths() {
        let c = [1, 2, 3, 4];
        let naive = TransformedLeaves { l1: 1, l2: 2, l3: 3, l4: 4 };
        assert!(ALL_Z.iter().any(|&z| tree_score_clear(z, naive) != path_score_clear(z, c)));
    }

    #[test]
    fn argmax() {
        assert_eq!(predict_class(&[0.1, 0.9, 0.3]).unwrap(), 1);
        assert_eq!(predict_class(&[5, 5]).unwrap(), 0);
        assert!(matches!(predict_class::<i64>(&[]), Err(Error::EmptyScores)));
    }

    #[test]
    fn layout_spills_whole_classes() {
        let l = BlockLayout::new(11, 128, 1024).unwrap();
        assert_eq!(l.classes_per_block, 8);
        assert_eq!(l.blocks, 2);
        assert_eq!(l.tree_position(8 * 128 + 3), (1, 3));
        assert_eq!(l.class_position(10), (1, 256));
        assert_eq!(l.block_classes(1), 8..11);
        let single = BlockLayout::new(11, 128, 16384).unwrap();
        assert_eq!((single.blocks, single.classes_per_block), (1, 11));
        assert!(BlockLayout::new(2, 3, 16).is_err());
    }
}
