//! Per-node feature vectors and level-wise batch layout.
//!
//! A node is described by four vectors: the operator one-hot `O`, the
//! metadata bitmap `M` (tables, then columns, then indexes of the catalog),
//! the sample bitmap `B` and the encoded predicate tree `P`.
//!
//! Predicate leaf code layout, with `C` catalog columns and string width
//! `d_s`:
//!
//! ```text
//! [column one-hot C][operator one-hot 7][numeric 1][string d_s]
//! [operand column one-hot C][operand kind: number, string, column][fallback 1]
//! ```

use std::sync::Arc;

use crate::data::{SampleStore, Table};
use crate::plan::{CmpOp, Condition, Operand, Operator, PlanDigest, PlanNode, PlanTree, Predicate};
use crate::schema::{ColumnType, SchemaCatalog, SchemaError};
use crate::strings::hash::hash_bitmap;
use crate::strings::pipeline::{lookup_mode, search_string};
use crate::strings::trie::TriePair;

pub const DEFAULT_SAMPLE_SIZE: usize = 1000;
pub const DEFAULT_STRING_DIM: usize = 64;
pub const DEFAULT_MAX_PREDICATE_CODES: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("predicate serializes to {len} codes, limit is {limit}")]
    PredicateTooLong { len: usize, limit: usize },
    #[error("operand of `{column}` does not match the column type")]
    TypeMismatch { column: String },
    #[error("no sample for table `{0}`")]
    MissingSample(String),
    #[error("string encoder width {got} does not match configured {expected}")]
    StringWidth { expected: usize, got: usize },
}

/// How string operands fill the string slot of a leaf code.
#[derive(Debug, Clone)]
pub enum StringEncoder {
    Hash,
    /// Trie lookup of mined substrings; misses fall back to the hash bitmap
    /// and raise the fallback flag.
    Embedding(Arc<TriePair>),
}

impl StringEncoder {
    pub fn name(&self) -> &'static str {
        match self {
            StringEncoder::Hash => "hash",
            StringEncoder::Embedding(_) => "embed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FeaturizerConfig {
    pub sample_size: usize,
    pub string_dim: usize,
    pub max_predicate_codes: usize,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            sample_size: DEFAULT_SAMPLE_SIZE,
            string_dim: DEFAULT_STRING_DIM,
            max_predicate_codes: DEFAULT_MAX_PREDICATE_CODES,
        }
    }
}

/// Binary predicate tree with encoded leaves.
#[derive(Debug, Clone, PartialEq)]
pub enum EncodedPredicate {
    And(Box<EncodedPredicate>, Box<EncodedPredicate>),
    Or(Box<EncodedPredicate>, Box<EncodedPredicate>),
    Leaf(Vec<f32>),
}

impl EncodedPredicate {
    pub fn node_count(&self) -> usize {
        match self {
            EncodedPredicate::Leaf(_) => 1,
            EncodedPredicate::And(a, b) | EncodedPredicate::Or(a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn leaves(&self) -> Vec<&[f32]> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(p) = stack.pop() {
            match p {
                EncodedPredicate::Leaf(v) => out.push(v.as_slice()),
                EncodedPredicate::And(a, b) | EncodedPredicate::Or(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
            }
        }
        out
    }
}

/// One entry of the depth-first predicate sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum PredicateCode {
    And,
    Or,
    Leaf(Vec<f32>),
    /// Emitted when the walk backtracks out of a child.
    Empty,
}

/// Depth-first sequence: every node on entry, and an `Empty` code each time
/// the walk returns from a child. `AND(a,b)` becomes `[AND, a, Empty, b, Empty]`.
pub fn serialize_predicate(p: &EncodedPredicate) -> Vec<PredicateCode> {
    let mut out = Vec::new();
    emit(p, &mut out);
    out
}

fn emit(p: &EncodedPredicate, out: &mut Vec<PredicateCode>) {
    match p {
        EncodedPredicate::Leaf(v) => out.push(PredicateCode::Leaf(v.clone())),
        EncodedPredicate::And(a, b) | EncodedPredicate::Or(a, b) => {
            out.push(if matches!(p, EncodedPredicate::And(..)) {
                PredicateCode::And
            } else {
                PredicateCode::Or
            });
            for child in [a, b] {
                emit(child, out);
                out.push(PredicateCode::Empty);
            }
        }
    }
}

/// Inverse of [`serialize_predicate`]; `None` on a malformed sequence.
pub fn deserialize_predicate(codes: &[PredicateCode]) -> Option<EncodedPredicate> {
    let mut pos = 0;
    let p = parse_codes(codes, &mut pos)?;
    (pos == codes.len()).then_some(p)
}

fn parse_codes(codes: &[PredicateCode], pos: &mut usize) -> Option<EncodedPredicate> {
    let head = codes.get(*pos)?;
    *pos += 1;
    match head {
        PredicateCode::Leaf(v) => Some(EncodedPredicate::Leaf(v.clone())),
        PredicateCode::Empty => None,
        PredicateCode::And | PredicateCode::Or => {
            let mut kids = Vec::with_capacity(2);
            for _ in 0..2 {
                kids.push(parse_codes(codes, pos)?);
                if codes.get(*pos) != Some(&PredicateCode::Empty) {
                    return None;
                }
                *pos += 1;
            }
            let b = Box::new(kids.pop()?);
            let a = Box::new(kids.pop()?);
            Some(if *head == PredicateCode::And {
                EncodedPredicate::And(a, b)
            } else {
                EncodedPredicate::Or(a, b)
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub op: Vec<f32>,
    pub meta: Vec<f32>,
    pub sample: Vec<f32>,
    pub predicate: Option<EncodedPredicate>,
}

/// One encoded plan in pre-order; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTree {
    pub nodes: Vec<NodeFeatures>,
    pub left: Vec<Option<usize>>,
    pub right: Vec<Option<usize>>,
    /// `(card, cost)` labels where present.
    pub labels: Vec<Option<(f64, f64)>>,
    pub digests: Vec<PlanDigest>,
}

impl EncodedTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &EncodedTree, i: usize) -> usize {
            1 + [t.left[i], t.right[i]].into_iter().flatten().map(|c| go(t, c)).max().unwrap_or(0)
        }
        go(self, 0)
    }

    pub fn root_labels(&self) -> Option<(f64, f64)> {
        self.labels[0]
    }
}

/// All nodes at one depth across a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    /// `(tree, node)` for every row of this level.
    pub members: Vec<(usize, usize)>,
    /// Row in the next level of each node's left and right child, or -1.
    pub left: Vec<i64>,
    pub right: Vec<i64>,
}

/// Width-first layout of a batch: level 0 holds every root.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPlanBatch {
    pub trees: Vec<EncodedTree>,
    pub levels: Vec<Level>,
}

impl EncodedPlanBatch {
    pub fn new(trees: Vec<EncodedTree>) -> Self {
        let mut levels: Vec<Level> = Vec::new();
        // Nodes of the current frontier as (tree, node).
        let mut frontier: Vec<(usize, usize)> = (0..trees.len()).map(|t| (t, 0)).collect();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            let mut left = Vec::with_capacity(frontier.len());
            let mut right = Vec::with_capacity(frontier.len());
            for &(t, n) in &frontier {
                for (slot, out) in [(trees[t].left[n], &mut left), (trees[t].right[n], &mut right)] {
                    match slot {
                        Some(c) => {
                            out.push(next.len() as i64);
                            next.push((t, c));
                        }
                        None => out.push(-1),
                    }
                }
            }
            levels.push(Level {
                members: frontier,
                left,
                right,
            });
            frontier = next;
        }
        EncodedPlanBatch { trees, levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn features(&self, tree: usize, node: usize) -> &NodeFeatures {
        &self.trees[tree].nodes[node]
    }
}

pub fn encode_operation(op: Operator) -> Vec<f32> {
    let mut v = vec![0.0; Operator::COUNT];
    v[op.index()] = 1.0;
    v
}

/// Min-max scaling clamped to `[0, 1]`; a constant column maps to 0.5.
pub fn normalize_numeric(v: f64, min: f64, max: f64) -> f32 {
    if max <= min {
        return 0.5;
    }
    ((v - min) / (max - min)).clamp(0.0, 1.0) as f32
}

/// Bit `i` is set iff sample row `i` satisfies `p`.
pub fn compute_sample_bitmap(p: &Predicate, sample: &Table, width: usize) -> Vec<f32> {
    let mut bits = vec![0.0; width];
    for row in sample.filter(Some(p)) {
        if row < width {
            bits[row] = 1.0;
        }
    }
    bits
}

#[derive(Debug, Clone)]
pub struct Featurizer {
    pub catalog: SchemaCatalog,
    pub store: Arc<SampleStore>,
    pub encoder: StringEncoder,
    pub config: FeaturizerConfig,
}

impl Featurizer {
    pub fn new(
        catalog: SchemaCatalog,
        store: Arc<SampleStore>,
        encoder: StringEncoder,
        config: FeaturizerConfig,
    ) -> Result<Self, FeatureError> {
        if let StringEncoder::Embedding(t) = &encoder {
            if t.dim() != config.string_dim {
                return Err(FeatureError::StringWidth {
                    expected: config.string_dim,
                    got: t.dim(),
                });
            }
        }
        Ok(Featurizer {
            catalog,
            store,
            encoder,
            config,
        })
    }

    pub fn op_width(&self) -> usize {
        Operator::COUNT
    }

    pub fn meta_width(&self) -> usize {
        self.catalog.meta_width()
    }

    pub fn sample_width(&self) -> usize {
        self.config.sample_size
    }

    pub fn leaf_width(&self) -> usize {
        let c = self.catalog.columns.len();
        c + CmpOp::ALL.len() + 1 + self.config.string_dim + c + 3 + 1
    }

    pub fn encode_metadata(&self, node: &PlanNode) -> Result<Vec<f32>, FeatureError> {
        let t = self.catalog.tables.len();
        let c = self.catalog.columns.len();
        let mut bits = vec![0.0; self.meta_width()];
        for table in node.referenced_tables() {
            bits[self.catalog.table_index(&table)?] = 1.0;
        }
        for col in node.referenced_columns() {
            bits[t + self.catalog.column_index(&col)?] = 1.0;
        }
        if let Some(ix) = &node.index {
            bits[t + c + self.catalog.index_index(ix)?] = 1.0;
        }
        Ok(bits)
    }

    pub fn encode_leaf(&self, cond: &Condition) -> Result<Vec<f32>, FeatureError> {
        let c = self.catalog.columns.len();
        let ds = self.config.string_dim;
        let col = self.catalog.column(&cond.column)?;
        let mut v = vec![0.0; self.leaf_width()];
        v[self.catalog.column_index(&cond.column)?] = 1.0;
        v[c + cond.op.index()] = 1.0;
        let numeric = c + CmpOp::ALL.len();
        let string = numeric + 1;
        let operand_col = string + ds;
        let kind = operand_col + c;
        let fallback = kind + 3;
        let mismatch = || FeatureError::TypeMismatch {
            column: cond.column.clone(),
        };
        match &cond.operand {
            Operand::Number(x) => {
                if !col.ty.is_numeric() {
                    return Err(mismatch());
                }
                v[numeric] = normalize_numeric(*x, col.min, col.max);
                v[kind] = 1.0;
            }
            Operand::Str(s) => {
                if col.ty != ColumnType::Str {
                    return Err(mismatch());
                }
                let (slot, missed) = self.encode_string(cond.op, s);
                v[string..string + ds].copy_from_slice(&slot);
                v[kind + 1] = 1.0;
                v[fallback] = missed as u8 as f32;
            }
            Operand::Column(other) => {
                v[operand_col + self.catalog.column_index(other)?] = 1.0;
                v[kind + 2] = 1.0;
            }
            // Sets are expanded before leaves are encoded.
            Operand::Set(_) => return Err(mismatch()),
        }
        Ok(v)
    }

    /// String slot contents and whether the hash fallback was used.
    fn encode_string(&self, op: CmpOp, operand: &str) -> (Vec<f32>, bool) {
        let (q, kind) = search_string(op, operand);
        match &self.encoder {
            StringEncoder::Hash => (hash_bitmap(&q, self.config.string_dim), false),
            StringEncoder::Embedding(tries) => {
                let hit = tries.lookup(&q, lookup_mode(kind));
                if hit.fallback {
                    (hash_bitmap(&q, self.config.string_dim), true)
                } else {
                    (hit.vector, false)
                }
            }
        }
    }

    pub fn encode_predicate(&self, p: &Predicate) -> Result<EncodedPredicate, FeatureError> {
        let p = if p.is_binary() && !has_set(p) {
            p.clone()
        } else {
            p.clone().expand_in().binarize()
        };
        let enc = self.encode_binary(&p)?;
        let len = 2 * enc.node_count() - 1;
        if len > self.config.max_predicate_codes {
            return Err(FeatureError::PredicateTooLong {
                len,
                limit: self.config.max_predicate_codes,
            });
        }
        Ok(enc)
    }

    fn encode_binary(&self, p: &Predicate) -> Result<EncodedPredicate, FeatureError> {
        Ok(match p {
            Predicate::Expr(c) => EncodedPredicate::Leaf(self.encode_leaf(c)?),
            Predicate::And(cs) => EncodedPredicate::And(
                Box::new(self.encode_binary(&cs[0])?),
                Box::new(self.encode_binary(&cs[1])?),
            ),
            Predicate::Or(cs) => EncodedPredicate::Or(
                Box::new(self.encode_binary(&cs[0])?),
                Box::new(self.encode_binary(&cs[1])?),
            ),
        })
    }

    pub fn encode_node(&self, node: &PlanNode) -> Result<NodeFeatures, FeatureError> {
        let predicate = node.predicate.as_ref().map(|p| self.encode_predicate(p)).transpose()?;
        let sample = match (&node.predicate, &node.table) {
            (Some(p), Some(table)) if node.op.is_scan() => {
                let s = self
                    .store
                    .get(table)
                    .ok_or_else(|| FeatureError::MissingSample(table.clone()))?;
                compute_sample_bitmap(p, &s.rows, self.sample_width())
            }
            _ => vec![0.0; self.sample_width()],
        };
        Ok(NodeFeatures {
            op: encode_operation(node.op),
            meta: self.encode_metadata(node)?,
            sample,
            predicate,
        })
    }

    /// Encodes a plan; non-binary plans are binarized first.
    pub fn encode_tree(&self, plan: &PlanTree) -> Result<EncodedTree, FeatureError> {
        let binary;
        let root = if plan.is_binary() {
            &plan.root
        } else {
            binary = plan.clone().binarize();
            &binary.root
        };
        let mut out = EncodedTree {
            nodes: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            labels: Vec::new(),
            digests: Vec::new(),
        };
        self.push_node(root, &mut out)?;
        Ok(out)
    }

    fn push_node(&self, node: &PlanNode, out: &mut EncodedTree) -> Result<usize, FeatureError> {
        let idx = out.nodes.len();
        out.nodes.push(self.encode_node(node)?);
        out.left.push(None);
        out.right.push(None);
        out.labels.push(node.true_card.zip(node.true_cost));
        out.digests.push(node.canonical_hash());
        if let Some(l) = node.left() {
            out.left[idx] = Some(self.push_node(l, out)?);
        }
        if let Some(r) = node.right() {
            out.right[idx] = Some(self.push_node(r, out)?);
        }
        Ok(idx)
    }

    pub fn encode_plan_batch(&self, plans: &[PlanTree]) -> Result<EncodedPlanBatch, FeatureError> {
        let trees = plans.iter().map(|p| self.encode_tree(p)).collect::<Result<Vec<_>, _>>()?;
        Ok(EncodedPlanBatch::new(trees))
    }
}

fn has_set(p: &Predicate) -> bool {
    p.leaves().iter().any(|c| matches!(c.operand, Operand::Set(_)) || c.op == CmpOp::In)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, ColumnData, Dataset};
    use crate::plan::Literal;
    use crate::schema::{ForeignKey, IndexInfo};

    fn dataset() -> Dataset {
        let a = Table::new(
            "a",
            vec![
                Column {
                    name: "a.id".into(),
                    data: ColumnData::Int((0..100).collect()),
                },
                Column {
                    name: "a.x".into(),
                    data: ColumnData::Float((0..100).map(|i| i as f64 / 10.0).collect()),
                },
                Column {
                    name: "a.s".into(),
                    data: ColumnData::Str((0..100).map(|i| format!("Din{}", i % 7)).collect()),
                },
            ],
        );
        let b = Table::new(
            "b",
            vec![
                Column {
                    name: "b.id".into(),
                    data: ColumnData::Int((0..50).collect()),
                },
                Column {
                    name: "b.a_id".into(),
                    data: ColumnData::Int((0..50).map(|i| i * 2).collect()),
                },
            ],
        );
        Dataset::from_tables(
            vec![a, b],
            vec![IndexInfo {
                name: "a_pkey".into(),
                column: "a.id".into(),
            }],
            vec![ForeignKey {
                from: "b.a_id".into(),
                to: "a.id".into(),
            }],
        )
    }

    fn featurizer(ds: &Dataset) -> Featurizer {
        let store = Arc::new(SampleStore::draw(ds, 64, 1));
        let cfg = FeaturizerConfig {
            sample_size: 64,
            string_dim: 8,
            max_predicate_codes: 32,
        };
        Featurizer::new(ds.catalog.clone(), store, StringEncoder::Hash, cfg).unwrap()
    }

    fn leaf(i: u8) -> EncodedPredicate {
        EncodedPredicate::Leaf(vec![i as f32])
    }

    #[test]
    fn operation_one_hot() {
        assert_eq!(encode_operation(Operator::HashJoin).len(), 14);
        assert_eq!(encode_operation(Operator::HashJoin).iter().sum::<f32>(), 1.0);
        assert_ne!(encode_operation(Operator::SeqScan), encode_operation(Operator::IndexScan));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_numeric(2.0, 2.0, 6.0), 0.0);
        assert_eq!(normalize_numeric(6.0, 2.0, 6.0), 1.0);
        assert_eq!(normalize_numeric(4.0, 2.0, 6.0), 0.5);
        assert_eq!(normalize_numeric(60.0, 2.0, 6.0), 1.0);
        assert_eq!(normalize_numeric(-60.0, 2.0, 6.0), 0.0);
        assert_eq!(normalize_numeric(3.0, 3.0, 3.0), 0.5);
    }

    #[test]
    fn dfs_sequence_with_sentinels() {
        assert_eq!(serialize_predicate(&leaf(1)), vec![PredicateCode::Leaf(vec![1.0])]);
        let and = EncodedPredicate::And(Box::new(leaf(1)), Box::new(leaf(2)));
        assert_eq!(
            serialize_predicate(&and),
            vec![
                PredicateCode::And,
                PredicateCode::Leaf(vec![1.0]),
                PredicateCode::Empty,
                PredicateCode::Leaf(vec![2.0]),
                PredicateCode::Empty,
            ]
        );
        assert_eq!(deserialize_predicate(&serialize_predicate(&and)), Some(and));
        assert_eq!(deserialize_predicate(&[PredicateCode::And, PredicateCode::Empty]), None);
    }

    /// Every binary AND/OR tree shape over the given leaf sequence.
    fn all_trees(leaves: &[u8]) -> Vec<EncodedPredicate> {
        if leaves.len() == 1 {
            return vec![leaf(leaves[0])];
        }
        let mut out = Vec::new();
        for split in 1..leaves.len() {
            for l in all_trees(&leaves[..split]) {
                for r in all_trees(&leaves[split..]) {
                    out.push(EncodedPredicate::And(Box::new(l.clone()), Box::new(r.clone())));
                    out.push(EncodedPredicate::Or(Box::new(l.clone()), Box::new(r.clone())));
                }
            }
        }
        out
    }

    #[test]
    fn serialization_is_injective() {
        // Up to five leaves, i.e. four internal nodes, with repeated leaves.
        let mut seqs = Vec::new();
        for n in 1..=5 {
            for pattern in 0..(1u32 << n) {
                let leaves: Vec<u8> = (0..n).map(|i| ((pattern >> i) & 1) as u8).collect();
                for t in all_trees(&leaves) {
                    seqs.push((format!("{:?}", serialize_predicate(&t)), format!("{t:?}")));
                }
            }
        }
        let mut by_seq = std::collections::HashMap::new();
        for (s, t) in &seqs {
            if let Some(prev) = by_seq.insert(s.clone(), t.clone()) {
                assert_eq!(&prev, t);
            }
        }
    }

    #[test]
    fn metadata_bits() {
        let ds = dataset();
        let f = featurizer(&ds);
        let scan = PlanNode::scan(Operator::SeqScan, "a").with_columns(["a.x"]);
        let m = f.encode_metadata(&scan).unwrap();
        let t = ds.catalog.tables.len();
        assert_eq!(m[ds.catalog.table_index("a").unwrap()], 1.0);
        assert_eq!(m[t + ds.catalog.column_index("a.x").unwrap()], 1.0);
        assert_eq!(m.iter().sum::<f32>(), 2.0);
        let join = PlanNode::new(Operator::HashJoin).with_predicate(Predicate::expr(
            "b.a_id",
            CmpOp::Eq,
            Operand::Column("a.id".into()),
        ));
        let m = f.encode_metadata(&join).unwrap();
        assert_eq!(m[0] + m[1], 2.0);
        assert!(f.encode_metadata(&PlanNode::new(Operator::Sort)).unwrap().iter().all(|&b| b == 0.0));
        let bad = PlanNode::scan(Operator::SeqScan, "nope");
        assert!(f.encode_metadata(&bad).is_err());
    }

    #[test]
    fn sample_bitmaps() {
        let ds = dataset();
        let f = featurizer(&ds);
        let sample = &f.store.get("a").unwrap().rows;
        let n = sample.rows();
        let all = Predicate::expr("a.x", CmpOp::Gt, Operand::Number(-1.0));
        let bits = compute_sample_bitmap(&all, sample, 64);
        assert_eq!(bits.iter().sum::<f32>() as usize, n);
        let none = Predicate::expr("a.x", CmpOp::Gt, Operand::Number(1e9));
        assert!(compute_sample_bitmap(&none, sample, 64).iter().all(|&b| b == 0.0));
        let p = Predicate::expr("a.x", CmpOp::Lt, Operand::Number(5.0));
        let q = Predicate::expr("a.s", CmpOp::Like, Operand::Str("%3".into()));
        let bp = compute_sample_bitmap(&p, sample, 64);
        let bq = compute_sample_bitmap(&q, sample, 64);
        let band = compute_sample_bitmap(&Predicate::And(vec![p.clone(), q.clone()]), sample, 64);
        let bor = compute_sample_bitmap(&Predicate::Or(vec![p, q]), sample, 64);
        for i in 0..64 {
            assert_eq!(band[i], bp[i].min(bq[i]));
            assert_eq!(bor[i], bp[i].max(bq[i]));
        }
    }

    #[test]
    fn leaf_codes() {
        let ds = dataset();
        let f = featurizer(&ds);
        let num = f
            .encode_leaf(&Condition::new("a.x", CmpOp::Gt, Operand::Number(4.95)))
            .unwrap();
        assert_eq!(num.len(), f.leaf_width());
        let c = ds.catalog.columns.len();
        assert!((num[c + 7] - 0.5).abs() < 1e-6);
        assert!(num[c + 8..c + 8 + 8].iter().all(|&x| x == 0.0));
        let s = f
            .encode_leaf(&Condition::new("a.s", CmpOp::Like, Operand::Str("Din%".into())))
            .unwrap();
        assert_eq!(s[c + 7], 0.0);
        assert_eq!(&s[c + 8..c + 16], hash_bitmap("Din", 8).as_slice());
        assert!(f
            .encode_leaf(&Condition::new("a.s", CmpOp::Gt, Operand::Number(1.0)))
            .is_err());
    }

    #[test]
    fn in_lists_expand_and_length_cap() {
        let ds = dataset();
        let mut f = featurizer(&ds);
        let items: Vec<Literal> = (0..4).map(|i| Literal::Str(format!("Din{i}"))).collect();
        let p = Predicate::expr("a.s", CmpOp::In, Operand::Set(items));
        let enc = f.encode_predicate(&p).unwrap();
        assert_eq!(enc.node_count(), 7);
        f.config.max_predicate_codes = 11;
        assert!(matches!(
            f.encode_predicate(&p),
            Err(FeatureError::PredicateTooLong { len: 13, limit: 11 })
        ));
    }

    #[test]
    fn batch_levels() {
        let ds = dataset();
        let f = featurizer(&ds);
        let scan = |t: &str| PlanNode::scan(Operator::SeqScan, t);
        let single = PlanTree::new(scan("a")).unwrap();
        let b = f.encode_plan_batch(std::slice::from_ref(&single)).unwrap();
        assert_eq!(b.depth(), 1);
        assert_eq!(b.levels[0].left, vec![-1]);
        let join = |l: PlanNode, r: PlanNode| PlanNode::new(Operator::HashJoin).with_children(vec![l, r]);
        let full = PlanTree::new(join(join(scan("a"), scan("b")), join(scan("b"), scan("a")))).unwrap();
        let b = f.encode_plan_batch(&[full, single]).unwrap();
        let sizes: Vec<usize> = b.levels.iter().map(|l| l.members.len()).collect();
        assert_eq!(sizes, vec![2, 2, 4]);
        assert_eq!(b.levels[0].left, vec![0, -1]);
        assert_eq!(b.levels[1].right, vec![1, 3]);
        assert!(b.levels[2].left.iter().all(|&i| i == -1));
    }

    #[test]
    fn reencoding_after_reload_is_identical() {
        let ds = dataset();
        let f = featurizer(&ds);
        let reloaded = SchemaCatalog::parse(&ds.catalog.to_text()).unwrap();
        let g = Featurizer::new(reloaded, f.store.clone(), StringEncoder::Hash, f.config).unwrap();
        let plan = PlanTree::new(
            PlanNode::scan(Operator::SeqScan, "a")
                .with_predicate(Predicate::expr("a.s", CmpOp::Eq, Operand::Str("Din3".into()))),
        )
        .unwrap();
        assert_eq!(f.encode_tree(&plan).unwrap(), g.encode_tree(&plan).unwrap());
    }
}
