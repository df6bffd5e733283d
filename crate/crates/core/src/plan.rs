//! Physical plan trees and predicate trees.
//!
//! Plans arrive as JSON documents (see `docs/plan-format.md`). Parsing
//! validates operator arity and eliminates `NOT`: negations are pushed to
//! the leaves by De Morgan and folded into the comparison operator, and
//! `IN` lists are expanded into a balanced `OR` of equalities. After
//! [`PlanTree::binarize`] every internal node has exactly two children;
//! unary operators get an explicit empty right child.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Smallest cardinality label. Empty results are clamped here.
pub const MIN_CARD: f64 = 1.0;
/// Smallest cost label.
pub const MIN_COST: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown operator kind `{0}`")]
    UnknownOperator(String),
    #[error("unknown comparison operator `{0}`")]
    UnknownComparison(String),
    #[error("{op}: {message}")]
    Arity { op: Operator, message: String },
    #[error("{0} requires a table")]
    MissingTable(Operator),
    #[error("predicate references no column")]
    MissingColumn,
    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Aggregate,
    Sort,
    HashJoin,
    MergeJoin,
    NestedLoopJoin,
    SeqScan,
    IndexScan,
    IndexOnlyScan,
    BitmapHeapScan,
    BitmapIndexScan,
    HashAggregate,
    PlainAggregate,
    HashSort,
    MergeSort,
}

impl Operator {
    pub const ALL: [Operator; 14] = [
        Operator::Aggregate,
        Operator::Sort,
        Operator::HashJoin,
        Operator::MergeJoin,
        Operator::NestedLoopJoin,
        Operator::SeqScan,
        Operator::IndexScan,
        Operator::IndexOnlyScan,
        Operator::BitmapHeapScan,
        Operator::BitmapIndexScan,
        Operator::HashAggregate,
        Operator::PlainAggregate,
        Operator::HashSort,
        Operator::MergeSort,
    ];

    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Operator::Aggregate => "Aggregate",
            Operator::Sort => "Sort",
            Operator::HashJoin => "HashJoin",
            Operator::MergeJoin => "MergeJoin",
            Operator::NestedLoopJoin => "NestedLoopJoin",
            Operator::SeqScan => "SeqScan",
            Operator::IndexScan => "IndexScan",
            Operator::IndexOnlyScan => "IndexOnlyScan",
            Operator::BitmapHeapScan => "BitmapHeapScan",
            Operator::BitmapIndexScan => "BitmapIndexScan",
            Operator::HashAggregate => "HashAggregate",
            Operator::PlainAggregate => "PlainAggregate",
            Operator::HashSort => "HashSort",
            Operator::MergeSort => "MergeSort",
        }
    }

    /// Accepts the canonical names and their spaced forms ("Seq Scan").
    pub fn from_name(name: &str) -> Option<Operator> {
        let compact: String = name.chars().filter(|c| !c.is_whitespace()).collect();
        Self::ALL
            .iter()
            .copied()
            .find(|op| op.name().eq_ignore_ascii_case(&compact))
    }

    pub fn is_scan(self) -> bool {
        matches!(
            self,
            Operator::SeqScan
                | Operator::IndexScan
                | Operator::IndexOnlyScan
                | Operator::BitmapHeapScan
                | Operator::BitmapIndexScan
        )
    }

    pub fn is_join(self) -> bool {
        matches!(
            self,
            Operator::HashJoin | Operator::MergeJoin | Operator::NestedLoopJoin
        )
    }

    pub fn is_sort(self) -> bool {
        matches!(self, Operator::Sort | Operator::HashSort | Operator::MergeSort)
    }

    pub fn is_aggregate(self) -> bool {
        matches!(
            self,
            Operator::Aggregate | Operator::HashAggregate | Operator::PlainAggregate
        )
    }

    /// Sorts and aggregates take exactly one input.
    pub fn is_unary(self) -> bool {
        self.is_sort() || self.is_aggregate()
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Comparison operators that may appear in a predicate leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Gt,
    Lt,
    Like,
    NotLike,
    In,
}

impl CmpOp {
    pub const ALL: [CmpOp; 7] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Gt,
        CmpOp::Lt,
        CmpOp::Like,
        CmpOp::NotLike,
        CmpOp::In,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Like => "LIKE",
            CmpOp::NotLike => "NOT LIKE",
            CmpOp::In => "IN",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        let upper = s.trim().to_ascii_uppercase();
        let squashed: Vec<&str> = upper.split_whitespace().collect();
        match squashed.join(" ").as_str() {
            "=" | "==" => Some(CmpOp::Eq),
            "!=" | "<>" => Some(CmpOp::Ne),
            ">" => Some(CmpOp::Gt),
            "<" => Some(CmpOp::Lt),
            "LIKE" => Some(CmpOp::Like),
            "NOT LIKE" => Some(CmpOp::NotLike),
            "IN" => Some(CmpOp::In),
            _ => None,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Number(f64),
    Str(String),
    /// Only present before `IN` expansion.
    Set(Vec<Literal>),
    /// Right-hand column of a join condition.
    Column(String),
}

impl From<Literal> for Operand {
    fn from(lit: Literal) -> Self {
        match lit {
            Literal::Number(v) => Operand::Number(v),
            Literal::Str(s) => Operand::Str(s),
        }
    }
}

/// One `column op operand` condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub column: String,
    pub op: CmpOp,
    pub operand: Operand,
}

impl Condition {
    pub fn new(column: impl Into<String>, op: CmpOp, operand: Operand) -> Self {
        Condition {
            column: column.into(),
            op,
            operand,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Expr(Condition),
}

impl Predicate {
    pub fn expr(column: impl Into<String>, op: CmpOp, operand: Operand) -> Self {
        Predicate::Expr(Condition::new(column, op, operand))
    }

    pub fn children(&self) -> &[Predicate] {
        match self {
            Predicate::And(c) | Predicate::Or(c) => c,
            Predicate::Expr(_) => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Predicate::Expr(_))
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> Vec<&Condition> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Condition>) {
        match self {
            Predicate::Expr(c) => out.push(c),
            Predicate::And(cs) | Predicate::Or(cs) => {
                for c in cs {
                    c.collect_leaves(out);
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(Predicate::node_count).sum::<usize>()
    }

    /// Columns referenced on either side of any leaf.
    pub fn referenced_columns(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for leaf in self.leaves() {
            out.insert(leaf.column.clone());
            if let Operand::Column(c) = &leaf.operand {
                out.insert(c.clone());
            }
        }
        out
    }

    pub fn is_binary(&self) -> bool {
        match self {
            Predicate::Expr(_) => true,
            Predicate::And(cs) | Predicate::Or(cs) => {
                cs.len() == 2 && cs.iter().all(Predicate::is_binary)
            }
        }
    }

    /// Left-deep nesting of k-ary connectives: `AND(a,b,c)` becomes
    /// `AND(AND(a,b),c)`.
    pub fn binarize(self) -> Predicate {
        match self {
            Predicate::Expr(c) => Predicate::Expr(c),
            Predicate::And(cs) => nest_left(cs, Predicate::And),
            Predicate::Or(cs) => nest_left(cs, Predicate::Or),
        }
    }

    /// Pushes a negation down to the leaves.
    pub fn negate(self) -> Predicate {
        match self {
            Predicate::And(cs) => Predicate::Or(cs.into_iter().map(Predicate::negate).collect()),
            Predicate::Or(cs) => Predicate::And(cs.into_iter().map(Predicate::negate).collect()),
            Predicate::Expr(c) => negate_condition(c),
        }
    }

    /// Replaces every `IN` leaf with a balanced `OR` of equalities.
    pub fn expand_in(self) -> Predicate {
        match self {
            Predicate::And(cs) => Predicate::And(cs.into_iter().map(Predicate::expand_in).collect()),
            Predicate::Or(cs) => Predicate::Or(cs.into_iter().map(Predicate::expand_in).collect()),
            Predicate::Expr(c) => match (c.op, c.operand) {
                (CmpOp::In, Operand::Set(items)) => {
                    let leaves: Vec<Predicate> = items
                        .into_iter()
                        .map(|lit| Predicate::expr(c.column.clone(), CmpOp::Eq, lit.into()))
                        .collect();
                    balanced_or(leaves)
                }
                (CmpOp::In, single) => Predicate::expr(c.column, CmpOp::Eq, single),
                (op, operand) => Predicate::Expr(Condition {
                    column: c.column,
                    op,
                    operand,
                }),
            },
        }
    }

    /// Evaluates the predicate against one tuple. `lookup` resolves a
    /// column name to its value; unresolvable columns make the leaf false.
    pub fn eval<'a, F>(&self, lookup: &F) -> bool
    where
        F: Fn(&str) -> Option<Value<'a>>,
    {
        match self {
            Predicate::And(cs) => cs.iter().all(|c| c.eval(lookup)),
            Predicate::Or(cs) => cs.iter().any(|c| c.eval(lookup)),
            Predicate::Expr(c) => eval_condition(c, lookup),
        }
    }
}

fn nest_left(children: Vec<Predicate>, make: fn(Vec<Predicate>) -> Predicate) -> Predicate {
    let mut iter = children.into_iter().map(Predicate::binarize);
    let first = iter.next().expect("connective with no children");
    iter.fold(first, |acc, next| make(vec![acc, next]))
}

fn balanced_or(mut leaves: Vec<Predicate>) -> Predicate {
    match leaves.len() {
        0 => panic!("empty IN list"),
        1 => leaves.pop().unwrap(),
        n => {
            let right = leaves.split_off(n / 2);
            Predicate::Or(vec![balanced_or(leaves), balanced_or(right)])
        }
    }
}

fn negate_condition(c: Condition) -> Predicate {
    let Condition {
        column,
        op,
        operand,
    } = c;
    match op {
        CmpOp::Eq => Predicate::expr(column, CmpOp::Ne, operand),
        CmpOp::Ne => Predicate::expr(column, CmpOp::Eq, operand),
        CmpOp::Like => Predicate::expr(column, CmpOp::NotLike, operand),
        CmpOp::NotLike => Predicate::expr(column, CmpOp::Like, operand),
        // NOT (a > v)  ==  a < v OR a = v
        CmpOp::Gt => Predicate::Or(vec![
            Predicate::expr(column.clone(), CmpOp::Lt, operand.clone()),
            Predicate::expr(column, CmpOp::Eq, operand),
        ]),
        CmpOp::Lt => Predicate::Or(vec![
            Predicate::expr(column.clone(), CmpOp::Gt, operand.clone()),
            Predicate::expr(column, CmpOp::Eq, operand),
        ]),
        CmpOp::In => {
            let expanded = Predicate::Expr(Condition {
                column,
                op,
                operand,
            })
            .expand_in();
            expanded.negate()
        }
    }
}

/// A borrowed column value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Num(f64),
    Str(&'a str),
}

fn eval_condition<'a, F>(c: &Condition, lookup: &F) -> bool
where
    F: Fn(&str) -> Option<Value<'a>>,
{
    let Some(lhs) = lookup(&c.column) else {
        return false;
    };
    match &c.operand {
        Operand::Set(items) => {
            let hit = items.iter().any(|lit| match lit {
                Literal::Number(v) => compare(CmpOp::Eq, lhs, Value::Num(*v)),
                Literal::Str(s) => compare(CmpOp::Eq, lhs, Value::Str(s)),
            });
            match c.op {
                CmpOp::In | CmpOp::Eq => hit,
                CmpOp::Ne => !hit,
                _ => false,
            }
        }
        Operand::Number(v) => compare(c.op, lhs, Value::Num(*v)),
        Operand::Str(s) => compare(c.op, lhs, Value::Str(s)),
        Operand::Column(other) => match lookup(other) {
            Some(rhs) => compare(c.op, lhs, rhs),
            None => false,
        },
    }
}

fn compare(op: CmpOp, lhs: Value<'_>, rhs: Value<'_>) -> bool {
    match (lhs, rhs) {
        (Value::Num(a), Value::Num(b)) => match op {
            CmpOp::Eq | CmpOp::In => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Gt => a > b,
            CmpOp::Lt => a < b,
            CmpOp::Like | CmpOp::NotLike => false,
        },
        (Value::Str(a), Value::Str(b)) => match op {
            CmpOp::Eq | CmpOp::In => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Gt => a > b,
            CmpOp::Lt => a < b,
            CmpOp::Like => like_match(b, a),
            CmpOp::NotLike => !like_match(b, a),
        },
        _ => false,
    }
}

/// SQL `LIKE` with `%` (any run) and `_` (any one character).
pub fn like_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0usize, 0usize);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '_' || (p[pi] != '%' && p[pi] == t[ti])) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '%' {
        pi += 1;
    }
    pi == p.len()
}

/// One physical operator with its inputs and optional labels.
///
/// `children` holds `None` only in the right slot of a binarized unary
/// operator: the explicit empty child.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub op: Operator,
    pub table: Option<String>,
    pub index: Option<String>,
    pub columns: BTreeSet<String>,
    pub predicate: Option<Predicate>,
    pub children: Vec<Option<PlanNode>>,
    pub true_card: Option<f64>,
    pub true_cost: Option<f64>,
}

impl PlanNode {
    pub fn new(op: Operator) -> Self {
        PlanNode {
            op,
            table: None,
            index: None,
            columns: BTreeSet::new(),
            predicate: None,
            children: Vec::new(),
            true_card: None,
            true_cost: None,
        }
    }

    pub fn scan(op: Operator, table: impl Into<String>) -> Self {
        PlanNode {
            table: Some(table.into()),
            ..PlanNode::new(op)
        }
    }

    pub fn with_predicate(mut self, p: Predicate) -> Self {
        self.predicate = Some(p);
        self
    }

    pub fn with_children(mut self, children: Vec<PlanNode>) -> Self {
        self.children = children.into_iter().map(Some).collect();
        self
    }

    pub fn with_columns<I, S>(mut self, cols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.columns = cols.into_iter().map(Into::into).collect();
        self
    }

    /// Sets labels, clamping to the label floors.
    pub fn set_labels(&mut self, card: f64, cost: f64) {
        self.true_card = Some(card.max(MIN_CARD));
        self.true_cost = Some(cost.max(MIN_COST));
    }

    pub fn left(&self) -> Option<&PlanNode> {
        self.children.first().and_then(Option::as_ref)
    }

    pub fn right(&self) -> Option<&PlanNode> {
        self.children.get(1).and_then(Option::as_ref)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &PlanNode> {
        self.children.iter().filter_map(Option::as_ref)
    }

    pub fn is_leaf(&self) -> bool {
        self.inputs().next().is_none()
    }

    pub fn node_count(&self) -> usize {
        1 + self.inputs().map(PlanNode::node_count).sum::<usize>()
    }

    /// Number of levels; a single node has depth 1.
    pub fn depth(&self) -> usize {
        1 + self.inputs().map(PlanNode::depth).max().unwrap_or(0)
    }

    /// Nodes in pre-order.
    pub fn preorder(&self) -> Vec<&PlanNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            for c in n.children.iter().rev().flatten() {
                stack.push(c);
            }
        }
        out
    }

    /// Tables referenced by this node alone (not its inputs).
    pub fn referenced_tables(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.table.iter().cloned().collect();
        for col in self.referenced_columns() {
            if let Some((t, _)) = col.split_once('.') {
                out.insert(t.to_string());
            }
        }
        out
    }

    /// Key/output columns plus every column its predicate touches.
    pub fn referenced_columns(&self) -> BTreeSet<String> {
        let mut out = self.columns.clone();
        if let Some(p) = &self.predicate {
            out.extend(p.referenced_columns());
        }
        out
    }

    pub fn is_binary(&self) -> bool {
        let shape_ok = match self.children.len() {
            0 => true,
            2 => self.children[0].is_some(),
            _ => false,
        };
        shape_ok
            && self.predicate.as_ref().is_none_or(Predicate::is_binary)
            && self.inputs().all(PlanNode::is_binary)
    }

    fn binarize(self) -> PlanNode {
        let PlanNode {
            op,
            table,
            index,
            columns,
            predicate,
            children,
            true_card,
            true_cost,
        } = self;
        let predicate = predicate.map(Predicate::binarize);
        let mut inputs: Vec<PlanNode> = children.into_iter().flatten().map(PlanNode::binarize).collect();
        let children = match inputs.len() {
            0 => Vec::new(),
            1 => vec![inputs.pop(), None],
            2 => inputs.into_iter().map(Some).collect(),
            _ => {
                // k-ary join: left-deep nesting, the outermost node keeps
                // the predicate and labels.
                let last = inputs.pop().unwrap();
                let mut iter = inputs.into_iter();
                let first = iter.next().unwrap();
                let nested = iter.fold(first, |acc, next| PlanNode {
                    children: vec![Some(acc), Some(next)],
                    ..PlanNode::new(op)
                });
                vec![Some(nested), Some(last)]
            }
        };
        PlanNode {
            op,
            table,
            index,
            columns,
            predicate,
            children,
            true_card,
            true_cost,
        }
    }

    /// Digest of the canonical serialization, labels excluded.
    pub fn canonical_hash(&self) -> PlanDigest {
        let raw = RawNode::from_node(self, false);
        let bytes = serde_json::to_vec(&raw).expect("plan serialization is infallible");
        PlanDigest(Sha256::digest(&bytes).into())
    }

    fn validate(&self) -> Result<(), PlanError> {
        let inputs = self.inputs().count();
        if self.op.is_scan() {
            if self.table.is_none() {
                return Err(PlanError::MissingTable(self.op));
            }
            if !self.children.is_empty() {
                return Err(PlanError::Arity {
                    op: self.op,
                    message: "scan takes no inputs".into(),
                });
            }
        } else if self.op.is_join() {
            if inputs < 2 {
                return Err(PlanError::Arity {
                    op: self.op,
                    message: "join requires two inputs".into(),
                });
            }
        } else if inputs != 1 {
            return Err(PlanError::Arity {
                op: self.op,
                message: "operator takes exactly one input".into(),
            });
        }
        if self.children.len() > 1 && self.children[0].is_none() {
            return Err(PlanError::Arity {
                op: self.op,
                message: "left input may not be empty".into(),
            });
        }
        for c in self.inputs() {
            c.validate()?;
        }
        Ok(())
    }
}

/// A whole plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanTree {
    pub root: PlanNode,
}

impl PlanTree {
    pub fn new(root: PlanNode) -> Result<Self, PlanError> {
        root.validate()?;
        Ok(PlanTree { root })
    }

    /// Parses and validates one plan document.
    pub fn parse(text: &str) -> Result<Self, PlanError> {
        let raw: RawNode = serde_json::from_str(text).map_err(|e| PlanError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        PlanTree::new(raw.into_node()?)
    }

    /// Pretty JSON, labels included.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawNode::from_node(&self.root, true))
            .expect("plan serialization is infallible")
    }

    pub fn binarize(self) -> PlanTree {
        PlanTree {
            root: self.root.binarize(),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.root.is_binary()
    }

    pub fn canonical_hash(&self) -> PlanDigest {
        self.root.canonical_hash()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }
}

/// SHA-256 of a canonical sub-plan serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlanDigest(pub [u8; 32]);

impl fmt::Display for PlanDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

// Wire format.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predicate: Option<RawPredicate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<Option<RawNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    true_card: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    true_cost: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredicate {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    operator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    operand: Option<RawOperand>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<RawPredicate>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawOperand {
    Number(f64),
    Str(String),
    Set(Vec<RawLiteral>),
    Column { column: String },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawLiteral {
    Number(f64),
    Str(String),
}

impl RawNode {
    fn from_node(node: &PlanNode, labels: bool) -> RawNode {
        RawNode {
            op: node.op.name().to_string(),
            table: node.table.clone(),
            index: node.index.clone(),
            columns: node.columns.iter().cloned().collect(),
            predicate: node.predicate.as_ref().map(RawPredicate::from_predicate),
            children: node
                .children
                .iter()
                .map(|c| c.as_ref().map(|n| RawNode::from_node(n, labels)))
                .collect(),
            true_card: node.true_card.filter(|_| labels),
            true_cost: node.true_cost.filter(|_| labels),
        }
    }

    fn into_node(self) -> Result<PlanNode, PlanError> {
        let op = Operator::from_name(&self.op).ok_or(PlanError::UnknownOperator(self.op))?;
        let predicate = self
            .predicate
            .map(|p| p.into_predicate().map(Predicate::expand_in))
            .transpose()?;
        let children = self
            .children
            .into_iter()
            .map(|c| c.map(RawNode::into_node).transpose())
            .collect::<Result<Vec<_>, _>>()?;
        let mut node = PlanNode {
            op,
            table: self.table,
            index: self.index,
            columns: self.columns.into_iter().collect(),
            predicate,
            children,
            true_card: None,
            true_cost: None,
        };
        node.true_card = self.true_card.map(|c| c.max(MIN_CARD));
        node.true_cost = self.true_cost.map(|c| c.max(MIN_COST));
        Ok(node)
    }
}

impl RawPredicate {
    fn from_predicate(p: &Predicate) -> RawPredicate {
        match p {
            Predicate::And(cs) | Predicate::Or(cs) => RawPredicate {
                kind: if matches!(p, Predicate::And(_)) { "and" } else { "or" }.to_string(),
                column: None,
                operator: None,
                operand: None,
                children: cs.iter().map(RawPredicate::from_predicate).collect(),
            },
            Predicate::Expr(c) => RawPredicate {
                kind: "expr".to_string(),
                column: Some(c.column.clone()),
                operator: Some(c.op.symbol().to_string()),
                operand: Some(match &c.operand {
                    Operand::Number(v) => RawOperand::Number(*v),
                    Operand::Str(s) => RawOperand::Str(s.clone()),
                    Operand::Column(col) => RawOperand::Column { column: col.clone() },
                    Operand::Set(items) => RawOperand::Set(
                        items
                            .iter()
                            .map(|l| match l {
                                Literal::Number(v) => RawLiteral::Number(*v),
                                Literal::Str(s) => RawLiteral::Str(s.clone()),
                            })
                            .collect(),
                    ),
                }),
                children: Vec::new(),
            },
        }
    }

    fn into_predicate(mut self) -> Result<Predicate, PlanError> {
        let kind = self.kind.to_ascii_lowercase();
        let mut children = || -> Result<Vec<Predicate>, PlanError> {
            std::mem::take(&mut self.children)
                .into_iter()
                .map(RawPredicate::into_predicate)
                .collect()
        };
        match kind.as_str() {
            "and" | "or" => {
                let mut cs = children()?;
                match cs.len() {
                    0 => Err(PlanError::InvalidPredicate(format!("`{kind}` without children"))),
                    1 => Ok(cs.pop().unwrap()),
                    _ if kind == "and" => Ok(Predicate::And(cs)),
                    _ => Ok(Predicate::Or(cs)),
                }
            }
            "not" => {
                let mut cs = children()?;
                if cs.len() != 1 {
                    return Err(PlanError::InvalidPredicate("`not` takes exactly one child".into()));
                }
                Ok(cs.pop().unwrap().expand_in().negate())
            }
            "expr" => {
                let column = self.column.ok_or(PlanError::MissingColumn)?;
                let sym = self
                    .operator
                    .ok_or_else(|| PlanError::InvalidPredicate("expression without operator".into()))?;
                let operand = match self.operand {
                    Some(RawOperand::Number(v)) => Operand::Number(v),
                    Some(RawOperand::Str(s)) => Operand::Str(s),
                    Some(RawOperand::Column { column }) => Operand::Column(column),
                    Some(RawOperand::Set(items)) => {
                        if items.is_empty() {
                            return Err(PlanError::InvalidPredicate("empty IN list".into()));
                        }
                        Operand::Set(
                            items
                                .into_iter()
                                .map(|l| match l {
                                    RawLiteral::Number(v) => Literal::Number(v),
                                    RawLiteral::Str(s) => Literal::Str(s),
                                })
                                .collect(),
                        )
                    }
                    None => return Err(PlanError::InvalidPredicate("expression without operand".into())),
                };
                // >= and <= are accepted as shorthands.
                let leaf = match sym.trim() {
                    ">=" => Predicate::Or(vec![
                        Predicate::expr(column.clone(), CmpOp::Gt, operand.clone()),
                        Predicate::expr(column, CmpOp::Eq, operand),
                    ]),
                    "<=" => Predicate::Or(vec![
                        Predicate::expr(column.clone(), CmpOp::Lt, operand.clone()),
                        Predicate::expr(column, CmpOp::Eq, operand),
                    ]),
                    s => {
                        let op = CmpOp::from_symbol(s).ok_or_else(|| PlanError::UnknownComparison(s.to_string()))?;
                        if matches!(operand, Operand::Set(_)) && !matches!(op, CmpOp::In) {
                            return Err(PlanError::InvalidPredicate(format!("list operand with `{op}`")));
                        }
                        Predicate::expr(column, op, operand)
                    }
                };
                Ok(leaf)
            }
            other => Err(PlanError::InvalidPredicate(format!("unknown predicate kind `{other}`"))),
        }
    }
}
