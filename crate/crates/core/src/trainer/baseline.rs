//! Histogram baseline under attribute independence.
//!
//! Numeric columns keep an equi-width histogram with per-bucket row and
//! distinct counts; range selectivities interpolate linearly inside a
//! bucket and equality takes the bucket's share divided by its distinct
//! count. String columns keep their most common values; a condition's
//! selectivity is the matching MCV mass plus the remaining mass scaled by
//! the fraction of MCVs that match. Conjunctions multiply, disjunctions
//! use `a + b - ab`, and an equi-join of `A` and `B` yields
//! `|A| |B| / max(dv(a), dv(b))`. Costs apply the oracle's unit-cost table
//! to the estimated cardinalities.

use std::collections::{HashMap, HashSet};

use crate::data::{ColumnData, Dataset};
use crate::plan::{like_match, CmpOp, Condition, Literal, Operand, PlanNode, PlanTree, Predicate};

use super::executor::CostTable;

pub const DEFAULT_BUCKETS: usize = 32;
pub const DEFAULT_MCVS: usize = 100;

#[derive(Debug, Clone)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<f64>,
    pub distinct: Vec<f64>,
    pub rows: f64,
}

impl Histogram {
    pub fn build(values: &[f64], buckets: usize) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0.0; buckets];
        let mut sets: Vec<HashSet<u64>> = vec![HashSet::new(); buckets];
        let mut h = Histogram {
            min,
            max,
            counts: Vec::new(),
            distinct: Vec::new(),
            rows: values.len() as f64,
        };
        for &v in values {
            let b = h.bucket(v, buckets);
            counts[b] += 1.0;
            sets[b].insert(v.to_bits());
        }
        h.counts = counts;
        h.distinct = sets.iter().map(|s| s.len() as f64).collect();
        h
    }

    fn width(&self) -> f64 {
        (self.max - self.min) / self.counts.len().max(1) as f64
    }

    fn bucket(&self, v: f64, buckets: usize) -> usize {
        if self.max <= self.min {
            return 0;
        }
        let b = ((v - self.min) / (self.max - self.min) * buckets as f64).floor();
        (b.max(0.0) as usize).min(buckets - 1)
    }

    /// Fraction of rows with value `< v`.
    pub fn less_than(&self, v: f64) -> f64 {
        if self.rows == 0.0 || v <= self.min {
            return 0.0;
        }
        if v > self.max {
            return 1.0;
        }
        if self.max <= self.min {
            return 0.0;
        }
        let b = self.bucket(v, self.counts.len());
        let lo = self.min + b as f64 * self.width();
        let below: f64 = self.counts[..b].iter().sum();
        let frac = ((v - lo) / self.width()).clamp(0.0, 1.0);
        (below + frac * self.counts[b]) / self.rows
    }

    pub fn equal(&self, v: f64) -> f64 {
        if self.rows == 0.0 || v < self.min || v > self.max {
            return 0.0;
        }
        let b = self.bucket(v, self.counts.len());
        if self.distinct[b] == 0.0 {
            return 0.0;
        }
        self.counts[b] / self.distinct[b] / self.rows
    }
}

#[derive(Debug, Clone)]
pub struct Mcv {
    pub values: Vec<(String, f64)>,
    /// Frequency not covered by `values`.
    pub rest: f64,
    pub ndv: f64,
}

impl Mcv {
    pub fn build(values: &[String], k: usize) -> Self {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for v in values {
            *freq.entry(v).or_default() += 1;
        }
        let ndv = freq.len() as f64;
        let mut all: Vec<(&str, usize)> = freq.into_iter().collect();
        all.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let n = values.len().max(1) as f64;
        let values: Vec<(String, f64)> = all.iter().take(k).map(|(s, c)| (s.to_string(), *c as f64 / n)).collect();
        let rest = (1.0 - values.iter().map(|v| v.1).sum::<f64>()).max(0.0);
        Mcv { values, rest, ndv }
    }

    fn selectivity(&self, matches: impl Fn(&str) -> bool) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let mut hit = 0.0;
        let mut count = 0usize;
        for (v, f) in &self.values {
            if matches(v) {
                hit += f;
                count += 1;
            }
        }
        hit + self.rest * count as f64 / self.values.len() as f64
    }
}

#[derive(Debug, Clone)]
enum ColumnStats {
    Numeric(Histogram),
    Text(Mcv),
}

#[derive(Debug, Clone)]
pub struct IndependenceBaseline {
    columns: HashMap<String, ColumnStats>,
    rows: HashMap<String, f64>,
    ndv: HashMap<String, f64>,
    costs: CostTable,
}

impl IndependenceBaseline {
    pub fn build(ds: &Dataset, buckets: usize, mcvs: usize, costs: CostTable) -> Self {
        let mut columns = HashMap::new();
        let mut rows = HashMap::new();
        for t in &ds.tables {
            rows.insert(t.name.clone(), t.rows() as f64);
            for c in &t.columns {
                let stats = match &c.data {
                    ColumnData::Str(v) => ColumnStats::Text(Mcv::build(v, mcvs)),
                    other => {
                        let v: Vec<f64> = (0..other.len()).filter_map(|r| other.as_f64(r)).collect();
                        ColumnStats::Numeric(Histogram::build(&v, buckets))
                    }
                };
                columns.insert(c.name.clone(), stats);
            }
        }
        let ndv = ds.catalog.columns.iter().map(|c| (c.name.clone(), c.ndv as f64)).collect();
        IndependenceBaseline {
            columns,
            rows,
            ndv,
            costs,
        }
    }

    pub fn new(ds: &Dataset) -> Self {
        Self::build(ds, DEFAULT_BUCKETS, DEFAULT_MCVS, CostTable::default())
    }

    pub fn condition_selectivity(&self, c: &Condition) -> f64 {
        let Some(stats) = self.columns.get(&c.column) else {
            return 1.0;
        };
        let s = match (stats, &c.operand) {
            (ColumnStats::Numeric(h), Operand::Number(v)) => match c.op {
                CmpOp::Lt => h.less_than(*v),
                CmpOp::Gt => 1.0 - h.less_than(*v) - h.equal(*v),
                CmpOp::Eq | CmpOp::In => h.equal(*v),
                CmpOp::Ne => 1.0 - h.equal(*v),
                CmpOp::Like | CmpOp::NotLike => 0.0,
            },
            (ColumnStats::Numeric(h), Operand::Set(items)) => {
                let hit: f64 = items
                    .iter()
                    .map(|l| match l {
                        Literal::Number(v) => h.equal(*v),
                        Literal::Str(_) => 0.0,
                    })
                    .sum();
                if c.op == CmpOp::Ne {
                    1.0 - hit
                } else {
                    hit
                }
            }
            (ColumnStats::Text(m), Operand::Str(s)) => match c.op {
                CmpOp::Eq | CmpOp::In => m.selectivity(|v| v == s),
                CmpOp::Ne => 1.0 - m.selectivity(|v| v == s),
                CmpOp::Like => m.selectivity(|v| like_match(s, v)),
                CmpOp::NotLike => 1.0 - m.selectivity(|v| like_match(s, v)),
                CmpOp::Gt => m.selectivity(|v| v > s.as_str()),
                CmpOp::Lt => m.selectivity(|v| v < s.as_str()),
            },
            (ColumnStats::Text(m), Operand::Set(items)) => {
                let hit = m.selectivity(|v| items.iter().any(|l| matches!(l, Literal::Str(s) if s == v)));
                if c.op == CmpOp::Ne {
                    1.0 - hit
                } else {
                    hit
                }
            }
            // Column comparisons are handled by the join rule.
            _ => 1.0,
        };
        s.clamp(0.0, 1.0)
    }

    pub fn selectivity(&self, p: &Predicate) -> f64 {
        match p {
            Predicate::Expr(c) => self.condition_selectivity(c),
            Predicate::And(cs) => cs.iter().map(|q| self.selectivity(q)).product(),
            Predicate::Or(cs) => cs.iter().fold(0.0, |acc, q| {
                let s = self.selectivity(q);
                acc + s - acc * s
            }),
        }
    }

    fn join_ndv(&self, p: Option<&Predicate>) -> f64 {
        let Some(p) = p else { return 1.0 };
        p.leaves()
            .iter()
            .filter_map(|c| match &c.operand {
                Operand::Column(other) if c.op == CmpOp::Eq => Some(
                    self.ndv.get(&c.column).copied().unwrap_or(1.0).max(self.ndv.get(other).copied().unwrap_or(1.0)),
                ),
                _ => None,
            })
            .fold(1.0, f64::max)
    }

    /// Estimated `(card, cost)` for every node in pre-order.
    pub fn estimate_nodes(&self, node: &PlanNode) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        self.walk(node, &mut out);
        out
    }

    pub fn estimate(&self, plan: &PlanTree) -> (f64, f64) {
        self.estimate_nodes(&plan.root)[0]
    }

    fn walk(&self, node: &PlanNode, out: &mut Vec<(f64, f64)>) -> (f64, f64) {
        let slot = out.len();
        out.push((0.0, 0.0));
        let (card, cost) = if node.op.is_scan() {
            let rows = node
                .table
                .as_ref()
                .and_then(|t| self.rows.get(t))
                .copied()
                .unwrap_or(1.0);
            let sel = node.predicate.as_ref().map_or(1.0, |p| self.selectivity(p));
            let card = rows * sel;
            let leaves = node.predicate.as_ref().map_or(0, |p| p.leaves().len());
            (card, self.costs.scan(node.op, rows, card, leaves))
        } else if node.op.is_join() {
            let (l, lc) = node.left().map_or((1.0, 0.0), |c| self.walk(c, out));
            let (r, rc) = node.right().map_or((1.0, 0.0), |c| self.walk(c, out));
            let card = l * r / self.join_ndv(node.predicate.as_ref());
            (card, self.costs.join(node.op, l, r, card) + lc + rc)
        } else {
            let (n, ic) = node.left().map_or((1.0, 0.0), |c| self.walk(c, out));
            let card = if !node.op.is_aggregate() {
                n
            } else if node.columns.is_empty() {
                1.0
            } else {
                node.columns
                    .iter()
                    .map(|c| self.ndv.get(c).copied().unwrap_or(1.0))
                    .product::<f64>()
                    .min(n)
            };
            (card, self.costs.unary(node.op, n) + ic)
        };
        // Estimates share the label floors.
        let est = (card.max(crate::plan::MIN_CARD), cost.max(crate::plan::MIN_COST));
        out[slot] = est;
        est
    }
}
