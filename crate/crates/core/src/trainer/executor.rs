//! Exact reference executor and the deterministic cost oracle.
//!
//! Every node is evaluated on the full data. A node's cost is its own
//! unit cost plus the cost of its inputs:
//!
//! | operator | own cost |
//! |---|---|
//! | sequential scans | `seq_row * n + seq_leaf * leaves * n` |
//! | index scans | `index_probe * log2(n + 1) + index_row * out` |
//! | hash join | `hash_build * right + hash_probe * left + join_out * out` |
//! | merge join | `sort * (l log2(l + 2) + r log2(r + 2)) + merge_row * (l + r) + join_out * out` |
//! | nested loop | `nlj_pair * l * r + join_out * out` |
//! | sorts | `sort * n * log2(n + 2)` |
//! | aggregates | `aggregate_row * n` |

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Table};
use crate::plan::{CmpOp, Operand, Operator, PlanNode, PlanTree, Predicate, Value};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub seq_row: f64,
    pub seq_leaf: f64,
    pub index_probe: f64,
    pub index_row: f64,
    pub hash_build: f64,
    pub hash_probe: f64,
    pub join_out: f64,
    pub merge_row: f64,
    pub nlj_pair: f64,
    pub sort: f64,
    pub aggregate_row: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            seq_row: 1.0,
            seq_leaf: 0.1,
            index_probe: 4.0,
            index_row: 2.0,
            hash_build: 1.5,
            hash_probe: 1.0,
            join_out: 0.1,
            merge_row: 1.0,
            nlj_pair: 0.01,
            sort: 0.05,
            aggregate_row: 1.0,
        }
    }
}

impl CostTable {
    pub fn scan(&self, op: Operator, rows: f64, out: f64, leaves: usize) -> f64 {
        match op {
            Operator::IndexScan | Operator::IndexOnlyScan | Operator::BitmapIndexScan => {
                self.index_probe * (rows + 1.0).log2() + self.index_row * out
            }
            _ => self.seq_row * rows + self.seq_leaf * leaves as f64 * rows,
        }
    }

    pub fn join(&self, op: Operator, left: f64, right: f64, out: f64) -> f64 {
        match op {
            Operator::NestedLoopJoin => self.nlj_pair * left * right + self.join_out * out,
            Operator::MergeJoin => {
                self.sort * (left * (left + 2.0).log2() + right * (right + 2.0).log2())
                    + self.merge_row * (left + right)
                    + self.join_out * out
            }
            _ => self.hash_build * right + self.hash_probe * left + self.join_out * out,
        }
    }

    /// Own cost of a unary operator over `input` rows.
    pub fn unary(&self, op: Operator, input: f64) -> f64 {
        if op.is_sort() {
            self.sort * input * (input + 2.0).log2()
        } else {
            self.aggregate_row * input
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecConfig {
    pub costs: CostTable,
    /// Largest intermediate result allowed.
    pub row_limit: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            costs: CostTable::default(),
            row_limit: 5_000_000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("intermediate result exceeds the row limit {limit}")]
    RowLimit { limit: usize },
    #[error("table `{0}` is not in the dataset")]
    MissingTable(String),
    #[error("operator {0} has no input")]
    MissingInput(Operator),
}

/// Tuples of row ids, one id per participating table.
#[derive(Debug, Clone)]
struct Relation {
    tables: Vec<usize>,
    rows: Vec<u32>,
}

impl Relation {
    fn width(&self) -> usize {
        self.tables.len()
    }

    fn len(&self) -> usize {
        if self.tables.is_empty() {
            0
        } else {
            self.rows.len() / self.width()
        }
    }

    fn tuple(&self, i: usize) -> &[u32] {
        let w = self.width();
        &self.rows[i * w..(i + 1) * w]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Key<'a> {
    Num(u64),
    Str(&'a str),
}

fn key(v: Value<'_>) -> Key<'_> {
    match v {
        // Normalize -0.0 so equal numbers hash alike.
        Value::Num(x) => Key::Num((x + 0.0).to_bits()),
        Value::Str(s) => Key::Str(s),
    }
}

struct Executor<'a> {
    ds: &'a Dataset,
    cfg: &'a ExecConfig,
    /// `(card, cost)` per node in pre-order.
    labels: Vec<(f64, f64)>,
}

/// Cardinality and cumulative cost of every node, in pre-order. The raw
/// values are returned; the label floors apply when they are stored.
pub fn execute_reference(plan: &PlanTree, ds: &Dataset, cfg: &ExecConfig) -> Result<Vec<(f64, f64)>, ExecError> {
    let mut ex = Executor {
        ds,
        cfg,
        labels: Vec::new(),
    };
    ex.run(&plan.root)?;
    Ok(ex.labels)
}

/// Executes `plan` and stores clamped labels on every node.
pub fn label_plan(plan: &mut PlanTree, ds: &Dataset, cfg: &ExecConfig) -> Result<(), ExecError> {
    let labels = execute_reference(plan, ds, cfg)?;
    fn assign(node: &mut PlanNode, labels: &mut std::slice::Iter<'_, (f64, f64)>) {
        let &(card, cost) = labels.next().expect("one label per node");
        node.set_labels(card, cost);
        for c in node.children.iter_mut().flatten() {
            assign(c, labels);
        }
    }
    assign(&mut plan.root, &mut labels.iter());
    Ok(())
}

impl<'a> Executor<'a> {
    fn table(&self, name: &str) -> Result<(usize, &'a Table), ExecError> {
        self.ds
            .tables
            .iter()
            .enumerate()
            .find(|(_, t)| t.name == name)
            .ok_or_else(|| ExecError::MissingTable(name.to_string()))
    }

    fn check(&self, n: usize) -> Result<(), ExecError> {
        if n > self.cfg.row_limit {
            Err(ExecError::RowLimit {
                limit: self.cfg.row_limit,
            })
        } else {
            Ok(())
        }
    }

    /// Column value of tuple `t` in `rel`.
    fn lookup(&self, rel: &Relation, t: &[u32], column: &str) -> Option<Value<'a>> {
        let table = column.split('.').next()?;
        rel.tables.iter().zip(t).find_map(|(&ti, &row)| {
            let tbl = &self.ds.tables[ti];
            if tbl.name != table {
                return None;
            }
            tbl.column(column).map(|c| c.data.value(row as usize))
        })
    }

    fn run(&mut self, node: &PlanNode) -> Result<(Relation, f64), ExecError> {
        let slot = self.labels.len();
        self.labels.push((0.0, 0.0));
        let c = &self.cfg.costs;
        let (rel, cost) = if node.op.is_scan() {
            let name = node.table.as_deref().ok_or(ExecError::MissingInput(node.op))?;
            let (ti, table) = self.table(name)?;
            let rows = table.filter(node.predicate.as_ref());
            let leaves = node.predicate.as_ref().map_or(0, |p| p.leaves().len());
            let cost = c.scan(node.op, table.rows() as f64, rows.len() as f64, leaves);
            let rel = Relation {
                tables: vec![ti],
                rows: rows.into_iter().map(|r| r as u32).collect(),
            };
            (rel, cost)
        } else if node.op.is_join() {
            let left = node.left().ok_or(ExecError::MissingInput(node.op))?;
            let right = node.right().ok_or(ExecError::MissingInput(node.op))?;
            let (l, lc) = self.run(left)?;
            let (r, rc) = self.run(right)?;
            let out = self.join(&l, &r, node.predicate.as_ref())?;
            let own = c.join(node.op, l.len() as f64, r.len() as f64, out.len() as f64);
            (out, own + lc + rc)
        } else {
            let input = node.left().ok_or(ExecError::MissingInput(node.op))?;
            let (rel, ic) = self.run(input)?;
            let own = c.unary(node.op, rel.len() as f64);
            let out = if node.op.is_aggregate() {
                self.aggregate(&rel, node)
            } else {
                rel
            };
            (out, own + ic)
        };
        self.labels[slot] = (rel.len() as f64, cost);
        Ok((rel, cost))
    }

    fn aggregate(&self, rel: &Relation, node: &PlanNode) -> Relation {
        let mut rows = Vec::new();
        if node.columns.is_empty() {
            // One output row; keep a representative tuple when there is one.
            rows.extend_from_slice(if rel.len() > 0 { rel.tuple(0) } else { &[] });
            if rows.is_empty() {
                rows = vec![0; rel.width()];
            }
        } else {
            let mut seen = HashSet::new();
            for i in 0..rel.len() {
                let t = rel.tuple(i);
                let k: Vec<Option<Key<'_>>> =
                    node.columns.iter().map(|col| self.lookup(rel, t, col).map(key)).collect();
                if seen.insert(k) {
                    rows.extend_from_slice(t);
                }
            }
        }
        Relation {
            tables: rel.tables.clone(),
            rows,
        }
    }

    /// Equi-join on the top-level `col = col` leaves of the predicate, then
    /// filters on the whole predicate. Without equality pairs it is a
    /// filtered cross product; without a predicate, the schema's foreign
    /// key between the inputs is used.
    fn join(&self, l: &Relation, r: &Relation, pred: Option<&Predicate>) -> Result<Relation, ExecError> {
        let implicit;
        let pred = match pred {
            Some(p) => Some(p),
            None => {
                implicit = self.implicit_join(l, r);
                implicit.as_ref()
            }
        };
        let pairs: Vec<(String, String)> = pred.map_or_else(Vec::new, |p| self.equi_pairs(p, l, r));
        let tables: Vec<usize> = l.tables.iter().chain(&r.tables).copied().collect();
        let mut out = Relation { tables, rows: Vec::new() };
        let emit = |lt: &[u32], rt: &[u32], out: &mut Relation| -> Result<(), ExecError> {
            let before = out.rows.len();
            out.rows.extend_from_slice(lt);
            out.rows.extend_from_slice(rt);
            if let Some(p) = pred {
                let t = &out.rows[before..];
                let ok = p.eval(&|col: &str| self.lookup(out, t, col));
                if !ok {
                    out.rows.truncate(before);
                    return Ok(());
                }
            }
            self.check(out.len())
        };
        if pairs.is_empty() {
            for i in 0..l.len() {
                for j in 0..r.len() {
                    emit(l.tuple(i), r.tuple(j), &mut out)?;
                }
            }
            return Ok(out);
        }
        let mut build: HashMap<Vec<Key<'a>>, Vec<usize>> = HashMap::new();
        'rows: for j in 0..r.len() {
            let t = r.tuple(j);
            let mut k = Vec::with_capacity(pairs.len());
            for (_, rc) in &pairs {
                match self.lookup(r, t, rc) {
                    Some(v) => k.push(key(v)),
                    None => continue 'rows,
                }
            }
            build.entry(k).or_default().push(j);
        }
        'probe: for i in 0..l.len() {
            let t = l.tuple(i);
            let mut k = Vec::with_capacity(pairs.len());
            for (lc, _) in &pairs {
                match self.lookup(l, t, lc) {
                    Some(v) => k.push(key(v)),
                    None => continue 'probe,
                }
            }
            if let Some(js) = build.get(&k) {
                for &j in js {
                    emit(t, r.tuple(j), &mut out)?;
                }
            }
        }
        Ok(out)
    }

    fn owns(&self, rel: &Relation, column: &str) -> bool {
        let table = column.split('.').next().unwrap_or("");
        rel.tables.iter().any(|&t| self.ds.tables[t].name == table)
    }

    /// `(left column, right column)` for each top-level equality between
    /// the two inputs.
    fn equi_pairs(&self, p: &Predicate, l: &Relation, r: &Relation) -> Vec<(String, String)> {
        let conj: Vec<&Predicate> = match p {
            Predicate::And(cs) => {
                let mut flat = Vec::new();
                let mut stack: Vec<&Predicate> = cs.iter().rev().collect();
                while let Some(q) = stack.pop() {
                    match q {
                        Predicate::And(inner) => stack.extend(inner.iter().rev()),
                        other => flat.push(other),
                    }
                }
                flat
            }
            other => vec![other],
        };
        conj.into_iter()
            .filter_map(|q| match q {
                Predicate::Expr(c) if c.op == CmpOp::Eq => match &c.operand {
                    Operand::Column(other) => {
                        if self.owns(l, &c.column) && self.owns(r, other) {
                            Some((c.column.clone(), other.clone()))
                        } else if self.owns(r, &c.column) && self.owns(l, other) {
                            Some((other.clone(), c.column.clone()))
                        } else {
                            None
                        }
                    }
                    _ => None,
                },
                _ => None,
            })
            .collect()
    }

    fn implicit_join(&self, l: &Relation, r: &Relation) -> Option<Predicate> {
        for &a in &l.tables {
            for &b in &r.tables {
                let (ta, tb) = (&self.ds.tables[a].name, &self.ds.tables[b].name);
                if let Some((ka, kb)) = self.ds.catalog.join_keys(ta, tb) {
                    return Some(Predicate::expr(ka, CmpOp::Eq, Operand::Column(kb.to_string())));
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::datagen::{generate_dataset, DatasetConfig};

    fn ds() -> Dataset {
        generate_dataset(&DatasetConfig {
            title_rows: 200,
            info_rows: 300,
            cast_rows: 0,
            seed: 3,
        })
    }

    fn join_plan(pred_title: Option<Predicate>) -> PlanTree {
        let mut scan = PlanNode::scan(Operator::SeqScan, "title");
        scan.predicate = pred_title;
        let join = PlanNode::new(Operator::HashJoin)
            .with_predicate(Predicate::expr(
                "title.id",
                CmpOp::Eq,
                Operand::Column("movie_info.movie_id".into()),
            ))
            .with_children(vec![scan, PlanNode::scan(Operator::SeqScan, "movie_info")]);
        PlanTree::new(join).unwrap()
    }

    #[test]
    fn tautology_scan_returns_all_rows() {
        let ds = ds();
        let p = PlanTree::new(PlanNode::scan(Operator::SeqScan, "title").with_predicate(Predicate::expr(
            "title.production_year",
            CmpOp::Gt,
            Operand::Number(0.0),
        )))
        .unwrap();
        let labels = execute_reference(&p, &ds, &ExecConfig::default()).unwrap();
        assert_eq!(labels[0], (200.0, 200.0 * 1.0 + 0.1 * 200.0));
    }

    #[test]
    fn pk_fk_join_counts_every_child_row() {
        let ds = ds();
        let labels = execute_reference(&join_plan(None), &ds, &ExecConfig::default()).unwrap();
        assert_eq!(labels[0].0, 300.0);
        assert_eq!(labels[1].0, 200.0);
        assert_eq!(labels[2].0, 300.0);
        let own = 1.5 * 300.0 + 1.0 * 200.0 + 0.1 * 300.0;
        assert!((labels[0].1 - (own + 200.0 + 300.0)).abs() < 1e-9);
    }

    #[test]
    fn empty_join_is_floored_when_stored() {
        let ds = ds();
        let mut p = join_plan(Some(Predicate::expr("title.id", CmpOp::Lt, Operand::Number(-1.0))));
        let raw = execute_reference(&p, &ds, &ExecConfig::default()).unwrap();
        assert_eq!(raw[0].0, 0.0);
        label_plan(&mut p, &ds, &ExecConfig::default()).unwrap();
        assert_eq!(p.root.true_card, Some(1.0));
    }

    #[test]
    fn group_by_counts_distinct_keys() {
        let ds = ds();
        let agg = PlanNode::new(Operator::HashAggregate)
            .with_columns(["title.kind_id"])
            .with_children(vec![PlanNode::scan(Operator::SeqScan, "title")]);
        let labels = execute_reference(&PlanTree::new(agg).unwrap(), &ds, &ExecConfig::default()).unwrap();
        let kinds = ds.catalog.column("title.kind_id").unwrap().ndv;
        assert_eq!(labels[0].0, kinds as f64);
        let plain = PlanNode::new(Operator::Aggregate).with_children(vec![PlanNode::scan(Operator::SeqScan, "title")]);
        let labels = execute_reference(&PlanTree::new(plain).unwrap(), &ds, &ExecConfig::default()).unwrap();
        assert_eq!(labels[0], (1.0, 200.0 + 200.0));
    }

    #[test]
    fn row_limit_aborts() {
        let ds = ds();
        let cfg = ExecConfig {
            row_limit: 100,
            ..ExecConfig::default()
        };
        assert!(matches!(
            execute_reference(&join_plan(None), &ds, &cfg),
            Err(ExecError::RowLimit { .. })
        ));
    }
}
