//! Random workloads over a dataset's join graph.
//!
//! A query picks a connected set of tables, draws numeric and string
//! leaves over their non-key columns, and combines each table's leaves
//! into a random AND/OR tree. Plans are built by a fixed heuristic: an
//! index scan when a top-level equality hits an indexed column, otherwise
//! a sequential scan; left-deep joins in join-graph order, nested loops
//! over an index-scanned inner and hash joins otherwise; an optional sort
//! or grouped aggregate on top.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{ColumnData, Dataset};
use crate::plan::{CmpOp, Literal, Operand, Operator, PlanNode, PlanTree, Predicate};

use super::executor::{label_plan, ExecConfig, ExecError};

pub const NUMERIC_OPS: [CmpOp; 4] = [CmpOp::Gt, CmpOp::Lt, CmpOp::Eq, CmpOp::Ne];
pub const STRING_OPS: [CmpOp; 5] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Like, CmpOp::NotLike, CmpOp::In];

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub queries: usize,
    /// Inclusive range of joined tables.
    pub tables: (usize, usize),
    /// Inclusive range of numeric leaves per query.
    pub numeric_predicates: (usize, usize),
    /// Inclusive range of string leaves per query.
    pub string_predicates: (usize, usize),
    /// Weights over [`NUMERIC_OPS`].
    pub numeric_ops: [f64; 4],
    /// Weights over [`STRING_OPS`].
    pub string_ops: [f64; 5],
    /// Chance that two leaf groups are combined with OR instead of AND.
    pub or_probability: f64,
    pub sort_probability: f64,
    pub aggregate_probability: f64,
    /// Leaf cap per table after `IN` expansion.
    pub max_leaves: usize,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            queries: 1000,
            tables: (1, 2),
            numeric_predicates: (1, 3),
            string_predicates: (0, 1),
            numeric_ops: [1.0, 1.0, 1.0, 1.0],
            string_ops: [1.0, 1.0, 1.0, 1.0, 1.0],
            or_probability: 0.25,
            sort_probability: 0.1,
            aggregate_probability: 0.1,
            max_leaves: 8,
            seed: 7,
        }
    }
}

/// Columns eligible for filters: everything except keys.
fn filter_columns(ds: &Dataset, table: &str, numeric: bool) -> Vec<String> {
    let keys: BTreeSet<&str> = ds
        .catalog
        .foreign_keys
        .iter()
        .flat_map(|fk| [fk.from.as_str(), fk.to.as_str()])
        .collect();
    ds.catalog
        .columns_of(table)
        .filter(|c| c.ty.is_numeric() == numeric && !keys.contains(c.name.as_str()) && !c.name.ends_with(".id"))
        .map(|c| c.name.clone())
        .collect()
}

fn pick_weighted<T: Copy>(rng: &mut ChaCha8Rng, items: &[T], weights: &[f64]) -> T {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (item, w) in items.iter().zip(weights) {
        if x < *w {
            return *item;
        }
        x -= w;
    }
    *items.last().expect("nonempty choice")
}

/// A connected set of tables, in the order they join.
fn pick_tables(rng: &mut ChaCha8Rng, ds: &Dataset, n: usize) -> Vec<String> {
    let names: Vec<&str> = ds.catalog.tables.iter().map(|t| t.name.as_str()).collect();
    let mut chosen = vec![names.choose(rng).expect("dataset has tables").to_string()];
    while chosen.len() < n {
        let frontier: Vec<&str> = names
            .iter()
            .copied()
            .filter(|t| !chosen.iter().any(|c| c == t))
            .filter(|t| chosen.iter().any(|c| ds.catalog.join_keys(c, t).is_some()))
            .collect();
        match frontier.choose(rng) {
            Some(t) => chosen.push(t.to_string()),
            None => break,
        }
    }
    chosen
}

fn random_row_value(rng: &mut ChaCha8Rng, ds: &Dataset, column: &str) -> Option<Literal> {
    let t = ds.table(column.split('.').next()?).ok()?;
    if t.rows() == 0 {
        return None;
    }
    let row = rng.random_range(0..t.rows());
    Some(match &t.column(column)?.data {
        ColumnData::Str(v) => Literal::Str(v[row].clone()),
        other => Literal::Number(other.as_f64(row)?),
    })
}

fn like_pattern(rng: &mut ChaCha8Rng, value: &str) -> String {
    let chars: Vec<char> = value.chars().collect();
    let n = chars.len();
    if n == 0 {
        return "%".into();
    }
    let k = rng.random_range(1..=n.div_ceil(2).max(1));
    match rng.random_range(0..3) {
        0 => format!("{}%", chars[..k].iter().collect::<String>()),
        1 => format!("%{}", chars[n - k..].iter().collect::<String>()),
        _ => {
            let start = rng.random_range(0..=n - k);
            format!("%{}%", chars[start..start + k].iter().collect::<String>())
        }
    }
}

fn leaf(rng: &mut ChaCha8Rng, ds: &Dataset, cfg: &WorkloadConfig, column: &str, numeric: bool) -> Option<Predicate> {
    if numeric {
        let op = pick_weighted(rng, &NUMERIC_OPS, &cfg.numeric_ops);
        let Literal::Number(v) = random_row_value(rng, ds, column)? else {
            return None;
        };
        return Some(Predicate::expr(column, op, Operand::Number(v)));
    }
    let op = pick_weighted(rng, &STRING_OPS, &cfg.string_ops);
    let Literal::Str(v) = random_row_value(rng, ds, column)? else {
        return None;
    };
    Some(match op {
        CmpOp::Like | CmpOp::NotLike => Predicate::expr(column, op, Operand::Str(like_pattern(rng, &v))),
        CmpOp::In => {
            let mut set = BTreeSet::from([v]);
            for _ in 0..rng.random_range(1..=2) {
                if let Some(Literal::Str(s)) = random_row_value(rng, ds, column) {
                    set.insert(s);
                }
            }
            Predicate::expr(column, op, Operand::Set(set.into_iter().map(Literal::Str).collect()))
        }
        _ => Predicate::expr(column, op, Operand::Str(v)),
    })
}

fn expanded_leaves(p: &Predicate) -> usize {
    p.leaves()
        .iter()
        .map(|c| match &c.operand {
            Operand::Set(items) => items.len(),
            _ => 1,
        })
        .sum()
}

/// Random binary AND/OR tree over `leaves`, in their given order.
fn combine(rng: &mut ChaCha8Rng, mut leaves: Vec<Predicate>, or_p: f64) -> Predicate {
    if leaves.len() == 1 {
        return leaves.pop().unwrap();
    }
    let split = rng.random_range(1..leaves.len());
    let right = leaves.split_off(split);
    let a = combine(rng, leaves, or_p);
    let b = combine(rng, right, or_p);
    if rng.random_bool(or_p) {
        Predicate::Or(vec![a, b])
    } else {
        Predicate::And(vec![a, b])
    }
}

fn top_level_conjuncts(p: &Predicate) -> Vec<&Predicate> {
    match p {
        Predicate::And(cs) => cs.iter().flat_map(top_level_conjuncts).collect(),
        other => vec![other],
    }
}

fn scan_for(ds: &Dataset, table: &str, predicate: Option<Predicate>) -> PlanNode {
    let index = predicate.as_ref().and_then(|p| {
        top_level_conjuncts(p).into_iter().find_map(|q| match q {
            Predicate::Expr(c) if c.op == CmpOp::Eq && matches!(c.operand, Operand::Number(_)) => {
                ds.catalog.indexes_on(&c.column).next().map(|ix| ix.name.clone())
            }
            _ => None,
        })
    });
    let mut node = PlanNode::scan(
        if index.is_some() {
            Operator::IndexScan
        } else {
            Operator::SeqScan
        },
        table,
    );
    node.index = index;
    if let Some(p) = predicate {
        node.columns = p.referenced_columns();
        node.predicate = Some(p);
    }
    node
}

/// One unlabeled plan.
pub fn generate_query(ds: &Dataset, cfg: &WorkloadConfig, rng: &mut ChaCha8Rng) -> PlanTree {
    let n = rng.random_range(cfg.tables.0.max(1)..=cfg.tables.1.max(cfg.tables.0).max(1));
    let tables = pick_tables(rng, ds, n);
    let mut per_table: Vec<Vec<Predicate>> = vec![Vec::new(); tables.len()];
    for numeric in [true, false] {
        let range = if numeric {
            cfg.numeric_predicates
        } else {
            cfg.string_predicates
        };
        let want = rng.random_range(range.0..=range.1.max(range.0));
        let pool: Vec<(usize, String)> = tables
            .iter()
            .enumerate()
            .flat_map(|(i, t)| filter_columns(ds, t, numeric).into_iter().map(move |c| (i, c)))
            .collect();
        if pool.is_empty() {
            continue;
        }
        for _ in 0..want {
            let (i, col) = pool.choose(rng).unwrap();
            let used: usize = per_table[*i].iter().map(expanded_leaves).sum();
            if let Some(p) = leaf(rng, ds, cfg, col, numeric) {
                if used + expanded_leaves(&p) <= cfg.max_leaves {
                    per_table[*i].push(p);
                }
            }
        }
    }
    let mut scans = Vec::with_capacity(tables.len());
    for (t, mut leaves) in tables.iter().zip(per_table) {
        leaves.shuffle(rng);
        let pred = (!leaves.is_empty()).then(|| combine(rng, leaves, cfg.or_probability));
        scans.push(scan_for(ds, t, pred));
    }
    let mut scans = scans.into_iter();
    let mut plan = scans.next().expect("at least one table");
    for (k, inner) in scans.enumerate() {
        let t = &tables[k + 1];
        let (a, b) = tables[..=k]
            .iter()
            .find_map(|prev| ds.catalog.join_keys(prev, t))
            .expect("tables are connected");
        let op = if inner.op == Operator::IndexScan {
            Operator::NestedLoopJoin
        } else {
            Operator::HashJoin
        };
        plan = PlanNode::new(op)
            .with_columns([a, b])
            .with_predicate(Predicate::expr(a, CmpOp::Eq, Operand::Column(b.to_string())))
            .with_children(vec![plan, inner]);
    }
    let roll: f64 = rng.random();
    if roll < cfg.sort_probability {
        let cols: Vec<String> = tables.iter().flat_map(|t| filter_columns(ds, t, true)).collect();
        let mut sort = PlanNode::new(Operator::Sort);
        if let Some(c) = cols.choose(rng) {
            sort.columns.insert(c.clone());
        }
        plan = sort.with_children(vec![plan]);
    } else if roll < cfg.sort_probability + cfg.aggregate_probability {
        // Group by a low-cardinality column.
        let cols: Vec<String> = tables
            .iter()
            .flat_map(|t| ds.catalog.columns_of(t))
            .filter(|c| c.ndv <= 64 && !c.name.ends_with(".id"))
            .map(|c| c.name.clone())
            .collect();
        let mut agg = PlanNode::new(Operator::HashAggregate);
        if let Some(c) = cols.choose(rng) {
            agg.columns.insert(c.clone());
        }
        plan = agg.with_children(vec![plan]);
    }
    PlanTree::new(plan).expect("generated plans are well formed").binarize()
}

/// `cfg.queries` plans, labeled by the reference executor. Query `i` uses
/// its own seed stream; queries over the row limit are redrawn.
pub fn generate_workload(ds: &Dataset, cfg: &WorkloadConfig, exec: &ExecConfig) -> Vec<PlanTree> {
    (0..cfg.queries)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            loop {
                let mut plan = generate_query(ds, cfg, &mut rng);
                match label_plan(&mut plan, ds, exec) {
                    Ok(()) => break plan,
                    Err(ExecError::RowLimit { .. }) => continue,
                    Err(e) => panic!("generated plan failed to execute: {e}"),
                }
            }
        })
        .collect()
}

/// Unlabeled plans, without execution.
pub fn generate_queries(ds: &Dataset, cfg: &WorkloadConfig) -> Vec<PlanTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.queries).map(|_| generate_query(ds, cfg, &mut rng)).collect()
}
