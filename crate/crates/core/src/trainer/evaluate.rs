//! Q-error evaluation of the model and the baseline on one labeled
//! workload.

use std::fmt::Write as _;

use crate::model::{qerror, Metrics, MetricsError};
use crate::plan::PlanTree;

/// Per-query q-errors of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Errors {
    pub card: Vec<f64>,
    pub cost: Vec<f64>,
}

/// Q-errors of `estimates` (`(card, cost)` per plan) against the plans'
/// root labels.
pub fn qerrors(plans: &[PlanTree], estimates: &[(f64, f64)]) -> Result<Errors, MetricsError> {
    let mut card = Vec::with_capacity(plans.len());
    let mut cost = Vec::with_capacity(plans.len());
    for (p, &(c, k)) in plans.iter().zip(estimates) {
        let tc = p.root.true_card.ok_or(MetricsError::Empty)?;
        let tk = p.root.true_cost.ok_or(MetricsError::Empty)?;
        card.push(qerror(tc, c)?);
        cost.push(qerror(tk, k)?);
    }
    Ok(Errors { card, cost })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// One name per query, used in the raw file.
    pub names: Vec<String>,
    /// `(estimator name, errors)`, in output order.
    pub estimators: Vec<(String, Errors)>,
}

impl Evaluation {
    /// `(estimator, target, metrics)` rows.
    pub fn metrics(&self) -> Result<Vec<(String, &'static str, Metrics)>, MetricsError> {
        let mut rows = Vec::new();
        for (name, e) in &self.estimators {
            rows.push((name.clone(), "card", Metrics::compute(&e.card)?));
            rows.push((name.clone(), "cost", Metrics::compute(&e.cost)?));
        }
        Ok(rows)
    }

    /// Tab-separated metrics table with a header row.
    pub fn metrics_table(&self) -> Result<String, MetricsError> {
        let mut out = format!("estimator\ttarget\t{}\n", Metrics::HEADER);
        for (name, target, m) in self.metrics()? {
            writeln!(out, "{name}\t{target}\t{m}").unwrap();
        }
        Ok(out)
    }

    /// One row per query with every estimator's card and cost q-error.
    pub fn raw_errors(&self) -> String {
        let mut out = String::from("query");
        for (name, _) in &self.estimators {
            write!(out, "\t{name}_card\t{name}_cost").unwrap();
        }
        out.push('\n');
        for (i, q) in self.names.iter().enumerate() {
            out.push_str(q);
            for (_, e) in &self.estimators {
                write!(out, "\t{:.6}\t{:.6}", e.card[i], e.cost[i]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{Operator, PlanNode};

    fn labeled(card: f64, cost: f64) -> PlanTree {
        let mut n = PlanNode::scan(Operator::SeqScan, "t");
        n.set_labels(card, cost);
        PlanTree::new(n).unwrap()
    }

    #[test]
    fn oracle_labels_give_all_ones() {
        let plans: Vec<PlanTree> = (1..=20).map(|i| labeled(i as f64 * 3.0, i as f64 * 7.5)).collect();
        let truth: Vec<(f64, f64)> = plans
            .iter()
            .map(|p| (p.root.true_card.unwrap(), p.root.true_cost.unwrap()))
            .collect();
        let e = qerrors(&plans, &truth).unwrap();
        let eval = Evaluation {
            names: (0..20).map(|i| format!("q{i}")).collect(),
            estimators: vec![("oracle".into(), e)],
        };
        for (_, _, m) in eval.metrics().unwrap() {
            assert!(m.values().iter().all(|&v| v == 1.0));
        }
        let table = eval.metrics_table().unwrap();
        assert_eq!(table.lines().count(), 3);
        assert!(table.starts_with("estimator\ttarget\tmedian"));
        assert_eq!(eval.raw_errors().lines().count(), 21);
    }

    #[test]
    fn shared_labels() {
        let plans = vec![labeled(10.0, 100.0), labeled(4.0, 8.0)];
        let a = qerrors(&plans, &[(5.0, 100.0), (4.0, 16.0)]).unwrap();
        assert_eq!(a.card, vec![2.0, 1.0]);
        assert_eq!(a.cost, vec![1.0, 2.0]);
    }
}
