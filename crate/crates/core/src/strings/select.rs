//! Greedy rule selection under a substring budget.
//!
//! Candidates are ordered by how many non-workload substrings they
//! extract, fewest first, and popped one at a time into the selected set.
//! Whenever the extracted set reaches the budget, the selected rule with
//! the lowest workload-hit ratio is dropped. Selection stops once every
//! workload string is covered or the candidates run out.
//!
//! The greedy pass can miss a feasible cover under a tight budget. For
//! small candidate sets an exact search by increasing subset size is run
//! before reporting infeasibility.

use std::collections::{BTreeSet, HashMap};

use super::rule::{longest_literal, Rule, RuleMatcher};
use super::StringsError;

/// Candidate sets up to this size get an exact fallback search.
pub const EXACT_FALLBACK_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub rules: Vec<Rule>,
    /// Union of the substrings the selected rules extract (`S_R`).
    pub extracted: BTreeSet<String>,
    /// True when the greedy pass failed and the exact search found the cover.
    pub exact_fallback: bool,
}

struct Candidate {
    rule: Rule,
    extracted: BTreeSet<String>,
    hits: usize,
    excess: usize,
}

/// Substrings each rule extracts from the corpus.
///
/// Each distinct value is matched once per distinct pattern; patterns with
/// a literal token only visit the values containing it.
pub fn extraction_sets<'a, I>(rules: &[Rule], corpus: I) -> Vec<BTreeSet<String>>
where
    I: IntoIterator<Item = &'a str>,
{
    let distinct: BTreeSet<&str> = corpus.into_iter().collect();
    let values: Vec<(&str, Vec<char>)> = distinct.into_iter().map(|v| (v, v.chars().collect())).collect();
    let all: Vec<usize> = (0..values.len()).collect();
    let mut containing: HashMap<&str, Vec<usize>> = HashMap::new();
    let matcher = RuleMatcher::new(rules);
    let mut out = vec![BTreeSet::new(); rules.len()];
    let mut emit = |ri: usize, s: String| {
        out[ri].insert(s);
    };
    for (g, (pattern, _)) in matcher.groups().iter().enumerate() {
        let visit: &[usize] = match longest_literal(pattern) {
            Some(lit) => containing
                .entry(lit)
                .or_insert_with(|| (0..values.len()).filter(|&i| values[i].0.contains(lit)).collect()),
            None => &all,
        };
        for &vi in visit {
            matcher.for_each_in_group(g, &values[vi].1, &mut emit);
        }
    }
    out
}

pub fn select_rules<'a, I>(
    candidates: &[Rule],
    workload: &BTreeSet<String>,
    corpus: I,
    budget: usize,
) -> Result<Selection, StringsError>
where
    I: IntoIterator<Item = &'a str>,
{
    let sets = extraction_sets(candidates, corpus);
    select_with_sets(candidates, &sets, workload, budget)
}

/// Same as [`select_rules`] with precomputed extraction sets.
pub fn select_with_sets(
    candidates: &[Rule],
    sets: &[BTreeSet<String>],
    workload: &BTreeSet<String>,
    budget: usize,
) -> Result<Selection, StringsError> {
    assert_eq!(candidates.len(), sets.len());
    let mut pool: Vec<Candidate> = candidates
        .iter()
        .zip(sets)
        .map(|(rule, s)| {
            let hits = s.intersection(workload).count();
            Candidate {
                rule: rule.clone(),
                extracted: s.clone(),
                hits,
                excess: s.len() - hits,
            }
        })
        .collect();

    let coverable: BTreeSet<&String> = pool.iter().flat_map(|c| c.extracted.intersection(workload)).collect();
    let unreachable: Vec<String> = workload.iter().filter(|w| !coverable.contains(w)).cloned().collect();
    if !unreachable.is_empty() {
        return Err(StringsError::InfeasibleBudget {
            budget,
            uncovered: unreachable,
        });
    }

    // Pop order: fewest non-workload extractions first; among equals, the
    // one covering more workload strings, then the smaller set, then the
    // rule text.
    pool.sort_by(|a, b| {
        a.excess
            .cmp(&b.excess)
            .then(b.hits.cmp(&a.hits))
            .then(a.extracted.len().cmp(&b.extracted.len()))
            .then(a.rule.cmp(&b.rule))
    });

    let mut selected: Vec<usize> = Vec::new();
    let mut covered: BTreeSet<String> = BTreeSet::new();
    for (idx, cand) in pool.iter().enumerate() {
        if workload.is_subset(&covered) {
            break;
        }
        // A rule that covers nothing new cannot advance the loop.
        if cand.extracted.intersection(workload).all(|w| covered.contains(w)) {
            continue;
        }
        selected.push(idx);
        covered.extend(cand.extracted.iter().cloned());
        if covered.len() >= budget {
            let worst = selected
                .iter()
                .enumerate()
                .min_by(|(_, &x), (_, &y)| {
                    let rx = pool[x].hits as f64 / pool[x].extracted.len().max(1) as f64;
                    let ry = pool[y].hits as f64 / pool[y].extracted.len().max(1) as f64;
                    rx.total_cmp(&ry)
                })
                .map(|(pos, _)| pos)
                .unwrap();
            selected.remove(worst);
            covered = union(selected.iter().map(|&i| &pool[i].extracted));
        }
    }

    if workload.is_subset(&covered) && covered.len() < budget {
        return Ok(Selection {
            rules: selected.iter().map(|&i| pool[i].rule.clone()).collect(),
            extracted: covered,
            exact_fallback: false,
        });
    }

    if pool.len() <= EXACT_FALLBACK_LIMIT {
        if let Some(found) = exact_cover(&pool, workload, budget) {
            let extracted = union(found.iter().map(|&i| &pool[i].extracted));
            return Ok(Selection {
                rules: found.iter().map(|&i| pool[i].rule.clone()).collect(),
                extracted,
                exact_fallback: true,
            });
        }
    }
    Err(StringsError::InfeasibleBudget {
        budget,
        uncovered: workload.difference(&covered).cloned().collect(),
    })
}

fn union<'a, I: Iterator<Item = &'a BTreeSet<String>>>(sets: I) -> BTreeSet<String> {
    sets.flat_map(|s| s.iter().cloned()).collect()
}

/// Smallest subset (then smallest extraction set) meeting both constraints.
fn exact_cover(pool: &[Candidate], workload: &BTreeSet<String>, budget: usize) -> Option<Vec<usize>> {
    let n = pool.len();
    let mut best: Option<(usize, usize, Vec<usize>)> = None;
    for mask in 1u32..(1u32 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if let Some((size, _, _)) = &best {
            if members.len() > *size {
                continue;
            }
        }
        let s = union(members.iter().map(|&i| &pool[i].extracted));
        if s.len() >= budget || !workload.is_subset(&s) {
            continue;
        }
        let key = (members.len(), s.len());
        if best.as_ref().is_none_or(|(a, b, _)| key < (*a, *b)) {
            best = Some((key.0, key.1, members));
        }
    }
    best.map(|(_, _, m)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strings::rule::{PatternToken::*, StringFunction};

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn three_rules() -> Vec<Rule> {
        vec![
            Rule::new(StringFunction::Prefix, vec![Literal("06".into())], 2),
            Rule::new(StringFunction::Prefix, vec![Digits], 2),
            Rule::new(
                StringFunction::Suffix,
                vec![Literal("(".into()), Digits, Literal("-".into()), Digits],
                2,
            ),
        ]
    }

    #[test]
    fn picks_the_general_but_narrow_rule() {
        let corpus = ["(2002-06-29)", "(2014-08-26)"];
        let rules = three_rules();
        let sel = select_rules(&rules, &set(&["06", "08"]), corpus, 4).unwrap();
        assert_eq!(sel.rules, vec![rules[2].clone()]);
        assert_eq!(sel.extracted, set(&["06", "08"]));
        assert!(!sel.exact_fallback);
        // Same outcome with the default budget of 10 per workload string.
        let sel = select_rules(&rules, &set(&["06", "08"]), corpus, 20).unwrap();
        assert_eq!(sel.rules, vec![rules[2].clone()]);
    }

    #[test]
    fn single_exact_rule_suffices() {
        let r = Rule::new(StringFunction::Prefix, vec![Literal("Din".into())], 3);
        let sel = select_rules(std::slice::from_ref(&r), &set(&["Din"]), ["Dinos in Kas"], 1000).unwrap();
        assert_eq!(sel.rules, vec![r]);
    }

    #[test]
    fn uncoverable_strings_are_reported() {
        let rules = three_rules();
        match select_rules(&rules, &set(&["06", "99"]), ["(2002-06-29)"], 100) {
            Err(StringsError::InfeasibleBudget { uncovered, .. }) => assert_eq!(uncovered, vec!["99".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn budget_too_small_is_infeasible() {
        let rules = three_rules();
        // Covering both strings needs at least two extracted substrings.
        assert!(matches!(
            select_rules(&rules, &set(&["06", "08"]), ["(2002-06-29)", "(2014-08-26)"], 2),
            Err(StringsError::InfeasibleBudget { .. })
        ));
    }
}
